"""Synthetic market with a common factor, planted dependencies and a crash regime.

Returns follow ``r_i = beta_i * f_t + e_i`` with Gaussian factor ``f_t``.
Idiosyncratic parts ``e_i`` load on shared latent series: one per planted
pair (loading ``sqrt(c)`` on both members) and one per sector (loading
``sqrt(s)`` on every member), with the remaining variance drawn
independently. Without overlaps this makes the pairwise residual
correlation exactly ``c`` (planted) or ``s`` (same sector).

A crash multiplies factor and residual volatility over its window and adds
``coupling_boost`` to every coupling; ``post_boost`` keeps a smaller excess
coupling from the end of the crash to the end of the sample.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .panel import PricePanel, write_price_panel


@dataclass(frozen=True)
class CrashSpec:
    start: int
    length: int
    vol_multiplier: float = 5.0
    coupling_boost: float = 0.0
    post_boost: float = 0.0

    def __post_init__(self):
        if self.vol_multiplier < 1:
            raise ContractError("vol_multiplier must be >= 1")
        if self.start < 0 or self.length < 1:
            raise ContractError("crash start must be >= 0 and length >= 1")


@dataclass(frozen=True)
class SynthSpec:
    n_assets: int
    n_days: int
    betas: tuple[float, ...] | None = None
    planted_pairs: tuple[tuple[int, int, float], ...] = ()
    crash: CrashSpec | None = None
    seed: int = 0
    factor_vol: float = 0.01
    idio_vol: float = 0.01
    n_sectors: int = 0
    sector_coupling: float = 0.0
    start_date: str = "2019-09-02"

    def __post_init__(self):
        if self.n_assets < 1 or self.n_days < 2:
            raise ContractError("need n_assets >= 1 and n_days >= 2")
        if self.betas is not None and len(self.betas) != self.n_assets:
            raise ContractError("betas must have one entry per asset")
        for i, j, c in self.planted_pairs:
            if not (0 <= i < self.n_assets and 0 <= j < self.n_assets) or i == j:
                raise ContractError(f"planted pair ({i}, {j}) references invalid assets")
            if not 0.0 <= c <= 1.0:
                raise ContractError(f"planted coupling {c} outside [0, 1]")
        if self.crash is not None and self.crash.start + self.crash.length > self.n_days - 1:
            raise ContractError("crash window extends past the last return")
        if self.n_sectors < 0 or self.n_sectors > self.n_assets:
            raise ContractError("n_sectors must be in [0, n_assets]")


@dataclass
class GroundTruth:
    betas: list
    planted_pairs: list
    sectors: list
    crash_dates: tuple | None
    market_name: str = "INDEX"
    spec: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def tickers(n):
    width = max(3, len(str(n - 1)))
    return tuple(f"S{k:0{width}d}" for k in range(n))


def trading_dates(start, n):
    first = np.busday_offset(np.datetime64(start), 0, roll="forward")
    return tuple(str(d) for d in np.busday_offset(first, np.arange(n)))


def _loadings(spec, sectors, boost):
    n = spec.n_assets
    n_pairs = len(spec.planted_pairs)
    load = np.zeros((n, n_pairs + spec.n_sectors))
    for k, (i, j, c) in enumerate(spec.planted_pairs):
        a = np.sqrt(min(1.0, c + boost))
        load[i, k] = load[j, k] = a
    if spec.n_sectors:
        s = min(1.0, spec.sector_coupling + boost)
        for i, g in enumerate(sectors):
            load[i, n_pairs + g] = np.sqrt(s)
    total = (load ** 2).sum(axis=1)
    over = total > 1.0
    load[over] /= np.sqrt(total[over])[:, None]
    idio = np.sqrt(np.clip(1.0 - (load ** 2).sum(axis=1), 0.0, None))
    return load, idio


def generate(spec: SynthSpec):
    """Return ``(prices, index_prices, truth)``; index closes are ``100 * exp(cumsum f)``."""
    rng = np.random.default_rng(spec.seed)
    n, t_ret = spec.n_assets, spec.n_days - 1
    betas = np.asarray(spec.betas, dtype=float) if spec.betas is not None else rng.uniform(0.5, 1.5, n)
    sectors = [i % spec.n_sectors for i in range(n)] if spec.n_sectors else []

    regime = np.zeros(t_ret, dtype=int)  # 0 calm, 1 crash, 2 post-crash
    vol = np.ones(t_ret)
    if spec.crash is not None:
        c = spec.crash
        regime[c.start:c.start + c.length] = 1
        regime[c.start + c.length:] = 2
        vol[c.start:c.start + c.length] = c.vol_multiplier

    f = rng.standard_normal(t_ret) * spec.factor_vol * vol
    eps = rng.standard_normal((t_ret, n))
    n_latent = len(spec.planted_pairs) + spec.n_sectors
    z = rng.standard_normal((t_ret, n_latent))

    boosts = {0: 0.0, 1: 0.0, 2: 0.0}
    if spec.crash is not None:
        boosts[1] = spec.crash.coupling_boost
        boosts[2] = spec.crash.post_boost
    e = np.empty((t_ret, n))
    for reg, boost in boosts.items():
        rows = regime == reg
        if not rows.any():
            continue
        load, idio = _loadings(spec, sectors, boost)
        e[rows] = z[rows] @ load.T + eps[rows] * idio
    e *= (spec.idio_vol * vol)[:, None]

    r = f[:, None] * betas[None, :] + e
    dates = trading_dates(spec.start_date, spec.n_days)
    logp = np.vstack([np.zeros((1, n)), np.cumsum(r, axis=0)])
    prices = PricePanel(dates, tickers(n), 100.0 * np.exp(logp))
    index_logp = np.concatenate([[0.0], np.cumsum(f)])
    index = PricePanel(dates, ("INDEX",), 100.0 * np.exp(index_logp)[:, None])

    crash_dates = None
    if spec.crash is not None:
        # return row k ends on price date k+1
        crash_dates = (dates[spec.crash.start + 1], dates[spec.crash.start + spec.crash.length])
    truth = GroundTruth(
        betas=[float(b) for b in betas],
        planted_pairs=[[int(i), int(j), float(c)] for i, j, c in spec.planted_pairs],
        sectors=sectors,
        crash_dates=crash_dates,
        spec=_spec_dict(spec),
    )
    return prices, index, truth


def _spec_dict(spec):
    d = asdict(spec)
    d["planted_pairs"] = [list(p) for p in spec.planted_pairs]
    return d


def write_synthetic(spec: SynthSpec, out_dir) -> dict:
    """Write ``prices.csv``, ``index.csv`` and ``truth.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prices, index, truth = generate(spec)
    write_price_panel(prices, out / "prices.csv")
    write_price_panel(index, out / "index.csv")
    (out / "truth.json").write_text(truth.to_json() + "\n")
    return {"prices": str(out / "prices.csv"), "index": str(out / "index.csv"), "truth": str(out / "truth.json")}


def regime_shift_spec(seed=0, n_assets=100, n_days=300, start=150, length=20, vol_multiplier=5.0):
    """Plain volatility-shift panel used to exercise the crash detector."""
    crash = CrashSpec(start, length, vol_multiplier) if length else None
    return SynthSpec(n_assets=n_assets, n_days=n_days, crash=crash, seed=seed)


def three_regime_spec(seed=0, n_assets=50, n_days=400):
    """Calm, crash and post-crash regimes with sector couplings 0.05, 0.75 and 0.30.

    The common factor is kept weak so that each day's cross-section is not
    dominated by the market move, which keeps the detector's flags inside
    the crash and its immediate aftermath.
    """
    return SynthSpec(
        n_assets=n_assets, n_days=n_days, seed=seed,
        crash=CrashSpec(n_days // 2, 40, 5.0, coupling_boost=0.7, post_boost=0.25),
        n_sectors=5, sector_coupling=0.05, factor_vol=0.002,
    )
