"""Rolling Hellinger-distance crash detector.

For each day ``t`` after the first ``W`` rows, the pooled returns of the
preceding ``W`` days (all assets) form the reference sample and the ``N``
returns of day ``t`` form the current sample. Both are binned on shared
edges spanning the central quantiles of their union, and the Hellinger
distance between the two histograms is recorded. Days above
``mean + 2 * std`` of the whole series are flagged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, EmptyHistogramError, NoCrashDetectedError
from .panel import PeriodWindow, ReturnPanel


@dataclass(frozen=True)
class HellingerConfig:
    window_w: int = 60
    bins_b: int = 30
    clip_quantiles: tuple[float, float] = (0.005, 0.995)

    def __post_init__(self):
        if int(self.window_w) != self.window_w or self.window_w < 2:
            raise ContractError("window_w must be an integer >= 2")
        if int(self.bins_b) != self.bins_b or self.bins_b < 2:
            raise ContractError("bins_b must be an integer >= 2")
        lo, hi = self.clip_quantiles
        if not (0.0 <= lo < hi <= 1.0):
            raise ContractError("clip_quantiles must satisfy 0 <= q_lo < q_hi <= 1")


@dataclass(frozen=True)
class HellingerSeries:
    dates: tuple[str, ...]
    values: np.ndarray
    mu_h: float
    sigma_h: float
    h_d: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h_d", self.mu_h + 2.0 * self.sigma_h)

    @classmethod
    def from_values(cls, dates, values):
        values = np.asarray(values, dtype=float)
        sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(tuple(dates), values, float(values.mean()), sigma)

    @property
    def flags(self) -> np.ndarray:
        return self.values > self.h_d


@dataclass(frozen=True)
class CrashSegmentation:
    pre: PeriodWindow
    crash: PeriodWindow
    post: PeriodWindow

    def __post_init__(self):
        if not (self.pre.end < self.crash.start and self.crash.end < self.post.start):
            raise ContractError("period windows must be disjoint and ordered pre < crash < post")

    @property
    def windows(self) -> tuple[PeriodWindow, PeriodWindow, PeriodWindow]:
        return (self.pre, self.crash, self.post)

    def to_dict(self):
        return {w.label: {"start": w.start, "end": w.end} for w in self.windows}

    @classmethod
    def from_dict(cls, d):
        return cls(*(PeriodWindow(k, d[k]["start"], d[k]["end"]) for k in ("pre_crash", "crash", "post_crash")))


def histogram_probs(samples, edges) -> np.ndarray:
    """Bin probabilities on ``edges``: half-open bins, the last one closed.

    Samples outside ``[edges[0], edges[-1]]`` are ignored.
    """
    x = np.asarray(samples, dtype=float).ravel()
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ContractError("edges must be a strictly increasing sequence of length >= 2")
    x = x[(x >= edges[0]) & (x <= edges[-1])]
    if x.size == 0:
        raise EmptyHistogramError("no samples fall inside the bin range")
    nb = edges.size - 1
    idx = np.searchsorted(edges, x, side="right") - 1
    idx[idx == nb] = nb - 1
    counts = np.bincount(idx, minlength=nb).astype(float)
    return counts / counts.sum()


def hellinger_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ContractError(f"probability vectors differ in shape: {p.shape} vs {q.shape}")
    for name, v in (("p", p), ("q", q)):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ContractError(f"{name} is not a probability vector")
    h2 = 0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)
    # rounding can push h2 a hair past 1 on disjoint supports
    return float(np.sqrt(min(h2, 1.0)))


def _day_distance(reference, current, cfg):
    pooled = np.concatenate([reference, current])
    a, b = np.quantile(pooled, cfg.clip_quantiles)
    if not b > a:
        raise EmptyHistogramError("pooled returns are degenerate (zero clipped range)")
    edges = np.linspace(a, b, cfg.bins_b + 1)
    return hellinger_distance(histogram_probs(reference, edges), histogram_probs(current, edges))


def rolling_hellinger(panel: ReturnPanel, cfg: HellingerConfig | None = None) -> HellingerSeries:
    cfg = cfg or HellingerConfig()
    r = panel.returns
    w = cfg.window_w
    if r.shape[0] <= w:
        raise ContractError(f"need more than {w} return rows, got {r.shape[0]}")
    values = np.empty(r.shape[0] - w)
    for k in range(w, r.shape[0]):
        try:
            values[k - w] = _day_distance(r[k - w:k].ravel(), r[k], cfg)
        except EmptyHistogramError as exc:
            raise EmptyHistogramError(f"{panel.dates[k]}: {exc}") from None
    return HellingerSeries.from_values(panel.dates[w:], values)


def segment(series: HellingerSeries, panel_dates) -> CrashSegmentation:
    """Split into pre-crash / crash / post-crash around the flagged days.

    The crash window is the hull from the first to the last flagged day. The
    pre-crash window starts at the first scored day; the post-crash window
    runs to the end of ``panel_dates``.
    """
    flagged = np.flatnonzero(series.flags)
    if flagged.size == 0:
        raise NoCrashDetectedError(
            f"no day exceeds the threshold {series.h_d:.6g} (max H = {series.values.max():.6g})"
        )
    first, last = int(flagged[0]), int(flagged[-1])
    if first == 0:
        raise NoCrashDetectedError(
            f"threshold already exceeded on the first scored day {series.dates[0]}; no pre-crash period"
        )
    panel_dates = list(panel_dates)
    crash_end = series.dates[last]
    after = [d for d in panel_dates if d > crash_end]
    if not after:
        raise NoCrashDetectedError(f"crash runs to the last date {crash_end}; no post-crash period")
    return CrashSegmentation(
        PeriodWindow("pre_crash", series.dates[0], series.dates[first - 1]),
        PeriodWindow("crash", series.dates[first], crash_end),
        PeriodWindow("post_crash", after[0], panel_dates[-1]),
    )
