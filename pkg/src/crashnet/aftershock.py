"""Gutenberg-Richter statistics of peak-to-trough price swings."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ContractError, InsufficientEventsError


@dataclass(frozen=True)
class GRFit:
    a: float
    b: float
    r_squared: float
    ks_p: float
    n_events: int
    magnitudes: tuple[float, ...]

    def curve(self):
        """Distinct magnitudes and ``log10`` of their exceedance counts."""
        return exceedance_curve(self.magnitudes)


@dataclass(frozen=True)
class DeltaReport:
    b_pre: float
    b_post: float
    delta_b: float
    r2_post: float
    ks_p_post: float
    n_pre: int
    n_post: int

    @property
    def aftershock_like(self) -> bool:
        return self.delta_b < 0

    def to_dict(self):
        return {
            "b_pre": self.b_pre,
            "b_post": self.b_post,
            "delta_b": self.delta_b,
            "r2_post": self.r2_post,
            "ks_p_post": self.ks_p_post,
            "n_pre": self.n_pre,
            "n_post": self.n_post,
            "aftershock_like": self.aftershock_like,
        }


def turning_points(prices) -> list[int]:
    """Strict local extrema after collapsing flat runs to their first index."""
    p = np.asarray(prices, dtype=float)
    keep = np.concatenate([[True], p[1:] != p[:-1]])
    idx = np.flatnonzero(keep)
    q = p[idx]
    out = []
    for k in range(1, q.size - 1):
        if (q[k] > q[k - 1] and q[k] > q[k + 1]) or (q[k] < q[k - 1] and q[k] < q[k + 1]):
            out.append(int(idx[k]))
    return out


def peak_trough_magnitudes(prices) -> list[float]:
    """``|log10 P_a - log10 P_b|`` for each swing that starts at a turning point.

    Each extremum is paired with the next extremum of the opposite kind; the
    last one is paired with the final price, which closes the open swing.
    The leg before the first extremum is not counted because its starting
    point is not an extremum.
    """
    p = np.asarray(prices, dtype=float)
    if p.size < 3:
        raise ContractError("need at least three prices")
    if np.any(p <= 0):
        raise ContractError("prices must be positive")
    tp = turning_points(p)
    if not tp:
        return []
    ends = tp + [p.size - 1]
    logp = np.log10(p)
    return [float(abs(logp[ends[k]] - logp[ends[k + 1]])) for k in range(len(tp))]


def exceedance_curve(magnitudes):
    m = np.sort(np.asarray(magnitudes, dtype=float))
    distinct = np.unique(m)
    counts = m.size - np.searchsorted(m, distinct, side="left")
    return distinct, np.log10(counts)


def gr_fit(magnitudes) -> GRFit:
    """Least-squares ``log10 N(M) = a - b M`` over all distinct magnitudes.

    ``ks_p`` is the asymptotic two-sided Kolmogorov-Smirnov p-value of the
    magnitudes against the exponential law on ``[0, inf)`` with rate
    ``b * ln 10`` implied by the fitted slope.
    """
    mags = np.sort(np.asarray(magnitudes, dtype=float))
    if not np.all(np.isfinite(mags)):
        raise ContractError("magnitudes must be finite")
    x, y = exceedance_curve(mags)
    if x.size < 3:
        raise InsufficientEventsError(f"need at least 3 distinct magnitudes, got {x.size}")
    slope, intercept = np.polyfit(x, y, 1)
    fitted = intercept + slope * x
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    b = -float(slope)
    if b > 0:
        ks = stats.kstest(mags, "expon", args=(0.0, 1.0 / (b * np.log(10))), method="asymp")
        ks_p = float(ks.pvalue)
    else:
        ks_p = 0.0
    return GRFit(float(intercept), b, max(0.0, min(1.0, r2)), ks_p, int(mags.size), tuple(mags.tolist()))


def compare_periods(pre_fit: GRFit, post_fit: GRFit) -> DeltaReport:
    return DeltaReport(
        b_pre=pre_fit.b,
        b_post=post_fit.b,
        delta_b=post_fit.b - pre_fit.b,
        r2_post=post_fit.r_squared,
        ks_p_post=post_fit.ks_p,
        n_pre=pre_fit.n_events,
        n_post=post_fit.n_events,
    )


def write_curve(rows, path) -> None:
    """``rows``: iterable of ``(asset, period, magnitude, log10_n)``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["asset", "period", "magnitude", "log10_n"])
        for asset, period, m, ln in rows:
            w.writerow([asset, period, repr(float(m)), repr(float(ln))])
