"""Single-index market model fits and abnormal returns."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DegenerateRegressorError
from .panel import ReturnPanel


@dataclass(frozen=True)
class CapmFit:
    alpha: float
    beta: float
    residual_variance: float


@dataclass(frozen=True)
class AbnormalReturnPanel:
    dates: tuple[str, ...]
    assets: tuple[str, ...]
    returns: np.ndarray
    fits: dict

    @property
    def shape(self):
        return self.returns.shape

    def column(self, ticker):
        return self.returns[:, self.assets.index(ticker)]


def ols_fit(stock, market) -> CapmFit:
    y = np.asarray(stock, dtype=float)
    x = np.asarray(market, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise ContractError(f"stock and market lengths differ: {y.shape} vs {x.shape}")
    if y.size < 3:
        raise ContractError("ols_fit needs at least 3 observations")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DegenerateRegressorError("market returns have zero variance")
    beta = float(xc @ (y - y.mean())) / sxx
    alpha = float(y.mean() - beta * x.mean())
    resid = y - alpha - beta * x
    return CapmFit(alpha, beta, float(resid @ resid) / (y.size - 2))


def _market_values(panel, market):
    if isinstance(market, ReturnPanel):
        if market.dates != panel.dates:
            raise ContractError("market series dates do not match the panel dates")
        if market.returns.shape[1] != 1:
            raise ContractError("market panel must have a single column")
        return market.returns[:, 0]
    m = np.asarray(market, dtype=float)
    if m.shape != (len(panel.dates),):
        raise ContractError(f"market series has shape {m.shape}, panel has {len(panel.dates)} rows")
    return m


def abnormal_returns(panel: ReturnPanel, market) -> AbnormalReturnPanel:
    """Residuals of each asset's regression on the market return."""
    m = _market_values(panel, market)
    fits = {}
    out = np.empty_like(panel.returns)
    for k, ticker in enumerate(panel.assets):
        try:
            fit = ols_fit(panel.returns[:, k], m)
        except (ContractError, DegenerateRegressorError) as exc:
            raise type(exc)(f"{ticker}: {exc}") from None
        fits[ticker] = fit
        out[:, k] = panel.returns[:, k] - fit.alpha - fit.beta * m
    out.setflags(write=False)
    return AbnormalReturnPanel(panel.dates, panel.assets, out, fits)


def write_fit_table(ar: AbnormalReturnPanel, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "alpha", "beta", "resid_var"])
        for t in ar.assets:
            f = ar.fits[t]
            w.writerow([t, repr(f.alpha), repr(f.beta), repr(f.residual_variance)])
