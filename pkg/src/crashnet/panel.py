"""Price/return panels: CSV ingestion, log returns and period slicing.

Dates are kept as ISO ``YYYY-MM-DD`` strings. They are only ever compared,
never used for calendar arithmetic, and ISO strings sort chronologically.
"""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ContractError,
    EmptyWindowError,
    InsufficientDataError,
    ParseError,
    ValidationError,
)

log = logging.getLogger(__name__)

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

PERIOD_LABELS = ("pre_crash", "crash", "post_crash")


@dataclass(frozen=True)
class PricePanel:
    """Close prices, one row per trading day and one column per asset."""

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    closes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        closes = np.array(self.closes, dtype=float)
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)
        _check_axes(self.dates, self.assets, closes)
        if not np.all(np.isfinite(closes)):
            raise ValidationError("close prices must be finite")
        bad = np.argwhere(closes <= 0)
        if bad.size:
            t, i = bad[0]
            raise ValidationError(
                f"non-positive price {closes[t, i]!r} for '{self.assets[i]}' "
                f"on {self.dates[t]} (row {t + 1})"
            )

    @property
    def shape(self):
        return self.closes.shape

    def column(self, ticker: str) -> np.ndarray:
        return self.closes[:, self.assets.index(ticker)]

    def select(self, tickers: Sequence[str]) -> "PricePanel":
        idx = [self.assets.index(t) for t in tickers]
        return PricePanel(self.dates, tuple(tickers), self.closes[:, idx])


@dataclass(frozen=True)
class ReturnPanel:
    """Log returns; row ``t`` holds the return from day ``t-1`` to day ``t``."""

    dates: tuple[str, ...]
    assets: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        returns = np.array(self.returns, dtype=float)
        if returns.ndim == 1:
            returns = returns[:, None]
        returns.setflags(write=False)
        object.__setattr__(self, "returns", returns)
        _check_axes(self.dates, self.assets, returns)
        if not np.all(np.isfinite(returns)):
            raise ValidationError("returns must be finite")

    @property
    def shape(self):
        return self.returns.shape

    def column(self, ticker: str) -> np.ndarray:
        return self.returns[:, self.assets.index(ticker)]


@dataclass(frozen=True)
class PeriodWindow:
    label: str
    start: str
    end: str

    def __post_init__(self):
        if self.label not in PERIOD_LABELS:
            raise ContractError(f"unknown period label {self.label!r}")
        if self.start > self.end:
            raise ContractError(f"window {self.label}: start {self.start} after end {self.end}")

    def contains(self, date: str) -> bool:
        return self.start <= date <= self.end

    def to_dict(self):
        return {"label": self.label, "start": self.start, "end": self.end}


def _check_axes(dates, assets, values):
    if values.ndim != 2 or values.shape != (len(dates), len(assets)):
        raise ValidationError(
            f"matrix shape {values.shape} does not match {len(dates)} dates x {len(assets)} assets"
        )
    if len(set(assets)) != len(assets):
        dupes = sorted({a for a in assets if assets.count(a) > 1})
        raise ValidationError(f"duplicate tickers: {dupes}")
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValidationError(f"dates not strictly increasing at {a} -> {b}")


def load_price_panel(path, drop_missing: bool = False) -> PricePanel:
    """Read a ``date,<ticker>,...`` CSV of close prices.

    Rows may appear in any order; the panel is sorted by date. Missing cells
    are an error unless ``drop_missing`` is set, in which case every ticker
    with a gap is removed (with a warning) and the rest are kept.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise ParseError("header must be 'date,<ticker>,...'", line=1)
        tickers = header[1:]
        if any(not t for t in tickers):
            raise ParseError("empty ticker name in header", line=1)

        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line=line_no
                )
            date = row[0].strip()
            if not _ISO_DATE.match(date):
                raise ParseError(f"bad date {date!r} (want YYYY-MM-DD)", line=line_no)
            values = []
            for ticker, cell in zip(tickers, row[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() in ("na", "nan", "null"):
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"cannot parse {cell!r} for '{ticker}'", line=line_no
                    ) from None
            rows.append((date, line_no, values))

    if not rows:
        raise ParseError("no data rows", line=2)
    rows.sort(key=lambda r: r[0])
    for (d1, l1, _), (d2, l2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise ValidationError(f"duplicate date {d1} (lines {l1} and {l2})")

    closes = np.array([r[2] for r in rows], dtype=float)
    dates = [r[0] for r in rows]

    missing = np.isnan(closes)
    if missing.any():
        if not drop_missing:
            t, i = np.argwhere(missing)[0]
            raise ValidationError(
                f"missing price for '{tickers[i]}' on {dates[t]} (line {rows[t][1]})"
            )
        keep = ~missing.any(axis=0)
        dropped = [t for t, k in zip(tickers, keep) if not k]
        log.warning("dropping %d asset(s) with missing prices: %s", len(dropped), ", ".join(dropped))
        tickers = [t for t, k in zip(tickers, keep) if k]
        closes = closes[:, keep]
        if not tickers:
            raise ValidationError("every asset has missing prices")

    bad = np.argwhere(closes <= 0)
    if bad.size:
        t, i = bad[0]
        raise ValidationError(
            f"non-positive price {closes[t, i]!r} for '{tickers[i]}' "
            f"on {dates[t]} (row {t + 1}, line {rows[t][1]})"
        )
    return PricePanel(tuple(dates), tuple(tickers), closes)


def write_price_panel(panel: PricePanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.assets])
        for date, row in zip(panel.dates, panel.closes):
            w.writerow([date, *(repr(float(v)) for v in row)])


def log_returns(panel: PricePanel) -> ReturnPanel:
    if len(panel.dates) < 2:
        raise InsufficientDataError("need at least two price rows to form a return")
    logp = np.log(panel.closes)
    return ReturnPanel(panel.dates[1:], panel.assets, np.diff(logp, axis=0))


def slice_panel(panel, window: PeriodWindow):
    """Rows with ``window.start <= date <= window.end``; works for price and return panels."""
    rows = [k for k, d in enumerate(panel.dates) if window.contains(d)]
    if not rows:
        raise EmptyWindowError(
            f"window {window.label} [{window.start}, {window.end}] has no dates in "
            f"[{panel.dates[0]}, {panel.dates[-1]}]"
        )
    lo, hi = rows[0], rows[-1] + 1
    dates = panel.dates[lo:hi]
    if isinstance(panel, PricePanel):
        return dataclasses.replace(panel, dates=dates, closes=panel.closes[lo:hi])
    return dataclasses.replace(panel, dates=dates, returns=panel.returns[lo:hi])


def split_market(panel: PricePanel, column: str) -> tuple[PricePanel, np.ndarray]:
    """Separate a benchmark index column from the asset columns."""
    if column not in panel.assets:
        raise ContractError(f"market column {column!r} not in panel")
    rest = tuple(a for a in panel.assets if a != column)
    return panel.select(rest), panel.column(column).copy()


def align_index(panel: PricePanel, index: PricePanel) -> np.ndarray:
    """Index closes on exactly the panel's dates; a date the index lacks is an error."""
    if len(index.assets) != 1:
        raise ContractError("index file must hold exactly one price column")
    lookup = dict(zip(index.dates, index.closes[:, 0]))
    missing = [d for d in panel.dates if d not in lookup]
    if missing:
        raise ValidationError(
            f"index has no close for {len(missing)} panel date(s), first {missing[0]}"
        )
    return np.array([lookup[d] for d in panel.dates])
