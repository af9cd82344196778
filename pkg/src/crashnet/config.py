"""Run configuration in a flat ``key = value`` text format."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ContractError, ParseError, ValidationError
from .hellinger import HellingerConfig
from .hht import SiftConfig
from .minet import DISTANCE_EPS, MIConfig

STAGES = ("hellinger", "hht", "capm", "network", "metrics", "community", "gr")


@dataclass(frozen=True)
class RunConfig:
    prices: str = ""
    # path to a one-column index CSV, or the name of a column inside the prices file
    market_index: str = ""
    out: str = "out"
    seed: int = 0
    threads: int = 1
    stages: tuple[str, ...] = STAGES
    drop_missing: bool = True
    window: int = 60
    hellinger_bins: int = 30
    clip_lo: float = 0.005
    clip_hi: float = 0.995
    max_imfs: int = 10
    sift_sd: float = 0.2
    max_sifts: int = 50
    mi_bins: int = 16
    n_perm: int = 100
    alpha: float = 0.05
    alpha_sweep: tuple[float, ...] = (0.01, 0.05, 0.10)
    distance_eps: float = DISTANCE_EPS
    null_n: int = 1000
    swaps_per_edge: int = 10

    def __post_init__(self):
        bad = [s for s in self.stages if s not in STAGES]
        if bad:
            raise ContractError(f"unknown stage(s) {bad}; choose from {list(STAGES)}")
        if self.threads < 1:
            raise ContractError("threads must be >= 1")
        self.hellinger_config()
        self.mi_config()

    def hellinger_config(self) -> HellingerConfig:
        return HellingerConfig(self.window, self.hellinger_bins, (self.clip_lo, self.clip_hi))

    def mi_config(self, alpha: float | None = None) -> MIConfig:
        return MIConfig(self.mi_bins, self.n_perm, self.alpha if alpha is None else alpha, self.seed)

    def sift_config(self) -> SiftConfig:
        return SiftConfig(self.sift_sd, self.max_sifts)

    def ordered_stages(self) -> tuple[str, ...]:
        return tuple(s for s in STAGES if s in self.stages)

    def market_is_column(self) -> bool:
        return not Path(self.market_index).suffix and not Path(self.market_index).exists()

    def validate_inputs(self) -> None:
        """Fail before any stage runs when an input file is missing."""
        if not self.prices:
            raise ValidationError("no prices file given")
        if not Path(self.prices).is_file():
            raise ValidationError(f"prices file not found: {self.prices}")
        if not self.market_index:
            raise ValidationError("no market index given (file path or column name)")
        if not self.market_is_column() and not Path(self.market_index).is_file():
            raise ValidationError(f"index file not found: {self.market_index}")

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        return {f.name: _render(getattr(self, f.name)) for f in fields(self)}


def _render(v):
    if isinstance(v, tuple):
        return list(v)
    return v


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def dump_config(cfg: RunConfig | None = None) -> str:
    cfg = cfg or RunConfig()
    lines = ["# crashnet run configuration (key = value; '#' starts a comment)"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def _convert(name, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            if default and isinstance(default[0], float):
                return tuple(float(x) for x in items)
            return tuple(items)
    except ValueError:
        raise ParseError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ParseError(str(exc).replace("\n", " ")) from None
    defaults = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for key, raw in cp["run"].items():
        if key not in known:
            raise ParseError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw, getattr(defaults, key))
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
