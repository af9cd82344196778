"""Stage orchestration for a full analysis run.

Stages run in a fixed order and share a :class:`RunContext`. A stage whose
inputs were produced by an earlier invocation reads them back from the
output directory, so each CLI subcommand can run on its own.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .aftershock import compare_periods, gr_fit, peak_trough_magnitudes, write_curve
from .capm import abnormal_returns, write_fit_table
from .community import null_modularity_test, tree_edges, write_result
from .config import STAGES, RunConfig
from .errors import CrashnetError, InsufficientEventsError, StageError, ValidationError
from .hellinger import CrashSegmentation, rolling_hellinger, segment
from .hht import emd, hilbert_energy
from .minet import (
    conditional_mi_matrix,
    largest_component,
    mst_prim,
    read_tree_csv,
    to_graph,
    write_mi_matrix,
    write_tree_csv,
)
from .panel import PERIOD_LABELS, PricePanel, align_index, load_price_panel, log_returns, slice_panel, split_market
from .topo import metric_report, write_report

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"

DECISIONS = {
    "hellinger": "threshold mu + 2 sigma (sample sd); crash window is the hull of flagged days; "
                 "pre-crash starts at the first scored day",
    "hht": "EMD input is the log close of the market index",
    "capm": "market model fitted separately inside each period",
    "network": "equidistant histogram MI in nats; permutation p = (hits + 1) / (n_perm + 1); "
               "distance 1 / (mi + eps) on the largest connected component",
    "community": "p-value below 1/n_used is reported as an upper bound",
    "gr": "magnitudes from strict turning points; KS reference is the exponential law with rate b ln 10; "
          "pre-crash fit uses the pre-crash window alone",
    "missing": "assets with any missing close are dropped before analysis",
}


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


class RunContext:
    """Data shared between stages plus the bookkeeping for the manifest."""

    def __init__(self, cfg: RunConfig, command: str = "run-all"):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out)
        self.stage_status: dict[str, str] = {}
        self.outputs: list[Path] = []
        self.notes: dict = {}
        self._loaded = False
        self._segmentation: CrashSegmentation | None = None
        self._abnormal: dict = {}
        self._trees: dict = {}
        self._matrices: dict = {}

    # inputs ---------------------------------------------------------------
    def load(self):
        if self._loaded:
            return
        cfg = self.cfg
        raw = load_price_panel(cfg.prices, drop_missing=cfg.drop_missing)
        n_file = len(raw.assets)
        if cfg.market_is_column():
            prices, index = split_market(raw, cfg.market_index)
            n_file -= 1
        else:
            prices = raw
            index = align_index(raw, load_price_panel(cfg.market_index))
        self.prices = prices
        self.index_closes = index
        self.returns = log_returns(prices)
        self.market_returns = np.diff(np.log(index))
        self.notes["n_assets"] = len(prices.assets)
        self.notes["n_assets_dropped"] = n_file - len(prices.assets) if cfg.drop_missing else 0
        log.info("loaded %d assets x %d dates", len(prices.assets), len(prices.dates))
        self._loaded = True

    def emit(self, path) -> Path:
        p = Path(path)
        self.outputs.append(p)
        return p

    def period_dir(self, label) -> Path:
        d = self.out / label
        d.mkdir(parents=True, exist_ok=True)
        return d

    # shared intermediate results ------------------------------------------
    @property
    def segmentation(self) -> CrashSegmentation:
        if self._segmentation is None:
            path = self.out / "segmentation.json"
            if not path.exists():
                raise ValidationError(f"{path} not found; run the detect stage first")
            self._segmentation = CrashSegmentation.from_dict(json.loads(path.read_text())["windows"])
        return self._segmentation

    def abnormal(self, label):
        if label not in self._abnormal:
            self.load()
            window = dict(zip(PERIOD_LABELS, self.segmentation.windows))[label]
            r = slice_panel(self.returns, window)
            lo = self.returns.dates.index(r.dates[0])
            m = self.market_returns[lo:lo + len(r.dates)]
            self._abnormal[label] = abnormal_returns(r, m)
        return self._abnormal[label]

    def matrix(self, label, cfg=None):
        if label not in self._matrices:
            ar = self.abnormal(label)
            self._matrices[label] = conditional_mi_matrix(ar, cfg or self.cfg.mi_config(), self.cfg.threads)
        return self._matrices[label]

    def tree(self, label):
        if label not in self._trees:
            path = self.out / label / "mst_edges.csv"
            if not path.exists():
                raise ValidationError(f"{path} not found; run the network stage first")
            self._trees[label] = read_tree_csv(path)
        return self._trees[label]


# stages -----------------------------------------------------------------------
def stage_hellinger(ctx: RunContext):
    ctx.load()
    series = rolling_hellinger(ctx.returns, ctx.cfg.hellinger_config())
    flags = series.flags
    _write_rows(
        ctx.emit(ctx.out / "hellinger.csv"),
        ["date", "h", "threshold", "flag"],
        [[d, repr(float(h)), repr(series.h_d), int(f)] for d, h, f in zip(series.dates, series.values, flags)],
    )
    seg = segment(series, ctx.returns.dates)
    ctx._segmentation = seg
    _write_json(ctx.emit(ctx.out / "segmentation.json"), {
        "windows": seg.to_dict(),
        "mu_h": series.mu_h,
        "sigma_h": series.sigma_h,
        "threshold": series.h_d,
        "n_flagged": int(flags.sum()),
        "n_scored": int(flags.size),
        "flag_rate": float(flags.mean()),
    })
    ctx.notes["periods"] = [w.to_dict() for w in seg.windows]


def stage_hht(ctx: RunContext):
    ctx.load()
    cfg = ctx.cfg
    signal = np.log(ctx.index_closes)
    imfs = emd(signal, max_imfs=cfg.max_imfs, sift_cfg=cfg.sift_config())
    spec = hilbert_energy(imfs)
    dates = ctx.prices.dates
    _write_rows(ctx.emit(ctx.out / "hht_energy.csv"), ["date", "ie_n"],
                [[d, repr(float(v))] for d, v in zip(dates, spec.ie_n)])
    _write_rows(ctx.emit(ctx.out / "hht_spectrum.csv"), ["date", "freq_bin", "amplitude"],
                [[dates[t], b, repr(a)] for t, b, a in spec.grid()])
    _write_json(ctx.emit(ctx.out / "hht.json"), {
        "input": "log close of market index",
        "n_imfs": len(imfs.imfs),
        "peak_date": dates[int(np.argmax(spec.ie_n))],
        "max_reconstruction_error": float(np.max(np.abs(imfs.reconstruct() - signal))),
    })


def stage_capm(ctx: RunContext):
    for label in PERIOD_LABELS:
        ar = ctx.abnormal(label)
        write_fit_table(ar, ctx.emit(ctx.period_dir(label) / "capm_fits.csv"))


def stage_network(ctx: RunContext):
    cfg = ctx.cfg
    mi_cfg = cfg.mi_config()
    if cfg.alpha < 1.0 / (cfg.n_perm + 1):
        log.warning("alpha=%g is below the smallest attainable p-value 1/(n_perm+1)=%.4g; no pair can pass",
                    cfg.alpha, 1.0 / (cfg.n_perm + 1))
    summary = {}
    for label in PERIOD_LABELS:
        d = ctx.period_dir(label)
        m = ctx.matrix(label, mi_cfg)
        for p in write_mi_matrix(m, d, mi_cfg).values():
            ctx.emit(p)
        lcc = largest_component(to_graph(m, cfg.distance_eps))
        tree = mst_prim(lcc)
        ctx._trees[label] = tree
        write_tree_csv(tree, ctx.emit(d / "mst_edges.csv"))
        summary[label] = {
            "n_assets": len(m.assets),
            "n_significant": m.n_significant,
            "lcc_size": len(lcc.nodes),
            "tree_length": tree.total_distance,
        }
        log.info("%s: %d significant pairs, LCC %d nodes", label, m.n_significant, len(lcc.nodes))
    _write_json(ctx.emit(ctx.out / "network.json"), summary)


def stage_metrics(ctx: RunContext):
    for label in PERIOD_LABELS:
        d = ctx.period_dir(label)
        report = metric_report(ctx.tree(label))
        write_report(report, ctx.emit(d / "metrics.json"), ctx.emit(d / "metrics_nodes.csv"))


def stage_community(ctx: RunContext):
    cfg = ctx.cfg
    for label in PERIOD_LABELS:
        tree = ctx.tree(label)
        res = null_modularity_test(tree.n, tree_edges(tree), n_random=cfg.null_n, seed=cfg.seed,
                                   swaps_per_edge=cfg.swaps_per_edge, threads=cfg.threads)
        write_result(res, tree.nodes, ctx.emit(ctx.period_dir(label) / "community.json"))


def _gr_one(prices, pre, post):
    fits = {}
    for key, window in (("pre", pre), ("post", post)):
        closes = slice_panel(prices, window).closes[:, 0]
        fits[key] = gr_fit(peak_trough_magnitudes(closes))
    return fits


def stage_gr(ctx: RunContext):
    ctx.load()
    pre, _, post = ctx.segmentation.windows
    series = [("INDEX", PricePanel(ctx.prices.dates, ("INDEX",), ctx.index_closes[:, None]))]
    series += [(a, ctx.prices.select([a])) for a in ctx.prices.assets]
    per_asset, points = {}, []
    for name, panel in series:
        try:
            fits = _gr_one(panel, pre, post)
        except InsufficientEventsError as exc:
            per_asset[name] = {"error": str(exc)}
            continue
        per_asset[name] = compare_periods(fits["pre"], fits["post"]).to_dict()
        for key, label in (("pre", "pre_crash"), ("post", "post_crash")):
            x, y = fits[key].curve()
            points.extend((name, label, m, n) for m, n in zip(x, y))
    _write_json(ctx.emit(ctx.out / "gr.json"), {
        "ks_reference": "exponential, loc 0, rate b*ln(10), asymptotic two-sided",
        "assets": per_asset,
    })
    write_curve(points, ctx.emit(ctx.out / "gr_points.csv"))


STAGE_FUNCS = {
    "hellinger": stage_hellinger,
    "hht": stage_hht,
    "capm": stage_capm,
    "network": stage_network,
    "metrics": stage_metrics,
    "community": stage_community,
    "gr": stage_gr,
}
assert tuple(STAGE_FUNCS) == STAGES


def _manifest(ctx: RunContext, status, error=None) -> dict:
    cfg = ctx.cfg
    return {
        "tool": "crashnet",
        "command": ctx.command,
        "status": status,
        "error": error,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_dict(),
        "seeds": {"mi_permutation": cfg.seed, "null_rewiring": cfg.seed},
        "stages": ctx.stage_status,
        "decisions": DECISIONS,
        "versions": {
            "crashnet": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND,
        },
        "notes": ctx.notes,
        "outputs": sorted({p.relative_to(ctx.out).as_posix() for p in ctx.outputs}),
    }


def run_pipeline(cfg: RunConfig, command: str = "run-all", stages=None) -> dict:
    """Run the selected stages in order and write ``manifest.json``.

    Raises :class:`StageError` after recording the failure in the manifest;
    files written before the failure are kept.
    """
    cfg.validate_inputs()
    ctx = RunContext(cfg, command)
    ctx.out.mkdir(parents=True, exist_ok=True)
    selected = [s for s in STAGES if s in (stages or cfg.ordered_stages())]
    for s in STAGES:
        ctx.stage_status[s] = "pending" if s in selected else "skipped"
    for name in selected:
        log.info("stage %s", name)
        try:
            STAGE_FUNCS[name](ctx)
        except (CrashnetError, ValueError, ArithmeticError, OSError) as exc:
            ctx.stage_status[name] = "FAILED"
            err = {"stage": name, "cause": f"{type(exc).__name__}: {exc}"}
            _write_json(ctx.out / MANIFEST, _manifest(ctx, "FAILED", err))
            raise StageError(name, exc) from exc
        ctx.stage_status[name] = "ok"
    doc = _manifest(ctx, "ok")
    _write_json(ctx.out / MANIFEST, doc)
    return doc


def alpha_sweep(cfg: RunConfig) -> dict:
    """Metric reports for every level in ``cfg.alpha_sweep`` from one set of p-values."""
    cfg.validate_inputs()
    ctx = RunContext(cfg, "sweep-alpha")
    ctx.out.mkdir(parents=True, exist_ok=True)
    alphas = sorted(set(cfg.alpha_sweep))
    floor = 1.0 / (cfg.n_perm + 1)
    for a in alphas:
        if a < floor:
            log.warning("alpha=%g is below the smallest attainable p-value %.4g (n_perm=%d); no pair can pass",
                        a, floor, cfg.n_perm)
    base = ctx.cfg.mi_config(max(alphas))
    rows = []
    stage = "sweep-alpha"
    try:
        if not (ctx.out / "segmentation.json").exists():
            stage = "hellinger"
            stage_hellinger(ctx)
            ctx.stage_status["hellinger"] = "ok"
        for label in PERIOD_LABELS:
            m_all = ctx.matrix(label, base)
            for a in alphas:
                stage = f"sweep-alpha[alpha={a:g}, {label}]"
                m = m_all.with_alpha(a)
                d = ctx.out / "sweep" / f"alpha_{a:g}" / label
                d.mkdir(parents=True, exist_ok=True)
                lcc = largest_component(to_graph(m, cfg.distance_eps))
                row = {"alpha": a, "period": label, "n_significant": m.n_significant, "lcc_size": len(lcc.nodes)}
                if len(lcc.nodes) < 3:
                    # too few significant pairs for a tree; the level is reported without metrics
                    log.warning("alpha=%g, %s: largest component has %d node(s); metrics left empty",
                                a, label, len(lcc.nodes))
                    rows.append({**row, **{k: None for k in SWEEP_METRICS}})
                    continue
                tree = mst_prim(lcc)
                write_tree_csv(tree, ctx.emit(d / "mst_edges.csv"))
                report = metric_report(tree)
                write_report(report, ctx.emit(d / "metrics.json"), ctx.emit(d / "metrics_nodes.csv"))
                g = report.global_dict()
                rows.append({**row, **{k: g[k] for k in SWEEP_METRICS}})
    except (CrashnetError, ValueError, ArithmeticError, OSError) as exc:
        ctx.stage_status[stage] = "FAILED"
        _write_json(ctx.out / MANIFEST, _manifest(ctx, "FAILED", {"stage": stage, "cause": str(exc)}))
        raise StageError(stage, exc) from exc

    header = ["alpha", "period", "n_significant", "lcc_size", *SWEEP_METRICS]
    _write_rows(ctx.emit(ctx.out / "sweep_alpha.csv"), header,
                [[_num(r[h]) for h in header] for r in rows])
    stability = {}
    for key in ("n_significant", *SWEEP_METRICS):
        orders = {}
        for a in alphas:
            vals = {r["period"]: r[key] for r in rows if r["alpha"] == a}
            orders[f"{a:g}"] = sorted(PERIOD_LABELS, key=lambda p: (_sortable(vals[p]), p))
        stability[key] = {"orders": orders, "stable": len({tuple(o) for o in orders.values()}) == 1}
    monotone = all(
        [r["n_significant"] for r in rows if r["period"] == p] == sorted(r["n_significant"] for r in rows if r["period"] == p)
        for p in PERIOD_LABELS
    )
    _write_json(ctx.emit(ctx.out / "sweep_alpha.json"), {
        "alphas": alphas,
        "period_ordering": stability,
        "edge_count_non_decreasing_in_alpha": monotone,
    })
    ctx.stage_status["sweep-alpha"] = "ok"
    doc = _manifest(ctx, "ok")
    _write_json(ctx.out / MANIFEST, doc)
    return doc


SWEEP_METRICS = ("avg_path_length", "avg_weighted_degree", "algebraic_connectivity", "assortativity",
                 "global_efficiency", "tree_length", "n_nodes")


def _sortable(v):
    return float("inf") if v is None or (isinstance(v, float) and np.isnan(v)) else v


def _num(v):
    return repr(float(v)) if isinstance(v, float) else v
