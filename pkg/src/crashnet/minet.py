"""Mutual-information dependency networks.

Pipeline: equidistant-histogram MI between abnormal-return series, a
permutation test per pair, zeroing of insignificant entries, the
``1 / (mi + eps)`` distance transform, largest connected component and a
Prim minimum spanning tree.
"""
from __future__ import annotations

import csv
import heapq
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ContractError

DISTANCE_EPS = 1e-9
# permuted MI within this of the observed value counts as a tie (>=)
TIE_ATOL = 1e-12


@dataclass(frozen=True)
class MIConfig:
    n_bins: int = 16
    n_perm: int = 100
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_bins < 2:
            raise ContractError("n_bins must be >= 2")
        if self.n_perm < 1:
            raise ContractError("n_perm must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ContractError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class MIMatrix:
    assets: tuple[str, ...]
    mi_raw: np.ndarray
    pvalues: np.ndarray
    alpha: float
    mask: np.ndarray = field(init=False)
    mi: np.ndarray = field(init=False)

    def __post_init__(self):
        mask = self.pvalues <= self.alpha
        np.fill_diagonal(mask, False)
        mi = np.where(mask, self.mi_raw, 0.0)
        for a in (mask, mi):
            a.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "mi", mi)

    def with_alpha(self, alpha: float) -> "MIMatrix":
        return MIMatrix(self.assets, self.mi_raw, self.pvalues, alpha)

    @property
    def n_significant(self) -> int:
        return int(np.count_nonzero(np.triu(self.mask, 1)))


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    distance: float
    mi: float


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def adjacency(self):
        adj = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.i].append((e.j, e))
            adj[e.j].append((e.i, e))
        return adj


@dataclass(frozen=True)
class SpanningTree:
    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if len(self.edges) != max(len(self.nodes) - 1, 0):
            raise ContractError(f"a tree on {len(self.nodes)} nodes needs {len(self.nodes) - 1} edges")

    @property
    def n(self) -> int:
        return len(self.nodes)

    def neighbors(self):
        adj = [[] for _ in self.nodes]
        for e in self.edges:
            adj[e.i].append(e.j)
            adj[e.j].append(e.i)
        return adj

    def weight_matrix(self, kind: str) -> np.ndarray:
        """Symmetric matrix of ``'mi'``, ``'distance'`` or ``'binary'`` weights."""
        w = np.zeros((self.n, self.n))
        for e in self.edges:
            v = {"mi": e.mi, "distance": e.distance, "binary": 1.0}[kind]
            w[e.i, e.j] = w[e.j, e.i] = v
        return w

    @property
    def total_distance(self) -> float:
        # exactly rounded, so any edge order gives the same total
        return math.fsum(e.distance for e in self.edges)


def bin_indices(x, n_bins: int) -> np.ndarray:
    """Equidistant bins over the observed ``[min, max]``; the maximum lands in the top bin."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.size, dtype=np.intp)
    idx = np.floor((x - lo) / (hi - lo) * n_bins).astype(np.intp)
    return np.minimum(idx, n_bins - 1)


def _check_pair(x, y, n_bins):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size < n_bins:
        raise ContractError(f"need at least n_bins={n_bins} observations, got {x.size}")
    return x, y


def mi_histogram(x, y, n_bins: int = 16) -> float:
    """Plug-in MI in nats from an ``n_bins x n_bins`` equidistant joint histogram."""
    x, y = _check_pair(x, y, n_bins)
    return kernels.joint_mi(bin_indices(x, n_bins), bin_indices(y, n_bins), n_bins)


def pair_seed(seed: int, i: int, j: int) -> np.random.SeedSequence:
    """Independent RNG stream for pair ``(i, j)``; scheduling order cannot change it."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(i), int(j)))


def _permutations(rng, n_perm, n):
    return kernels.fisher_yates(rng.random((n_perm, n - 1)))


def _pvalue_from_bins(bx, by, nb, n_perm, seed_seq):
    i_obs = kernels.joint_mi(bx, by, nb)
    perms = _permutations(np.random.default_rng(seed_seq), n_perm, bx.size)
    i_perm = kernels.perm_mi(bx, by, nb, perms)
    exceed = int(np.count_nonzero(i_perm >= i_obs - TIE_ATOL))
    return i_obs, (exceed + 1) / (n_perm + 1)


def permutation_pvalue(x, y, cfg: MIConfig | None = None, pair_seed=0) -> float:
    """Permutation p-value of ``MI(x, y)``; only ``x`` is shuffled."""
    cfg = cfg or MIConfig()
    x, y = _check_pair(x, y, cfg.n_bins)
    nb = cfg.n_bins
    _, p = _pvalue_from_bins(bin_indices(x, nb), bin_indices(y, nb), nb, cfg.n_perm, pair_seed)
    return p


def conditional_mi_matrix(panel, cfg: MIConfig | None = None, threads: int = 1) -> MIMatrix:
    """MI and permutation p-values for every asset pair of ``panel``.

    ``panel`` is anything with ``assets`` and a ``(T, N)`` ``returns`` array
    (normally abnormal returns). Results do not depend on ``threads``.
    """
    cfg = cfg or MIConfig()
    r = np.asarray(panel.returns, dtype=float)
    t, n = r.shape
    if n < 2:
        raise ContractError("need at least two assets")
    if t < cfg.n_bins:
        raise ContractError(f"need at least n_bins={cfg.n_bins} rows, got {t}")
    nb = cfg.n_bins
    bins = [np.ascontiguousarray(bin_indices(r[:, k], nb)) for k in range(n)]
    mi = np.zeros((n, n))
    pv = np.ones((n, n))

    def row(i):
        out = []
        for j in range(i + 1, n):
            try:
                out.append((j, *_pvalue_from_bins(bins[i], bins[j], nb, cfg.n_perm, pair_seed(cfg.seed, i, j))))
            except Exception as exc:
                raise type(exc)(f"pair ({panel.assets[i]}, {panel.assets[j]}): {exc}") from exc
        return i, out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(row, range(n - 1)))
    else:
        results = [row(i) for i in range(n - 1)]
    for i, out in results:
        for j, m, p in out:
            mi[i, j] = mi[j, i] = m
            pv[i, j] = pv[j, i] = p
    mi.setflags(write=False)
    pv.setflags(write=False)
    return MIMatrix(tuple(panel.assets), mi, pv, cfg.alpha)


def to_graph(m: MIMatrix, eps: float = DISTANCE_EPS) -> DependencyGraph:
    """Significant pairs as edges with distance ``1 / (mi + eps)``."""
    edges = []
    n = len(m.assets)
    for i in range(n):
        for j in range(i + 1, n):
            if not m.mask[i, j]:
                continue
            w = float(m.mi[i, j])
            if not w > 0:
                raise ContractError(f"significant pair ({m.assets[i]}, {m.assets[j]}) has mi = {w}")
            edges.append(Edge(i, j, 1.0 / (w + eps), w))
    return DependencyGraph(m.assets, tuple(edges))


def components(g: DependencyGraph) -> list[list[int]]:
    adj = g.adjacency()
    seen = [False] * len(g.nodes)
    comps = []
    for s in range(len(g.nodes)):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            u = stack.pop()
            comp.append(u)
            for v, _ in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def largest_component(g: DependencyGraph) -> DependencyGraph:
    """Biggest connected component; ties go to the lexicographically smallest sorted ticker list."""
    if not g.nodes:
        raise ContractError("graph has no nodes")
    best = min(components(g), key=lambda c: (-len(c), sorted(g.nodes[k] for k in c)))
    remap = {old: new for new, old in enumerate(best)}
    edges = tuple(
        Edge(remap[e.i], remap[e.j], e.distance, e.mi)
        for e in g.edges
        if e.i in remap
    )
    return DependencyGraph(tuple(g.nodes[k] for k in best), edges)


def mst_prim(g: DependencyGraph) -> SpanningTree:
    """Prim from node 0; equal-weight frontier edges resolve to the smallest (source, target)."""
    n = len(g.nodes)
    if n == 0:
        raise ContractError("graph has no nodes")
    adj = g.adjacency()
    in_tree = [False] * n
    in_tree[0] = True
    heap = [(e.distance, 0, v, e) for v, e in adj[0]]
    heapq.heapify(heap)
    chosen = []
    while heap and len(chosen) < n - 1:
        w, u, v, e = heapq.heappop(heap)
        if in_tree[v]:
            continue
        in_tree[v] = True
        chosen.append(e)
        for x, ex in adj[v]:
            if not in_tree[x]:
                heapq.heappush(heap, (ex.distance, v, x, ex))
    if len(chosen) != n - 1:
        raise ContractError("graph is disconnected; pass the largest component")
    return SpanningTree(g.nodes, tuple(chosen))


def write_matrix_csv(path, assets, matrix, fmt=repr):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *assets])
        for a, row in zip(assets, matrix):
            w.writerow([a, *(fmt(v) for v in row.tolist())])


def write_mi_matrix(m: MIMatrix, out_dir, cfg: MIConfig, prefix="") -> dict:
    out = Path(out_dir)
    paths = {k: out / f"{prefix}{k}.csv" for k in ("mi", "pvalues", "mask")}
    write_matrix_csv(paths["mi"], m.assets, m.mi)
    write_matrix_csv(paths["pvalues"], m.assets, m.pvalues)
    write_matrix_csv(paths["mask"], m.assets, m.mask.astype(int), fmt=str)
    sidecar = out / f"{prefix}mi.json"
    sidecar.write_text(json.dumps({
        "config": asdict(cfg),
        "alpha": m.alpha,
        "n_assets": len(m.assets),
        "n_significant": m.n_significant,
        "estimator": "equidistant histogram, nats",
        "kernel_backend": kernels.BACKEND,
    }, indent=2, sort_keys=True) + "\n")
    return {k: str(v) for k, v in paths.items()} | {"sidecar": str(sidecar)}


def write_tree_csv(tree: SpanningTree, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "distance", "mi"])
        for e in tree.edges:
            w.writerow([tree.nodes[e.i], tree.nodes[e.j], repr(e.distance), repr(e.mi)])


def read_tree_csv(path) -> SpanningTree:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    nodes: dict[str, int] = {}
    for r in rows:
        for k in ("src", "dst"):
            nodes.setdefault(r[k], len(nodes))
    edges = []
    for r in rows:
        i, j = nodes[r["src"]], nodes[r["dst"]]
        edges.append(Edge(min(i, j), max(i, j), float(r["distance"]), float(r["mi"])))
    return SpanningTree(tuple(nodes), tuple(edges))
