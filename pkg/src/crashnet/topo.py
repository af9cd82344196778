"""Topology of spanning trees: centralities, global scalars, core-periphery indices.

Weights by metric: hop counts for closeness, eccentricity, betweenness,
path length and efficiency; MI weights for eigenvector centrality and
weighted degree; distance weights for the Laplacian and tree length;
the binary adjacency for assortativity.
"""
from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    ContractError,
    IterationLimitError,
    UndefinedAssortativityError,
)
from .minet import SpanningTree

DENSE_EIG_LIMIT = 512


@dataclass(frozen=True)
class NodeMetrics:
    closeness: np.ndarray
    eccentricity: np.ndarray
    betweenness: np.ndarray


@dataclass(frozen=True)
class GlobalScalars:
    avg_path_length: float
    global_efficiency: float
    assortativity: float
    algebraic_connectivity: float
    tree_length: float


@dataclass(frozen=True)
class MetricReport:
    nodes: tuple[str, ...]
    closeness: np.ndarray
    eccentricity: np.ndarray
    eigenvector: np.ndarray
    weighted_degree: np.ndarray
    betweenness: np.ndarray
    avg_path_length: float
    global_efficiency: float
    assortativity: float
    algebraic_connectivity: float
    tree_length: float

    @property
    def averages(self) -> dict:
        return {
            "closeness": float(self.closeness.mean()),
            "eccentricity": float(self.eccentricity.mean()),
            "eigenvector": float(self.eigenvector.mean()),
            "weighted_degree": float(self.weighted_degree.mean()),
            "betweenness": float(self.betweenness.mean()),
        }

    def global_dict(self) -> dict:
        d = {f"avg_{k}": v for k, v in self.averages.items()}
        d.update(
            n_nodes=len(self.nodes),
            avg_path_length=self.avg_path_length,
            global_efficiency=self.global_efficiency,
            assortativity=self.assortativity,
            algebraic_connectivity=self.algebraic_connectivity,
            tree_length=self.tree_length,
        )
        return d


@dataclass(frozen=True)
class CorePeripheryIndices:
    core_concentration: float
    periphery_fragility: float


def hop_distances(tree: SpanningTree) -> np.ndarray:
    """All-pairs edge counts by breadth-first search from every node."""
    n = tree.n
    adj = tree.neighbors()
    dist = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    q.append(v)
    if (dist < 0).any():
        raise ContractError("tree is not connected")
    return dist


def _tree_betweenness(tree: SpanningTree) -> np.ndarray:
    # removing i splits the tree into branches of sizes s_k; pairs across branches route through i
    n = tree.n
    adj = tree.neighbors()
    parent = [-1] * n
    order = []
    seen = [False] * n
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        order.append(u)
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                stack.append(v)
    size = [1] * n
    for u in reversed(order):
        if parent[u] >= 0:
            size[parent[u]] += size[u]
    out = np.zeros(n)
    for u in range(n):
        branches = [size[v] for v in adj[u] if v != parent[u]]
        if parent[u] >= 0:
            branches.append(n - size[u])
        total = sum(branches)
        out[u] = (total * total - sum(b * b for b in branches)) / 2
    return out


def node_metrics(tree: SpanningTree, distances=None) -> NodeMetrics:
    if tree.n < 2:
        raise ContractError("node metrics need at least two nodes")
    d = hop_distances(tree) if distances is None else np.asarray(distances)
    closeness = (tree.n - 1) / d.sum(axis=1)
    ecc = d.max(axis=1)
    return NodeMetrics(closeness, ecc, _tree_betweenness(tree))


def eigenvector_centrality(tree: SpanningTree, weight_mode: str = "mi", warm_start: bool = True,
                           tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Perron vector of the weighted adjacency, scaled so the maximum is 1.

    Power iteration on ``A + I``; trees are bipartite, so the unshifted
    iteration would oscillate between the +/-lambda eigenvectors. Long
    path-like trees have a spectral ratio within ~1e-4 of one, so by default
    the iteration starts from a dense symmetric eigensolve and only has to
    confirm the fixed point.
    """
    if weight_mode not in ("mi", "binary"):
        raise ContractError(f"weight_mode must be 'mi' or 'binary', not {weight_mode!r}")
    a = tree.weight_matrix(weight_mode)
    n = tree.n
    if n == 1:
        return np.ones(1)
    m = a + np.eye(n)
    if warm_start:
        _, vecs = np.linalg.eigh(a)
        x = np.abs(vecs[:, -1])
    else:
        x = np.ones(n)
    x = x / x.max()
    for _ in range(max_iter):
        nxt = m @ x
        nxt /= nxt.max()
        if np.max(np.abs(nxt - x)) < tol:
            return nxt
        x = nxt
    raise IterationLimitError(f"eigenvector centrality did not converge in {max_iter} iterations")


def weighted_degree(tree: SpanningTree, weight_mode: str = "mi") -> np.ndarray:
    return tree.weight_matrix(weight_mode).sum(axis=1)


def assortativity(tree: SpanningTree) -> float:
    """Degree assortativity of the binary adjacency."""
    a = tree.weight_matrix("binary")
    k = a.sum(axis=1)
    two_m = k.sum()
    if two_m == 0:
        raise UndefinedAssortativityError("graph has no edges")
    s2 = float((k ** 2).sum())
    num = float(k @ a @ k) - s2 ** 2 / two_m
    den = float((k ** 3).sum()) - s2 ** 2 / two_m
    if den == 0:
        raise UndefinedAssortativityError("all edges join equal degrees; assortativity undefined")
    return num / den


def laplacian(w: np.ndarray) -> np.ndarray:
    return np.diag(w.sum(axis=1)) - w


def _lambda2_inverse_iteration(lap, tol=1e-10, max_iter=10_000):
    n = lap.shape[0]
    # lift the null vector (all ones) above the spectrum so lambda_2 becomes the smallest
    shift = np.trace(lap) + 1.0
    m = lap + shift * np.ones((n, n)) / n
    factor = cho_factor(m)
    x = np.random.default_rng(0).standard_normal(n)
    x -= x.mean()
    x /= np.linalg.norm(x)
    lam = float(x @ lap @ x)
    for _ in range(max_iter):
        y = cho_solve(factor, x)
        y -= y.mean()
        y /= np.linalg.norm(y)
        new = float(y @ lap @ y)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        x, lam = y, new
    raise IterationLimitError("inverse iteration for lambda_2 did not converge")


def algebraic_connectivity(w: np.ndarray) -> float:
    """Second-smallest Laplacian eigenvalue of the weighted adjacency ``w``."""
    n = w.shape[0]
    if n < 2:
        raise ContractError("algebraic connectivity needs at least two nodes")
    lap = laplacian(w)
    if n <= DENSE_EIG_LIMIT:
        return float(np.linalg.eigvalsh(lap)[1])
    return _lambda2_inverse_iteration(lap)


def global_scalars(tree: SpanningTree, distances=None) -> GlobalScalars:
    """Path length, efficiency, assortativity, lambda_2 and tree length.

    Assortativity is NaN for trees with fewer than three nodes.
    """
    n = tree.n
    if n < 2:
        raise ContractError("global scalars need at least two nodes")
    d = hop_distances(tree) if distances is None else np.asarray(distances)
    off = ~np.eye(n, dtype=bool)
    apl = float(d[off].sum()) / (n * (n - 1))
    eff = float((1.0 / d[off]).sum()) / (n * (n - 1))
    if n >= 3:
        r = assortativity(tree)
    else:
        r = float("nan")
    lam2 = algebraic_connectivity(tree.weight_matrix("distance"))
    return GlobalScalars(apl, eff, r, lam2, tree.total_distance)


def metric_report(tree: SpanningTree, warm_start: bool = True) -> MetricReport:
    d = hop_distances(tree)
    nm = node_metrics(tree, d)
    gs = global_scalars(tree, d)
    if not gs.algebraic_connectivity > 0:
        raise ContractError("lambda_2 <= 0 on a spanning tree; tree is disconnected")
    return MetricReport(
        nodes=tree.nodes,
        closeness=nm.closeness,
        eccentricity=nm.eccentricity,
        eigenvector=eigenvector_centrality(tree, "mi", warm_start=warm_start),
        weighted_degree=weighted_degree(tree, "mi"),
        betweenness=nm.betweenness,
        **asdict(gs),
    )


def core_periphery(report: MetricReport) -> CorePeripheryIndices:
    cc = float(report.closeness.mean())
    lam2 = report.algebraic_connectivity
    if not cc > 0:
        raise ContractError("average closeness must be positive")
    if not lam2 > 0:
        raise ContractError("algebraic connectivity must be positive")
    if np.isnan(report.assortativity):
        raise ContractError("assortativity undefined for trees with fewer than three nodes")
    return CorePeripheryIndices(
        float(report.eigenvector.mean()) / cc,
        abs(report.assortativity) / lam2,
    )


def write_report(report: MetricReport, json_path, csv_path, extra=None) -> None:
    doc = report.global_dict()
    try:
        cp = core_periphery(report)
        doc.update(core_concentration=cp.core_concentration, periphery_fragility=cp.periphery_fragility)
    except ContractError as exc:
        doc.update(core_concentration=None, periphery_fragility=None, core_periphery_error=str(exc))
    if extra:
        doc.update(extra)
    doc = {k: (None if isinstance(v, float) and np.isnan(v) else v) for k, v in doc.items()}
    Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    total_pairs = (len(report.nodes) - 1) * (len(report.nodes) - 2) / 2
    with Path(csv_path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", "closeness", "eccentricity", "eigenvector", "wdegree", "betweenness",
                    "betweenness_normalized_derived"])
        for k, t in enumerate(report.nodes):
            b = float(report.betweenness[k])
            w.writerow([t, repr(float(report.closeness[k])), int(report.eccentricity[k]),
                        repr(float(report.eigenvector[k])), repr(float(report.weighted_degree[k])),
                        repr(b), repr(b / total_pairs) if total_pairs else "0.0"])
