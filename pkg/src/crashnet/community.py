"""Greedy modularity communities and a degree-preserving null test.

Graphs here are plain ``(n_nodes, edges)`` with ``edges`` a sequence of
``(i, j)`` index pairs; weights are ignored (modularity counts edges).
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError

log = logging.getLogger(__name__)


@dataclass
class CommunityResult:
    partition: list[int]
    q_obs: float
    n_random: int = 0
    q_random: list[float] = field(default_factory=list)
    p_value: float | None = None
    p_is_upper_bound: bool = False
    n_skipped: int = 0
    degenerate: bool = False

    def communities(self, nodes=None) -> list[list]:
        groups: dict[int, list[int]] = {}
        for node, c in enumerate(self.partition):
            groups.setdefault(c, []).append(node)
        out = [sorted(g) for g in groups.values()]
        out.sort(key=lambda g: (-len(g), g[0]))
        if nodes is not None:
            out = [[nodes[k] for k in g] for g in out]
        return out

    def to_json(self, nodes) -> str:
        doc = {
            "q_obs": self.q_obs,
            "p_value": self.p_value,
            "p_value_text": (f"<{self.p_value:g}" if self.p_is_upper_bound else None),
            "n_random": self.n_random,
            "n_skipped": self.n_skipped,
            "degenerate": self.degenerate,
            "communities": self.communities(nodes),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def tree_edges(tree) -> list[tuple[int, int]]:
    return [(e.i, e.j) for e in tree.edges]


def modularity(n: int, edges, partition) -> float:
    """Newman modularity of a node -> community labelling on the binary graph."""
    if len(partition) != n:
        raise ContractError(f"partition covers {len(partition)} of {n} nodes")
    m = len(edges)
    if m < 1:
        raise ContractError("modularity needs at least one edge")
    inside: Counter = Counter()
    degree_sum: Counter = Counter()
    for u, v in edges:
        degree_sum[partition[u]] += 1
        degree_sum[partition[v]] += 1
        if partition[u] == partition[v]:
            inside[partition[u]] += 1
    return sum(inside[c] / m - (degree_sum[c] / (2 * m)) ** 2 for c in degree_sum)


def greedy_modularity(n: int, edges) -> CommunityResult:
    """Clauset-Newman-Moore agglomeration.

    Each step merges the adjacent community pair with the largest modularity
    gain; ties go to the smallest ``(id_a, id_b)`` and the merged community
    keeps the smaller id. Gains are compared as the exact integer
    ``2m * e_ab - K_a * K_b`` (proportional to the gain), so ties are exact.
    """
    m = len(edges)
    if m < 1:
        raise ContractError("greedy modularity needs at least one edge")
    label = list(range(n))
    k = [0] * n
    links: list[dict[int, int]] = [dict() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise ContractError("self-loops are not supported")
        k[u] += 1
        k[v] += 1
        links[u][v] = links[u].get(v, 0) + 1
        links[v][u] = links[v].get(u, 0) + 1
    two_m = 2 * m
    members = {c: [c] for c in range(n)}
    while True:
        best = None
        for a in sorted(members):
            for b, e_ab in links[a].items():
                if b <= a:
                    continue
                cand = (two_m * e_ab - k[a] * k[b], -a, -b)
                if best is None or cand > best:
                    best = cand
        if best is None or best[0] <= 0:
            break
        a, b = -best[1], -best[2]
        for c, e in links[b].items():
            if c == a:
                continue
            links[a][c] = links[a].get(c, 0) + e
            links[c][a] = links[c].get(a, 0) + e
            del links[c][b]
        del links[a][b]
        links[b] = {}
        k[a] += k[b]
        k[b] = 0
        members[a].extend(members.pop(b))
    for c, nodes in members.items():
        for u in nodes:
            label[u] = c
    # relabel densely in order of first appearance
    remap: dict[int, int] = {}
    partition = [remap.setdefault(c, len(remap)) for c in label]
    return CommunityResult(partition, modularity(n, edges, partition))


def double_edge_swap(edges, n_swaps: int, rng, max_tries: int):
    """Degree-preserving rewiring; ``None`` once ``max_tries`` consecutive attempts fail.

    A swap replaces ``(a, b), (c, d)`` by ``(a, d), (c, b)``; swaps that would
    create a self-loop or a repeated edge are rejected.
    """
    edges = [tuple(e) for e in edges]
    m = len(edges)
    present = {frozenset(e) for e in edges}
    done = fails = 0
    batch = 1024
    while done < n_swaps:
        picks = rng.integers(0, m, size=(batch, 2))
        flips = rng.random(batch) < 0.5
        for (x, y), flip in zip(picks.tolist(), flips.tolist()):
            if fails >= max_tries:
                return None
            fails += 1
            if x == y:
                continue
            a, b = edges[x]
            c, d = edges[y]
            if flip:
                c, d = d, c
            if a == d or c == b:
                continue
            e1, e2 = frozenset((a, d)), frozenset((c, b))
            if e1 in present or e2 in present:
                continue
            present.discard(frozenset((a, b)))
            present.discard(frozenset((c, d)))
            present.add(e1)
            present.add(e2)
            edges[x] = (a, d)
            edges[y] = (c, b)
            done += 1
            fails = 0
            if done >= n_swaps:
                break
    return edges


def null_modularity_test(n: int, edges, n_random: int = 1000, seed: int = 0,
                         swaps_per_edge: int = 10, threads: int = 1) -> CommunityResult:
    """Compare greedy modularity against ``n_random`` degree-preserving rewirings.

    ``p`` is the fraction of usable rewirings whose greedy modularity reaches
    the observed one. A count of zero is reported as ``p < 1/n_used``.
    Rewirings that hit ``100 * E`` consecutive rejected swap attempts are
    skipped; if all are skipped ``p = 1`` and the
    result is flagged degenerate.
    """
    m = len(edges)
    if m < 2:
        raise ContractError("null test needs at least two edges")
    obs = greedy_modularity(n, edges)
    children = np.random.SeedSequence(int(seed)).spawn(n_random)

    def member(ss):
        rewired = double_edge_swap(edges, swaps_per_edge * m, np.random.default_rng(ss), 100 * m)
        if rewired is None:
            return None
        return greedy_modularity(n, rewired).q_obs

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            q_all = list(pool.map(member, children))
    else:
        q_all = [member(ss) for ss in children]
    q_rand = [q for q in q_all if q is not None]
    skipped = n_random - len(q_rand)
    if skipped:
        log.warning("%d of %d rewirings skipped: no valid swap within %d attempts", skipped, n_random, 100 * m)
    obs.n_random = n_random
    obs.q_random = q_rand
    obs.n_skipped = skipped
    if not q_rand:
        obs.p_value = 1.0
        obs.degenerate = True
        return obs
    hits = sum(q >= obs.q_obs for q in q_rand)
    if hits == 0:
        obs.p_value = 1.0 / len(q_rand)
        obs.p_is_upper_bound = True
    else:
        obs.p_value = hits / len(q_rand)
    return obs


def write_result(result: CommunityResult, nodes, path) -> None:
    Path(path).write_text(result.to_json(nodes) + "\n")
