import itertools
import json

import networkx as nx
import numpy as np
import pytest

from crashnet.community import (
    double_edge_swap,
    greedy_modularity,
    modularity,
    null_modularity_test,
    tree_edges,
    write_result,
)
from crashnet.errors import ContractError

from conftest import make_tree
from oracles import all_partitions, modularity_bruteforce

TWO_TRIANGLES = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
P3 = [(0, 1), (1, 2)]


def cliques_with_bridge(size, count):
    edges = []
    for c in range(count):
        base = c * size
        edges += [(base + i, base + j) for i, j in itertools.combinations(range(size), 2)]
        if c:
            edges.append((base - 1, base))
    return edges


def test_modularity_examples():
    assert modularity(3, P3, [0, 0, 0]) == 0.0
    assert modularity(6, TWO_TRIANGLES, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5, abs=1e-12)
    assert modularity(3, P3, [0, 1, 2]) < 0


def test_modularity_label_invariance():
    part = [0, 0, 1, 1, 2, 2]
    relabeled = [7, 7, 3, 3, 5, 5]
    assert modularity(6, TWO_TRIANGLES, part) == modularity(6, TWO_TRIANGLES, relabeled)


@pytest.mark.parametrize("seed", range(5))
def test_modularity_matches_bruteforce_and_networkx(seed):
    g = nx.gnm_random_graph(9, 14, seed=seed)
    edges = list(g.edges())
    r = np.random.default_rng(seed)
    part = r.integers(0, 3, 9).tolist()
    ours = modularity(9, edges, part)
    assert ours == pytest.approx(modularity_bruteforce(9, edges, part), abs=1e-12)
    comms = [{u for u in range(9) if part[u] == c} for c in set(part)]
    assert ours == pytest.approx(nx.community.modularity(g, comms), abs=1e-12)


def test_modularity_contract():
    with pytest.raises(ContractError):
        modularity(3, P3, [0, 0])
    with pytest.raises(ContractError):
        modularity(3, [], [0, 0, 0])


def test_greedy_two_cliques():
    res = greedy_modularity(8, cliques_with_bridge(4, 2))
    assert res.communities() == [[0, 1, 2, 3], [4, 5, 6, 7]]
    assert res.q_obs > 0.3


def test_greedy_single_edge():
    res = greedy_modularity(2, [(0, 1)])
    assert res.q_obs >= modularity(2, [(0, 1)], [0, 1])


def test_greedy_at_least_singletons():
    for seed in range(10):
        g = nx.gnm_random_graph(12, 18, seed=seed)
        edges = list(g.edges())
        res = greedy_modularity(12, edges)
        assert res.q_obs >= modularity(12, edges, list(range(12))) - 1e-12
        assert res.q_obs == pytest.approx(modularity(12, edges, res.partition), abs=1e-15)


def test_greedy_matches_exhaustive_on_k4():
    edges = list(itertools.combinations(range(4), 2))
    best = max(modularity_bruteforce(4, edges, p) for p in all_partitions(4))
    assert greedy_modularity(4, edges).q_obs == pytest.approx(best, abs=1e-12)


def test_greedy_close_to_exhaustive_on_small_trees():
    for seed in range(5):
        r = np.random.default_rng(seed)
        pairs = [(int(r.integers(0, k)), k) for k in range(1, 8)]
        best = max(modularity_bruteforce(8, pairs, p) for p in all_partitions(8))
        q = greedy_modularity(8, pairs).q_obs
        assert q <= best + 1e-12
        assert q >= 0.8 * best


def test_greedy_deterministic_under_edge_order():
    edges = cliques_with_bridge(4, 3)
    a = greedy_modularity(12, edges)
    b = greedy_modularity(12, list(reversed(edges)))
    assert a.communities() == b.communities()


def test_swap_preserves_degrees():
    g = nx.gnm_random_graph(20, 40, seed=3)
    edges = list(g.edges())
    out = double_edge_swap(edges, 400, np.random.default_rng(0), 4000)
    deg = lambda es: sorted(nx.Graph(es).degree())  # noqa: E731
    assert deg(out) == deg(edges)
    assert len({frozenset(e) for e in out}) == len(out)
    assert all(a != b for a, b in out)
    assert set(map(frozenset, out)) != set(map(frozenset, edges))


def test_null_planted_structure_is_significant():
    edges = cliques_with_bridge(5, 2)
    res = null_modularity_test(10, edges, n_random=200, seed=1)
    assert res.p_value < 0.05
    assert res.p_is_upper_bound
    assert res.n_skipped == 0 and len(res.q_random) == 200


def test_null_star_is_degenerate():
    star = [(0, k) for k in range(1, 6)]
    res = null_modularity_test(6, star, n_random=20, seed=0)
    assert res.degenerate and res.p_value == 1.0 and res.n_skipped == 20


def test_null_threads_do_not_change_result():
    edges = tree_edges(make_tree(15, [(k // 2, k) for k in range(1, 15)]))
    a = null_modularity_test(15, edges, n_random=60, seed=4, threads=1)
    b = null_modularity_test(15, edges, n_random=60, seed=4, threads=4)
    assert a.q_random == b.q_random and a.p_value == b.p_value


def test_write_result(tmp_path):
    res = null_modularity_test(8, cliques_with_bridge(4, 2), n_random=30, seed=0)
    write_result(res, [f"T{k}" for k in range(8)], tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert doc["communities"] == [["T0", "T1", "T2", "T3"], ["T4", "T5", "T6", "T7"]]
    assert doc["n_random"] == 30
