import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashnet.errors import ContractError
from crashnet.minet import (
    DependencyGraph,
    Edge,
    MIConfig,
    MIMatrix,
    components,
    conditional_mi_matrix,
    largest_component,
    mi_histogram,
    mst_prim,
    pair_seed,
    permutation_pvalue,
    read_tree_csv,
    to_graph,
    write_mi_matrix,
    write_tree_csv,
)
from crashnet.panel import ReturnPanel
from crashnet.synth import trading_dates

from oracles import entropy_mi, kruskal_total


def test_config_validation():
    with pytest.raises(ContractError):
        MIConfig(n_bins=1)
    with pytest.raises(ContractError):
        MIConfig(n_perm=0)
    with pytest.raises(ContractError):
        MIConfig(alpha=1.0)


def test_constant_series_has_zero_mi(rng):
    assert mi_histogram(rng.random(100), np.ones(100)) == 0.0


def test_diagonal_uniform_fill():
    x = (np.arange(160) % 16) + 0.5
    assert mi_histogram(x, x.copy(), 16) == pytest.approx(math.log(16), abs=1e-12)


def test_length_mismatch():
    with pytest.raises(ContractError):
        mi_histogram(np.arange(20.0), np.arange(19.0))


@pytest.mark.slow
def test_independent_uniforms_small_bias():
    for seed in range(20):
        r = np.random.default_rng(seed)
        assert mi_histogram(r.random(10_000), r.random(10_000)) < 0.05


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(16, 200))
def test_mi_symmetric_nonnegative_and_matches_entropy(seed, n):
    r = np.random.default_rng(seed)
    x = r.standard_normal(n)
    y = x * r.random() + r.standard_normal(n)
    a, b = mi_histogram(x, y), mi_histogram(y, x)
    assert a == b
    assert a >= -1e-12
    assert a == pytest.approx(entropy_mi(x, y, 16), abs=1e-12)


def test_pvalue_extremes():
    x = np.arange(500.0)
    assert permutation_pvalue(x, x.copy(), MIConfig(), pair_seed(0, 0, 1)) == pytest.approx(1 / 101)
    const = np.ones(500)
    # MI is zero for every shuffle, so every permutation ties the observed value
    assert permutation_pvalue(x, const, MIConfig(), pair_seed(0, 0, 1)) == 1.0


def test_pvalue_deterministic_and_seed_sensitive(rng):
    x, y = rng.standard_normal(100), rng.standard_normal(100)
    cfg = MIConfig(n_perm=200)
    a = permutation_pvalue(x, y, cfg, pair_seed(1, 0, 1))
    assert a == permutation_pvalue(x, y, cfg, pair_seed(1, 0, 1))
    others = {permutation_pvalue(x, y, cfg, pair_seed(s, 0, 1)) for s in range(2, 8)}
    assert len(others | {a}) > 1


@pytest.mark.slow
def test_strong_dependence_detected():
    hits = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        x = r.standard_normal(500)
        y = x + 0.1 * r.standard_normal(500)
        hits += permutation_pvalue(x, y, MIConfig(), pair_seed(seed, 0, 1)) == pytest.approx(1 / 101)
    assert hits >= 99


def _panel(r):
    return ReturnPanel(trading_dates("2020-01-02", r.shape[0]), tuple(f"A{k}" for k in range(r.shape[1])), r)


def test_matrix_invariants_and_planted_pair(rng):
    r = rng.standard_normal((250, 6))
    r[:, 4] = r[:, 1] + 0.05 * rng.standard_normal(250)
    m = conditional_mi_matrix(_panel(r), MIConfig(seed=3))
    np.testing.assert_array_equal(m.mi, m.mi.T)
    np.testing.assert_array_equal(m.pvalues, m.pvalues.T)
    assert (np.diag(m.mi) == 0).all()
    assert (m.mi >= 0).all()
    assert ((m.pvalues > 0) & (m.pvalues <= 1)).all()
    np.testing.assert_array_equal(m.mask, (m.pvalues <= m.alpha) & ~np.eye(6, dtype=bool))
    assert (m.mi[~m.mask] == 0).all()
    assert m.mask[1, 4]
    assert m.mi[1, 4] == m.mi.max()


def test_two_identical_columns(rng):
    x = rng.standard_normal(50)
    m = conditional_mi_matrix(_panel(np.column_stack([x, x])))
    assert m.mi[0, 1] == m.mi[1, 0] > 0


def test_matrix_independent_of_threads(rng):
    r = rng.standard_normal((60, 7))
    a = conditional_mi_matrix(_panel(r), MIConfig(seed=9), threads=1)
    b = conditional_mi_matrix(_panel(r), MIConfig(seed=9), threads=4)
    assert a.mi_raw.tobytes() == b.mi_raw.tobytes()
    assert a.pvalues.tobytes() == b.pvalues.tobytes()


def test_matrix_needs_enough_rows(rng):
    with pytest.raises(ContractError):
        conditional_mi_matrix(_panel(rng.standard_normal((10, 3))))


def test_mask_nested_in_alpha(rng):
    m = conditional_mi_matrix(_panel(rng.standard_normal((80, 8))), MIConfig(alpha=0.10))
    m05, m01 = m.with_alpha(0.05), m.with_alpha(0.01)
    np.testing.assert_array_equal(m05.mask, m.mask & (m.pvalues <= 0.05))
    assert (m01.mask <= m05.mask).all() and (m05.mask <= m.mask).all()
    assert m01.n_significant <= m05.n_significant <= m.n_significant


def _matrix(mi):
    mi = np.asarray(mi, dtype=float)
    pv = np.where(mi > 0, 0.001, 1.0)
    np.fill_diagonal(pv, 1.0)
    return MIMatrix(tuple(f"T{k}" for k in range(len(mi))), mi, pv, 0.05)


def test_distance_transform():
    g = to_graph(_matrix([[0, 1.0, 0.5], [1.0, 0, 0], [0.5, 0, 0]]))
    d = {(e.i, e.j): e.distance for e in g.edges}
    assert d[(0, 1)] == pytest.approx(0.999999999, abs=1e-15)
    assert d[(0, 2)] == pytest.approx(1.999999996, abs=1e-15)
    assert (1, 2) not in d
    assert to_graph(_matrix(np.zeros((3, 3)))).edges == ()


def _graph(n, triples, names=None):
    names = names or tuple(f"T{k}" for k in range(n))
    return DependencyGraph(tuple(names), tuple(Edge(i, j, w, 1.0 / w) for i, j, w in triples))


def test_largest_component_rules():
    g = _graph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
    assert largest_component(g).nodes == g.nodes
    g = _graph(8, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (5, 6, 1), (6, 7, 1)])
    assert len(largest_component(g).nodes) == 5
    names = ("Z1", "Z2", "Z3", "Z4", "A1", "A2", "A3", "A4")
    g = _graph(8, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (4, 5, 1), (5, 6, 1), (6, 7, 1)], names)
    assert largest_component(g).nodes == ("A1", "A2", "A3", "A4")
    assert sorted(map(len, components(g))) == [4, 4]


def test_prim_triangle():
    t = mst_prim(_graph(3, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]))
    assert sorted(e.distance for e in t.edges) == [1.0, 2.0]
    assert t.total_distance == 3.0


def test_prim_four_cycle_tie_rule():
    t = mst_prim(_graph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (0, 3, 1)]))
    assert t.total_distance == 3
    assert {(e.i, e.j) for e in t.edges} == {(0, 1), (0, 3), (1, 2)}


def test_prim_disconnected():
    with pytest.raises(ContractError):
        mst_prim(_graph(4, [(0, 1, 1), (2, 3, 1)]))


def _random_connected(seed, n):
    r = np.random.default_rng(seed)
    triples = [(k, int(r.integers(0, k)), float(r.random())) for k in range(1, n)]
    for i in range(n):
        for j in range(i + 1, n):
            if r.random() < 0.3:
                triples.append((i, j, float(r.integers(1, 5))))  # repeated weights exercise ties
    return [(min(i, j), max(i, j), w) for i, j, w in triples]


def _check_tree(t, n):
    assert len(t.edges) == n - 1
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for e in t.edges:
        ra, rb = find(e.i), find(e.j)
        assert ra != rb
        parent[ra] = rb


def test_prim_matches_kruskal_small():
    for seed in range(20):
        triples = _random_connected(seed, 8)
        t = mst_prim(_graph(8, triples))
        _check_tree(t, 8)
        total, _ = kruskal_total(8, [(w, i, j) for i, j, w in triples])
        assert t.total_distance == total


def test_tree_csv_roundtrip(tmp_path):
    t = mst_prim(_graph(4, [(0, 1, 0.5), (1, 2, 0.25), (2, 3, 0.125), (0, 3, 2.0)]))
    write_tree_csv(t, tmp_path / "t.csv")
    back = read_tree_csv(tmp_path / "t.csv")
    assert back.total_distance == t.total_distance
    assert set(back.nodes) == set(t.nodes)
    assert next(csv.reader(open(tmp_path / "t.csv"))) == ["src", "dst", "distance", "mi"]


def test_matrix_files(tmp_path, rng):
    cfg = MIConfig(seed=2)
    m = conditional_mi_matrix(_panel(rng.standard_normal((40, 4))), cfg)
    paths = write_mi_matrix(m, tmp_path, cfg)
    side = json.loads(open(paths["sidecar"]).read())
    assert side["config"]["seed"] == 2
    rows = list(csv.reader(open(paths["mask"])))
    assert rows[0] == ["", "A0", "A1", "A2", "A3"]
