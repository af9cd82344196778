import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crashnet.errors import ContractError, EmptyHistogramError, NoCrashDetectedError
from crashnet.hellinger import (
    CrashSegmentation,
    HellingerConfig,
    HellingerSeries,
    hellinger_distance,
    histogram_probs,
    rolling_hellinger,
    segment,
)
from crashnet.panel import ReturnPanel, log_returns
from crashnet.synth import generate, regime_shift_spec, trading_dates


def test_histogram_symmetric_split():
    np.testing.assert_allclose(histogram_probs([0.1, 0.4, 0.6, 0.9], [0, 0.5, 1]), [0.5, 0.5])


def test_histogram_single_bin_indicator():
    np.testing.assert_array_equal(histogram_probs([0.1, 0.2, 0.3], [0, 0.5, 1]), [1.0, 0.0])


def test_histogram_half_open_last_closed():
    np.testing.assert_allclose(histogram_probs([0.0, 0.5, 1.0], [0, 0.5, 1]), [1 / 3, 2 / 3], atol=1e-15)


def test_histogram_errors():
    with pytest.raises(EmptyHistogramError):
        histogram_probs([2.0, 3.0], [0, 0.5, 1])
    with pytest.raises(ContractError):
        histogram_probs([0.1], [0, 0, 1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=200), st.integers(2, 40))
def test_histogram_sums_to_one(samples, nb):
    p = histogram_probs(samples, np.linspace(-5, 5, nb + 1))
    assert p.shape == (nb,)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert (p >= 0).all()


@pytest.mark.parametrize("p,q,h", [
    ([0.3, 0.7], [0.3, 0.7], 0.0),
    ([1.0, 0.0], [0.0, 1.0], 1.0),
    ([0.5, 0.5], [1.0, 0.0], 0.541196),
])
def test_hellinger_values(p, q, h):
    assert hellinger_distance(p, q) == pytest.approx(h, abs=1e-6)


def test_hellinger_contract():
    with pytest.raises(ContractError):
        hellinger_distance([0.5, 0.5], [1.0])
    with pytest.raises(ContractError):
        hellinger_distance([0.5, 0.6], [0.5, 0.5])


prob_vectors = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3),
        st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda v: sum(v) > 1e-3),
    )
)


@settings(max_examples=100, deadline=None)
@given(prob_vectors)
def test_hellinger_bounded_and_symmetric(pq):
    p, q = (np.array(v) / np.sum(v) for v in pq)
    h = hellinger_distance(p, q)
    assert 0.0 <= h <= 1.0
    assert h == hellinger_distance(q, p)


def test_config_validation():
    with pytest.raises(ContractError):
        HellingerConfig(window_w=1)
    with pytest.raises(ContractError):
        HellingerConfig(bins_b=1)
    with pytest.raises(ContractError):
        HellingerConfig(clip_quantiles=(0.9, 0.1))


def _panel(r):
    return ReturnPanel(trading_dates("2020-01-02", r.shape[0]), tuple(f"A{k}" for k in range(r.shape[1])), r)


def test_disjoint_day_scores_one(rng):
    r = rng.standard_normal((11, 40)) * 0.01
    r[10] = 5.0 + rng.random(40)
    s = rolling_hellinger(_panel(r), HellingerConfig(window_w=10, bins_b=10, clip_quantiles=(0.0, 1.0)))
    assert s.values[-1] == pytest.approx(1.0)


def test_threshold_identity_and_range(rng):
    s = rolling_hellinger(_panel(rng.standard_normal((120, 30))))
    assert len(s.dates) == 60
    assert s.h_d == s.mu_h + 2 * s.sigma_h
    assert s.sigma_h == pytest.approx(np.std(s.values, ddof=1))
    assert ((s.values >= 0) & (s.values <= 1)).all()


def test_column_permutation_and_price_scaling_invariance(rng):
    r = rng.standard_normal((90, 25))
    base = rolling_hellinger(_panel(r)).values
    perm = rolling_hellinger(_panel(r[:, rng.permutation(25)])).values
    np.testing.assert_array_equal(base, perm)
    prices, _, _ = generate(regime_shift_spec(seed=3, n_assets=20, n_days=100, length=0))
    a = rolling_hellinger(log_returns(prices)).values
    scaled = type(prices)(prices.dates, prices.assets, prices.closes * 7.5)
    b = rolling_hellinger(log_returns(scaled)).values
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_degenerate_pool_reports_date():
    r = np.zeros((70, 5))
    with pytest.raises(EmptyHistogramError, match="2020"):
        rolling_hellinger(_panel(r))


def test_injected_volatility_flagged_inside_window():
    prices, _, truth = generate(regime_shift_spec(seed=1, n_assets=100, n_days=300, start=150, length=20))
    s = rolling_hellinger(log_returns(prices))
    lo, hi = truth.crash_dates
    inside = [d for d, f in zip(s.dates, s.flags) if f and lo <= d <= hi]
    assert inside


def _series(values):
    return HellingerSeries.from_values(trading_dates("2020-01-02", len(values)), values)


def test_segment_single_day():
    v = np.zeros(20)
    v[7] = 1.0
    s = _series(v)
    seg = segment(s, s.dates)
    assert seg.crash.start == seg.crash.end == s.dates[7]


def test_segment_interval_bookkeeping():
    v = np.zeros(150)
    v[39:60] = 1.0  # days 40..60 (1-based)
    s = _series(v)
    seg = segment(s, s.dates)
    assert (seg.crash.start, seg.crash.end) == (s.dates[39], s.dates[59])
    assert (seg.pre.start, seg.pre.end) == (s.dates[0], s.dates[38])
    assert (seg.post.start, seg.post.end) == (s.dates[60], s.dates[149])


def test_segment_hull_bridges_gaps():
    v = np.zeros(60)
    v[[20, 30]] = 1.0
    s = _series(v)
    seg = segment(s, s.dates)
    assert (seg.crash.start, seg.crash.end) == (s.dates[20], s.dates[30])


def test_segment_constant_series():
    s = _series(np.full(30, 0.4))
    with pytest.raises(NoCrashDetectedError):
        segment(s, s.dates)


def test_segment_needs_pre_and_post():
    v = np.zeros(30)
    v[0] = 1.0
    s = _series(v)
    with pytest.raises(NoCrashDetectedError):
        segment(s, s.dates)


def test_segmentation_roundtrip():
    v = np.zeros(40)
    v[10] = 1.0
    s = _series(v)
    seg = segment(s, s.dates)
    assert CrashSegmentation.from_dict(seg.to_dict()) == seg


@pytest.mark.slow
def test_null_per_day_flag_rate_small():
    rates = []
    for seed in range(20):
        r = np.random.default_rng(seed).standard_normal((300, 100))
        rates.append(rolling_hellinger(_panel(r)).flags.mean())
    assert np.mean(rates) < 0.05
