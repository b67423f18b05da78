import numpy as np
import pytest

from conftest import binary_instance, continuous_instance
from shimcp.conformal import (ConformalSet, PointResult, conformal_batch, evaluate, full_cp, full_cp_point,
                              p_value, segment_crossings, split_batch, split_cp)
from shimcp.datagen import SyntheticSpec, generate, philox
from shimcp.errors import ConfigError, DimensionError, SingularityError
from shimcp.oracle import expand, grid_conformal, membership_mismatches
from shimcp.patterns import CovariateMatrix
from shimcp.presets import STRONG
from shimcp.solver import FitConfig
from shimcp.taupath import Event, Kink, compute_tau_path


def null_instance(n=19, seed=0):
    rng = philox(seed)
    Z = CovariateMatrix(rng.random((n + 1, 3)))
    y = rng.normal(size=n)
    return Z, y


@pytest.mark.parametrize('scores, expected', [([1.0, 2.0, 3.0, 2.5], 0.25), ([1.0, 2.0, 3.0, 0.5], 0.75),
                                              ([1.0, 1.0, 1.0, 1.0], 0.0), ([3.0, 0.0], 0.5)])
def test_p_value(scores, expected):
    assert p_value(scores) == pytest.approx(expected)


def test_p_value_needs_scores():
    with pytest.raises(DimensionError):
        p_value([1.0])


def test_conformal_set_measures():
    cset = ConformalSet(((0.0, 1.0), (2.0, 4.0)), 0.1)
    assert cset.length == 3.0
    assert cset.hull == (0.0, 4.0) and cset.hull_length == 4.0
    assert 0.0 in cset and 3.9 in cset
    assert 1.0 not in cset and 1.5 not in cset
    empty = ConformalSet((), 0.1)
    assert empty.is_empty and empty.length == 0.0 and empty.hull is None


def test_crossings_with_no_active_set():
    # w_i = a_i constant, w_{n+1} = tau
    kink = Kink(0.0, (), np.zeros(0), np.zeros(0), Event.START, None, np.zeros(0), np.zeros(3),
                np.array([1.0, -2.0, 0.0]), ())
    np.testing.assert_allclose(segment_crossings(kink, 5.0), [1.0, 2.0])
    np.testing.assert_allclose(segment_crossings(kink, 1.5), [1.0])
    assert segment_crossings(kink, 0.0).size == 0


def test_crossings_match_a_dense_scan():
    Z, y = continuous_instance(20)
    path = compute_tau_path(Z, y, cfg=FitConfig(lam=0.3))
    for kink, end in path.segments():
        cuts = np.concatenate([[kink.tau], segment_crossings(kink, end), [end]])
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b - a < 1e-9:
                continue
            # score order is frozen between consecutive cuts
            taus = np.linspace(a, b, 7)[1:-1]
            orders = [np.abs(kink.residual_at(t)) <= np.abs(kink.residual_at(t))[-1] for t in taus]
            assert all(np.array_equal(orders[0], o) for o in orders)


def test_null_model_closed_form():
    Z, y = null_instance()
    path = compute_tau_path(Z, y, range=(-100.0, 100.0), cfg=FitConfig(lam=1e6))
    cset = full_cp(path, 0.1)
    a = np.sort(np.abs(y))[17]
    assert len(cset.intervals) == 1
    np.testing.assert_allclose(cset.intervals[0], (-a, a), atol=1e-12)
    assert not cset.clipped


def test_clipped_set_warns():
    Z, y = null_instance()
    path = compute_tau_path(Z, y, range=(-0.01, 0.01), cfg=FitConfig(lam=1e6))
    with pytest.warns(UserWarning, match='search range'):
        cset = full_cp(path, 0.1)
    assert cset.clipped
    assert cset.intervals == ((-0.01, 0.01),)


def test_alpha_is_checked():
    Z, y = null_instance()
    path = compute_tau_path(Z, y, cfg=FitConfig(lam=1e6))
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(ConfigError):
            full_cp(path, alpha)


@pytest.mark.filterwarnings('ignore')
@pytest.mark.parametrize('seed', range(3))
def test_agrees_with_grid_refits(seed):
    Z, y = continuous_instance(30 + seed, n=15, m=4)
    cfg = FitConfig(lam=0.3)
    path = compute_tau_path(Z, y, cfg=cfg)
    exact = full_cp(path, 0.1)
    expansion = expand(Z.values[:-1])
    approx = grid_conformal(expansion, y, Z.test_row, cfg, 0.1, grid_size=500, range=path.range, n_jobs=1)
    assert membership_mismatches(exact, approx, 500).size == 0


@pytest.mark.slow
@pytest.mark.filterwarnings('ignore')
def test_agrees_with_grid_refits_on_binary_data():
    compared = 0
    for seed in range(50):
        Z, y = binary_instance(500 + seed, n=20, m=5)
        for l2_weight in (0.0, 0.5):
            cfg = FitConfig(lam=1.0, l2_weight=l2_weight, max_order=2)
            try:
                path = compute_tau_path(Z, y, cfg=cfg)
            except SingularityError:
                continue
            compared += 1
            exact = full_cp(path, 0.1)
            approx = grid_conformal(expand(Z.values[:-1], 2), y, Z.test_row, cfg, 0.1, range=path.range, n_jobs=1)
            assert membership_mismatches(exact, approx).size == 0
    assert compared >= 60


@pytest.mark.filterwarnings('ignore')
def test_sets_grow_as_alpha_shrinks():
    Z, y = continuous_instance(40)
    path = compute_tau_path(Z, y, cfg=FitConfig(lam=0.3))
    wide, narrow = full_cp(path, 0.05), full_cp(path, 0.2)
    lo, hi = path.range
    for tau in np.linspace(lo, hi, 1001):
        if narrow.contains(tau):
            assert wide.contains(tau)
    assert wide.length >= narrow.length


@pytest.mark.filterwarnings('ignore')
def test_row_order_does_not_matter():
    Z, y = continuous_instance(41)
    cfg = FitConfig(lam=0.3)
    order = philox(1).permutation(len(y))
    shuffled = CovariateMatrix(np.vstack([Z.values[:-1][order], Z.test_row]))
    a = full_cp(compute_tau_path(Z, y, cfg=cfg), 0.1)
    b = full_cp(compute_tau_path(shuffled, y[order], cfg=cfg), 0.1)
    assert membership_mismatches(a, b, 2000, slack_cells=0.01).size == 0
    assert a.length == pytest.approx(b.length, abs=1e-8)


@pytest.mark.filterwarnings('ignore')
def test_point_and_batch():
    Z, y = continuous_instance(42, n=15, m=4)
    rng = philox(2)
    X_test = rng.random((3, 4))
    cfg = FitConfig(lam=0.3)
    results = conformal_batch(Z.values[:-1], y, X_test, cfg, 0.1, y_test=[0.1, 0.2, 0.3], n_jobs=1)
    assert [r.point_id for r in results] == [0, 1, 2]
    for x, result in zip(X_test, results):
        single = full_cp_point(Z.values[:-1], y, x, cfg, 0.1)
        assert single.conformal_set.intervals == result.conformal_set.intervals
        assert result.kinks >= 2 and result.nodes_visited > 0
    record = results[1].to_record()
    assert record['point_id'] == 1 and record['y_true'] == 0.2
    with pytest.raises(DimensionError):
        conformal_batch(Z.values[:-1], y, X_test, cfg, 0.1, y_test=[0.1], n_jobs=1)


def test_split_null_model():
    rng = philox(3)
    Z_train, Z_cal = rng.random((10, 3)), rng.random((9, 3))
    y_train = rng.normal(size=10)
    result = split_cp(Z_train, y_train, Z_cal, np.full(9, 3.0), rng.random(3), FitConfig(lam=1e6), 0.1)
    assert result.q == 3.0 and result.center == 0.0
    assert result.interval == (-3.0, 3.0)
    assert not result.infinite
    assert 3.0 in result.as_set() and -3.0 in result.as_set()
    assert 3.0 not in ConformalSet(((-3.0, 3.0),), 0.1)


def test_split_quantile_rank():
    rng = philox(4)
    Z_train, Z_cal = rng.random((10, 3)), rng.random((19, 3))
    y_cal = np.arange(1.0, 20.0)
    result = split_cp(Z_train, np.zeros(10), Z_cal, y_cal, rng.random(3), FitConfig(lam=1e6), 0.1)
    # ceil(0.9 * 20) = 18th smallest
    assert result.q == 18.0


def test_split_with_too_few_calibration_points():
    rng = philox(5)
    with pytest.warns(UserWarning, match='too few'):
        result = split_cp(rng.random((10, 3)), rng.normal(size=10), rng.random((5, 3)), rng.normal(size=5),
                          rng.random(3), FitConfig(lam=1.0), 0.05)
    assert result.infinite
    assert result.as_set().contains(1e300)


def test_split_batch_shares_one_fit():
    rng = philox(6)
    Z_train, Z_cal, X_test = rng.random((20, 3)), rng.random((19, 3)), rng.random((4, 3))
    y_train, y_cal = rng.normal(size=20), rng.normal(size=19)
    results = split_batch(Z_train, y_train, Z_cal, y_cal, X_test, FitConfig(lam=0.5), 0.1, y_test=np.zeros(4))
    lengths = [r.conformal_set.length for r in results]
    assert len(results) == 4 and np.ptp(lengths) < 1e-12
    single = split_cp(Z_train, y_train, Z_cal, y_cal, X_test[2], FitConfig(lam=0.5), 0.1)
    assert results[2].conformal_set.intervals[0] == pytest.approx(single.interval)


def test_evaluate():
    results = [
        PointResult(0, ConformalSet(((0.0, 2.0),), 0.1), y_true=1.0, prediction=1.1, kinks=4, nodes_visited=10),
        PointResult(1, ConformalSet(((0.0, 1.0), (3.0, 4.0)), 0.1), y_true=2.0, prediction=1.8, kinks=6),
        PointResult(2, ConformalSet((), 0.1), y_true=3.0, prediction=3.1, kinks=2),
    ]
    report = evaluate(results)
    assert report.n_points == 3
    assert report.coverage == pytest.approx(1 / 3)
    assert report.length_mean == pytest.approx(4 / 3)
    assert report.hull_length_mean == pytest.approx(2.0)
    assert report.empty == 1 and report.clipped == 0
    assert report.kinks_mean == pytest.approx(4.0)
    assert report.r2 == pytest.approx(1 - 0.06 / 2.0)
    assert set(report.to_record()) >= {'coverage', 'length_mean', 'r2'}


def test_evaluate_needs_truth():
    with pytest.raises(DimensionError):
        evaluate([])
    with pytest.raises(DimensionError):
        evaluate([PointResult(0, ConformalSet(((0.0, 1.0),), 0.1))])


@pytest.mark.filterwarnings('ignore')
def test_duplicate_columns_match_grid_refits():
    Z, y = binary_instance(514, n=20, m=5)
    cfg = FitConfig(lam=1.0, l2_weight=0.5, max_order=2)
    path = compute_tau_path(Z, y, cfg=cfg)
    exact = full_cp(path, 0.1)
    approx = grid_conformal(expand(Z.values[:-1], 2), y, Z.test_row, cfg, 0.1, grid_size=500, range=path.range,
                            n_jobs=1)
    assert membership_mismatches(exact, approx, 500).size == 0


@pytest.mark.slow
@pytest.mark.filterwarnings('ignore')
def test_monte_carlo_coverage():
    alpha, draws = 0.1, 500
    cfg = FitConfig(lam=1.0, l2_weight=0.5, max_order=2)
    covered = 0
    for seed in range(draws):
        data = generate(SyntheticSpec(31, 5, 0.4, STRONG, seed=seed))
        path = compute_tau_path(CovariateMatrix(data.Z), data.y[:-1], cfg=cfg)
        covered += data.y[-1] in full_cp(path, alpha)
    assert covered / draws >= 1 - alpha - 3 * np.sqrt(alpha * (1 - alpha) / draws)
