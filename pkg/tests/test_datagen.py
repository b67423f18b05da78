import numpy as np
import pandas as pd
import pytest

from shimcp.datagen import (Dataset, SyntheticSpec, generate, lambda_grid, philox, select_lambda,
                            select_lambda_median)
from shimcp.errors import ConfigError, DimensionError, InvalidPatternError, NumericError
from shimcp.oracle import expand
from shimcp.patterns import Pattern
from shimcp.presets import FIFTH_ORDER, STRONG
from shimcp.solver import FitConfig, fit


def test_philox_is_reproducible():
    np.testing.assert_array_equal(philox(3).random(5), philox(3).random(5))
    assert not np.array_equal(philox(3).random(5), philox(4).random(5))


@pytest.mark.parametrize('kwargs', [{'n': 0, 'm': 3, 'zeta': 0.5}, {'n': 5, 'm': 3, 'zeta': 1.5},
                                    {'n': 5, 'm': 3, 'zeta': 0.5, 'noise_sigma': 0.0}])
def test_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        SyntheticSpec(**kwargs)


def test_spec_checks_terms():
    with pytest.raises(InvalidPatternError):
        SyntheticSpec(10, 3, 0.5, ((Pattern.of(1, 4), 1.0),))
    spec = SyntheticSpec(10, 3, 0.5, (((2, 1), 1.5),))
    assert spec.true_terms == ((Pattern.of(1, 2), 1.5),)


def test_extreme_sparsity():
    ones = generate(SyntheticSpec(20, 4, 0.0, seed=1))
    zeros = generate(SyntheticSpec(20, 4, 1.0, seed=1))
    assert np.all(ones.Z == 1) and np.all(zeros.Z == 0)


def test_generation_is_reproducible():
    spec = SyntheticSpec(30, 6, 0.4, FIFTH_ORDER[:3], seed=9)
    a, b = generate(spec), generate(spec)
    np.testing.assert_array_equal(a.Z, b.Z)
    np.testing.assert_array_equal(a.y, b.y)
    c = generate(spec.replace(seed=10))
    assert not np.array_equal(a.y, c.y)
    assert a.feature_names == ('z1', 'z2', 'z3', 'z4', 'z5', 'z6')
    assert a.provenance['seed'] == 9


def test_generated_density():
    data = generate(SyntheticSpec(10_000, 5, 0.4, seed=2))
    np.testing.assert_allclose(data.Z.mean(axis=0), 0.6, atol=0.02)


def test_planted_mean():
    spec = SyntheticSpec(4, 3, 0.5, STRONG, seed=0)
    Z = np.array([[1, 1, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1]])
    np.testing.assert_allclose(spec.mean(Z), [15.0, 10.0, 5.0, 0.0])


def test_dataset_validation():
    with pytest.raises(DimensionError):
        Dataset(np.ones((3, 2)), np.ones(4), ('a', 'b'))
    with pytest.raises(DimensionError):
        Dataset(np.ones((3, 2)), np.ones(3), ('a',))
    with pytest.raises(DimensionError):
        Dataset(np.ones((3, 2)), np.ones(3), ('a', 'a'))


def test_split():
    data = generate(SyntheticSpec(21, 3, 0.5, seed=4))
    first, second = data.split(0.5, seed=1)
    assert first.n == 10 and second.n == 11
    joined = np.sort(np.concatenate([first.y, second.y]))
    np.testing.assert_array_equal(joined, np.sort(data.y))
    again, _ = data.split(0.5, seed=1)
    np.testing.assert_array_equal(again.y, first.y)
    with pytest.raises(ConfigError):
        data.split(1.0)


def test_lambda_grid_starts_below_threshold():
    data = generate(SyntheticSpec(40, 5, 0.4, STRONG, seed=5))
    grid = lambda_grid(data.Z, data.y, max_order=3)
    lam_max = np.max(np.abs(expand(data.Z, 3).columns.T @ data.y))
    assert len(grid) == 10
    assert grid[0] == pytest.approx(lam_max / 10)
    assert grid[-1] == pytest.approx(lam_max / 1000)
    assert np.all(np.diff(grid) < 0)


def test_singleton_grid():
    data = generate(SyntheticSpec(40, 4, 0.4, STRONG, seed=6))
    lam, table = select_lambda(data, folds=3, cfg=FitConfig(lam=1.0, l2_weight=0.1, max_order=2), grid=[2.5],
                               n_jobs=1)
    assert lam == 2.5
    assert list(table.columns) == ['lam', 'fold', 'mse', 'active', 'flagged', 'error']
    assert len(table) == 3


def test_select_lambda_prefers_small_error():
    data = generate(SyntheticSpec(60, 4, 0.4, STRONG, noise_sigma=0.5, seed=7))
    cfg = FitConfig(lam=1.0, l2_weight=0.01, max_order=3)
    lam, table = select_lambda(data, folds=4, cfg=cfg, grid=[0.5, 5.0, 500.0], seed=1, n_jobs=1)
    assert lam != 500.0
    assert isinstance(table, pd.DataFrame) and len(table) == 12
    means = table.groupby('lam')['mse'].mean()
    assert means[lam] == means.min()


def test_every_cell_failing(monkeypatch):
    def broken(*args, **kwargs):
        raise NumericError('singular')

    monkeypatch.setattr('shimcp.datagen.fit', broken)
    data = generate(SyntheticSpec(20, 3, 0.4, seed=8))
    with pytest.warns(UserWarning, match='failed'):
        with pytest.raises(NumericError):
            select_lambda(data, folds=2, cfg=FitConfig(lam=1.0), grid=[1.0, 0.1], n_jobs=1)


def test_select_needs_folds_and_template():
    data = generate(SyntheticSpec(20, 3, 0.4, seed=8))
    with pytest.raises(ConfigError):
        select_lambda(data, folds=1, cfg=FitConfig(lam=1.0))
    with pytest.raises(ConfigError):
        select_lambda(data)


def test_median_over_datasets():
    specs = [SyntheticSpec(40, 4, 0.4, STRONG, seed=s) for s in range(3)]
    cfg = FitConfig(lam=1.0, l2_weight=0.1, max_order=2)
    lam, table = select_lambda_median(specs, folds=2, cfg=cfg, grid=[0.5, 5.0], n_jobs=1)
    assert lam in (0.5, 5.0)
    assert sorted(table['dataset'].unique()) == [0, 1, 2]


@pytest.mark.slow
def test_selected_model_recovers_planted_terms():
    spec = SyntheticSpec(500, 5, 0.4, STRONG, noise_sigma=0.5, seed=11)
    data = generate(spec)
    cfg = FitConfig(lam=1.0, l2_weight=0.01)
    lam, _ = select_lambda(data, folds=5, cfg=cfg, n_jobs=1)
    state = fit(data.covariates(), data.y, cfg.replace(lam=lam))
    big = {p for p, c in zip(state.patterns, state.coef) if abs(c) > 1.0}
    assert {p for p, _ in STRONG} <= big
