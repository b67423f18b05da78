import numpy as np
import pytest

from conftest import continuous_instance, dense
from shimcp.conformal import ConformalSet
from shimcp.datagen import philox
from shimcp.errors import ConfigError, SizeError
from shimcp.helpers import default_range
from shimcp.oracle import (dense_lasso, expand, expansion_size, grid_conformal, kkt_violation,
                           membership_mismatches)
from shimcp.patterns import CovariateMatrix
from shimcp.solver import FitConfig


@pytest.mark.parametrize('m, d, size', [(5, 2, 15), (5, None, 31), (4, 9, 15)])
def test_expansion_size(m, d, size):
    Z = np.ones((3, m))
    assert expand(Z, d).p == size
    assert expansion_size(m, m if d is None else d) == size


def test_expansion_cap():
    with pytest.raises(SizeError):
        expand(np.ones((2, 30)), 25)
    with pytest.raises(SizeError):
        expand(np.ones((2, 10)), 3, cap=100)


def test_expansion_columns(smooth):
    Z, _ = smooth
    expansion = expand(Z, 3)
    np.testing.assert_allclose(expansion.columns, dense(Z, expansion.patterns))
    assert list(expansion.patterns) == sorted(expansion.patterns)
    np.testing.assert_allclose(expansion.row(Z.values[2]), expansion.columns[2])
    assert expansion.with_row(Z.values[0]).shape == (Z.rows + 1, expansion.p)


def test_dense_lasso_on_orthogonal_design():
    # one covariate, unit column: beta = soft_threshold(x^T y, lam) / (1 + l2)
    expansion = expand(CovariateMatrix.labeled([[1.0], [0.0], [0.0]]))
    y = np.array([3.0, 1.0, -1.0])
    assert dense_lasso(expansion, y, FitConfig(lam=1.0))[0] == pytest.approx(2.0)
    assert dense_lasso(expansion, y, FitConfig(lam=1.0, l2_weight=1.0))[0] == pytest.approx(1.0)
    assert dense_lasso(expansion, y, FitConfig(lam=5.0))[0] == 0.0


def test_dense_lasso_is_optimal():
    Z, y = continuous_instance(50, n=20, m=4)
    expansion = expand(Z.values[:-1])
    for l2_weight in (0.0, 0.3):
        beta = dense_lasso(expansion, y, FitConfig(lam=0.2, l2_weight=l2_weight))
        assert kkt_violation(expansion.columns, y, beta, 0.2, l2_weight) <= 1e-10


def test_grid_on_null_model():
    rng = philox(0)
    Z = rng.random((19, 3))
    y = rng.normal(size=19)
    approx = grid_conformal(expand(Z), y, rng.random(3), FitConfig(lam=1e6), 0.1, grid_size=400,
                            range=(-10.0, 10.0), n_jobs=1)
    a = np.sort(np.abs(y))[17]
    assert len(approx.intervals) == 1
    lo, hi = approx.intervals[0]
    cell = 20.0 / 399
    assert abs(lo + a) <= cell and abs(hi - a) <= cell


def test_grid_shrinks_with_alpha():
    Z, y = continuous_instance(51)
    expansion = expand(Z.values[:-1])
    cfg = FitConfig(lam=0.3)
    wide = grid_conformal(expansion, y, Z.test_row, cfg, 0.05, grid_size=200, n_jobs=1)
    narrow = grid_conformal(expansion, y, Z.test_row, cfg, 0.3, grid_size=200, n_jobs=1)
    assert narrow.length <= wide.length


def test_grid_arguments():
    expansion = expand(np.ones((3, 2)))
    with pytest.raises(ConfigError):
        grid_conformal(expansion, np.zeros(3), np.ones(2), FitConfig(lam=1.0), 0.1, grid_size=50)
    with pytest.raises(ConfigError):
        grid_conformal(expansion, np.zeros(3), np.ones(2), FitConfig(lam=1.0), 1.0)


def test_membership_mismatches():
    a = ConformalSet(((-1.0, 1.0),), 0.1, range=(-5.0, 5.0))
    assert membership_mismatches(a, a, 1000).size == 0
    shifted = ConformalSet(((-1.0, 1.002),), 0.1, range=(-5.0, 5.0))
    assert membership_mismatches(a, shifted, 1000).size == 0
    other = ConformalSet(((-1.0, 1.0), (2.0, 3.0)), 0.1, range=(-5.0, 5.0))
    bad = membership_mismatches(a, other, 1000)
    assert bad.size > 0 and np.all((bad > 2.0) & (bad < 3.0))


@pytest.mark.filterwarnings('ignore')
def test_grid_range_for_constant_responses():
    rng = philox(4)
    Z = rng.random((13, 3))
    y = np.full(12, 2.0)
    approx = grid_conformal(expand(Z[:-1], 2), y, Z[-1], FitConfig(lam=0.5), 0.1, grid_size=100, n_jobs=1)
    assert approx.range == default_range(y) == (0.0, 4.0)
