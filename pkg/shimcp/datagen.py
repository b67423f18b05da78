"""
Synthetic data with planted interaction models, dataset plumbing and cross-validated lambda selection.

Random draws use numpy's counter-based Philox bit generator seeded with SyntheticSpec.seed,
so any port that implements Philox4x64 reproduces the fixtures.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.model_selection import KFold

from .errors import ConfigError, DimensionError, NumericError
from .helpers import resolve_workers
from .patterns import CovariateMatrix, Pattern
from .solver import fit, null_threshold

log = logging.getLogger(__name__)


def philox(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    m: int
    zeta: float
    true_terms: tuple = ()
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigError(f'n and m must be positive, got n={self.n}, m={self.m}')
        if not 0 <= self.zeta <= 1:
            raise ConfigError(f'zeta must lie in [0, 1], got {self.zeta}')
        if not self.noise_sigma > 0:
            raise ConfigError(f'noise_sigma must be positive, got {self.noise_sigma}')
        terms = tuple((p if isinstance(p, Pattern) else Pattern(tuple(p)), float(c)) for p, c in self.true_terms)
        for pattern, _ in terms:
            pattern.check(self.m)
        object.__setattr__(self, 'true_terms', terms)

    def mean(self, Z):
        """Noise-free response sum_terms coef * prod_{j in pattern} z_j."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        mu = np.zeros(Z.shape[0])
        for pattern, coef in self.true_terms:
            mu += coef * np.prod(Z[:, [j - 1 for j in pattern.items]], axis=1)
        return mu

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Dataset:
    Z: np.ndarray
    y: np.ndarray
    feature_names: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        names = tuple(self.feature_names)
        if Z.shape[0] != len(y):
            raise DimensionError(f'{Z.shape[0]} covariate rows against {len(y)} responses')
        if Z.shape[1] != len(names):
            raise DimensionError(f'{Z.shape[1]} covariates against {len(names)} feature names')
        if len(set(names)) != len(names):
            raise DimensionError('feature names must be unique')
        object.__setattr__(self, 'Z', Z)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'feature_names', names)

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def m(self):
        return self.Z.shape[1]

    def covariates(self):
        return CovariateMatrix.labeled(self.Z)

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.Z[rows], self.y[rows], self.feature_names, dict(self.provenance, rows=len(rows)))

    def split(self, fraction=0.5, seed=0):
        """Seeded shuffle into two parts; the first holds round(fraction * n) rows."""
        if not 0 < fraction < 1:
            raise ConfigError(f'split fraction must lie in (0, 1), got {fraction}')
        order = philox(seed).permutation(self.n)
        cut = int(round(fraction * self.n))
        if cut < 1 or cut >= self.n:
            raise DimensionError(f'cannot split {self.n} rows at fraction {fraction}')
        return self.subset(np.sort(order[:cut])), self.subset(np.sort(order[cut:]))


def generate(spec):
    """
    Draw a dataset from a planted interaction model.

    Each entry of Z is an independent Bernoulli(1 - zeta) draw and
    y = sum_terms coef * prod z + Normal(0, noise_sigma^2).
    """
    rng = philox(spec.seed)
    Z = (rng.random((spec.n, spec.m)) < 1 - spec.zeta).astype(float)
    y = spec.mean(Z) + rng.normal(0.0, spec.noise_sigma, spec.n)
    names = tuple(f'z{j}' for j in range(1, spec.m + 1))
    provenance = {'source': 'synthetic', 'n': spec.n, 'm': spec.m, 'zeta': spec.zeta,
                  'noise_sigma': spec.noise_sigma, 'seed': spec.seed,
                  'true_terms': [[list(p.items), c] for p, c in spec.true_terms]}
    log.debug('generated n=%d m=%d zeta=%.2f seed=%d', spec.n, spec.m, spec.zeta, spec.seed)
    return Dataset(Z, y, names, provenance)


def lambda_grid(Z, y, max_order=None, points=10):
    """`points` log-spaced values from lam_max / 10 down to lam_max / 1000."""
    lam_max = null_threshold(CovariateMatrix.labeled(Z), y, max_order)
    if not lam_max > 0:
        raise NumericError('response is orthogonal to every pattern; no lambda grid exists')
    return np.geomspace(lam_max / 10, lam_max / 1000, points)


def _fold_errors(Z, y, train, held, grid, cfg, fold):
    rows = []
    state = None
    Zt = CovariateMatrix.labeled(Z[train])
    for lam in sorted(grid, reverse=True):
        try:
            state = fit(Zt, y[train], cfg.replace(lam=float(lam)), initial=state)
            mse = float(np.mean((y[held] - state.predict(Z[held])) ** 2))
            rows.append({'lam': float(lam), 'fold': fold, 'mse': mse, 'active': len(state), 'flagged': False,
                         'error': ''})
        except NumericError as e:
            state = None
            rows.append({'lam': float(lam), 'fold': fold, 'mse': np.nan, 'active': -1, 'flagged': True,
                         'error': str(e)})
    return rows


def select_lambda(dataset, folds=5, cfg=None, grid=None, seed=0, n_jobs=None):
    """
    Pick lambda from a grid by k-fold cross-validated mean squared error.

    Parameters
    ----------
    dataset : Dataset
    folds : int, optional
        At least 2. The default is 5.
    cfg : FitConfig
        Template; its lam is replaced by each grid value.
    grid : sequence of float, optional
        Defaults to `lambda_grid`.
    seed : int, optional
        Fold assignment seed.
    n_jobs : int, optional
        Folds are fit concurrently.

    Returns
    -------
    lam : float
    table : pandas.DataFrame
        One row per (lam, fold) with columns lam, fold, mse, active, flagged, error.
    """
    if folds < 2:
        raise ConfigError(f'need at least 2 folds, got {folds}')
    if cfg is None:
        raise ConfigError('select_lambda needs a FitConfig template')
    Z, y = dataset.Z, dataset.y
    grid = lambda_grid(Z, y, cfg.max_order) if grid is None else np.atleast_1d(np.asarray(grid, dtype=float))
    if not grid.size:
        raise ConfigError('lambda grid is empty')
    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    chunks = Parallel(n_jobs=resolve_workers(n_jobs))(
        delayed(_fold_errors)(Z, y, train, held, grid, cfg, k)
        for k, (train, held) in enumerate(splitter.split(Z)))
    table = pd.DataFrame([row for chunk in chunks for row in chunk]).sort_values(['lam', 'fold'], ascending=[False, True])
    table = table.reset_index(drop=True)
    flagged = int(table['flagged'].sum())
    if flagged:
        warnings.warn(f'{flagged} cross-validation cells failed and were skipped')
    scores = table[~table['flagged']].groupby('lam', sort=False)['mse'].mean()
    if scores.empty:
        raise NumericError('every cross-validation cell failed')
    lam = float(scores.idxmin())
    log.info('selected lam=%.6g by %d-fold CV over %d grid points', lam, folds, grid.size)
    return lam, table


def select_lambda_median(specs, folds=5, cfg=None, grid=None, n_jobs=None):
    """
    Median of the CV-selected lambdas over independent synthetic datasets.

    Returns
    -------
    lam : float
    table : pandas.DataFrame
        The per-dataset CV tables stacked, with a `dataset` column.
    """
    picks, tables = [], []
    for i, spec in enumerate(specs):
        lam, table = select_lambda(generate(spec), folds, cfg, grid, seed=spec.seed, n_jobs=n_jobs)
        picks.append(lam)
        tables.append(table.assign(dataset=i))
    if not picks:
        raise ConfigError('select_lambda_median needs at least one spec')
    return float(np.median(picks)), pd.concat(tables, ignore_index=True)
