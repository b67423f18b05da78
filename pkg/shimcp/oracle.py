"""
Brute-force references for testing and auditing.

Everything here works on explicitly enumerated interaction columns and solves by
plain coordinate descent, so it shares no search or homotopy code with the main
path. It is slow by construction and guarded by a size cap.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from joblib import Parallel, delayed
from psutil import virtual_memory

from .conformal import ConformalSet
from .errors import ConfigError, ConvergenceError, SizeError
from .helpers import default_range, merge_intervals, resolve_workers, soft_threshold
from .patterns import Pattern

log = logging.getLogger(__name__)

DEFAULT_CAP = 100_000
KKT_TOL = 1e-11


@dataclass(frozen=True, eq=False)
class DenseExpansion:
    """All interaction columns up to order d, in lexicographic pattern order."""
    columns: np.ndarray
    patterns: tuple
    d: int

    @property
    def p(self):
        return len(self.patterns)

    def row(self, x):
        """Interaction values of one covariate row."""
        x = np.asarray(x, dtype=float)
        return np.array([np.prod(x[[i - 1 for i in p.items]]) for p in self.patterns])

    def with_row(self, x):
        return np.vstack([self.columns, self.row(x)])


def expansion_size(m, d):
    return sum(comb(m, k) for k in range(1, min(d, m) + 1))


def expand(Z, d=None, cap=DEFAULT_CAP):
    """
    Enumerate every interaction column of order at most d.

    Parameters
    ----------
    Z : array-like, shape (rows, m)
    d : int, optional
        Order cap. Defaults to m.
    cap : int, optional
        Largest number of columns allowed.

    Returns
    -------
    DenseExpansion
    """
    Z = np.atleast_2d(np.asarray(getattr(Z, 'values', Z), dtype=float))
    rows, m = Z.shape
    d = m if d is None else min(int(d), m)
    p = expansion_size(m, d)
    if p > cap:
        raise SizeError(f'{p} interaction columns for m={m}, d={d} exceed the cap of {cap}')
    if 8 * p * rows > virtual_memory().available:
        raise SizeError(f'{p} x {rows} dense expansion does not fit in memory')
    patterns = sorted(Pattern(tuple(j + 1 for j in items))
                      for k in range(1, d + 1) for items in combinations(range(m), k))
    columns = np.column_stack([np.prod(Z[:, [i - 1 for i in pat.items]], axis=1) for pat in patterns])
    return DenseExpansion(columns, tuple(patterns), d)


def kkt_violation(X, y, beta, lam, l2_weight=0.0):
    """Largest breach of the lasso / elastic-net optimality conditions."""
    grad = X.T @ (y - X @ beta) - l2_weight * beta
    active = beta != 0
    worst = 0.0
    if active.any():
        worst = float(np.max(np.abs(grad[active] - lam * np.sign(beta[active]))))
    if (~active).any():
        worst = max(worst, float(np.max(np.abs(grad[~active]))) - lam)
    return worst


def _refine(X, y, beta, lam, l2_weight):
    support = np.flatnonzero(beta)
    if not support.size:
        return beta
    s = np.sign(beta[support])
    Xs = X[:, support]
    A = Xs.T @ Xs + l2_weight * np.eye(support.size)
    sol, *_ = np.linalg.lstsq(A, Xs.T @ y - lam * s, rcond=None)
    if np.any(np.sign(sol) != s):
        return beta
    out = np.zeros_like(beta)
    out[support] = sol
    return out


def dense_lasso(expansion, y_aug, cfg, initial=None, tol=1e-13, max_sweeps=100_000, X=None):
    """
    Coordinate-descent lasso / elastic net over explicit columns, certified by KKT.

    Parameters
    ----------
    expansion : DenseExpansion
    y_aug : array-like
        Response for every row of the design.
    cfg : FitConfig
        Only lam and l2_weight are used.
    initial : numpy array, optional
        Warm-start coefficients.
    X : numpy array, optional
        Design to use instead of expansion.columns (e.g. with the test row appended).

    Returns
    -------
    numpy array of length p
    """
    X = expansion.columns if X is None else X
    y = np.asarray(y_aug, dtype=float)
    lam, l2_weight = cfg.lam, cfg.l2_weight
    beta = np.zeros(X.shape[1]) if initial is None else np.array(initial, dtype=float)
    norms = (X ** 2).sum(axis=0)
    r = y - X @ beta
    for _ in range(max_sweeps):
        change = 0.0
        for j in np.flatnonzero(norms):
            old = beta[j]
            new = soft_threshold(X[:, j] @ r + norms[j] * old, lam) / (norms[j] + l2_weight)
            if new != old:
                r -= (new - old) * X[:, j]
                beta[j] = new
                change = max(change, abs(new - old))
        if change < tol:
            break
    tol_kkt = KKT_TOL * max(1.0, lam)
    if kkt_violation(X, y, beta, lam, l2_weight) > tol_kkt:
        beta = _refine(X, y, beta, lam, l2_weight)
    worst = kkt_violation(X, y, beta, lam, l2_weight)
    if worst > tol_kkt:
        raise ConvergenceError(f'dense lasso ended {worst:.3g} away from optimality')
    return beta


def _grid_chunk(expansion, X, y, taus, cfg):
    beta = None
    out = []
    for tau in taus:
        y_aug = np.append(y, tau)
        beta = dense_lasso(expansion, y_aug, cfg, initial=beta, X=X)
        scores = np.abs(y_aug - X @ beta)
        out.append(1.0 - np.count_nonzero(scores <= scores[-1]) / len(scores))
    return out


def grid_p_values(expansion, y, x_test, cfg, taus, n_jobs=None):
    """p-value of every tau in `taus` by a full dense refit at each, warm-started along chunks."""
    X = expansion.with_row(x_test)
    y = np.asarray(y, dtype=float)
    taus = np.asarray(taus, dtype=float)
    workers = resolve_workers(n_jobs)
    chunks = [c for c in np.array_split(taus, workers) if c.size]
    parts = Parallel(n_jobs=workers)(delayed(_grid_chunk)(expansion, X, y, c, cfg) for c in chunks)
    return np.concatenate([np.asarray(p) for p in parts])


def grid_conformal(expansion, y, x_test, cfg, alpha, grid_size=2000, range=None, n_jobs=None):
    """
    Conformal set by refitting at grid_size equispaced candidate responses.

    Each grid point with p-value >= alpha contributes the cell of width
    (hi - lo) / (grid_size - 1) centred on it, clipped to the range.
    """
    if grid_size < 100:
        raise ConfigError(f'grid_size must be at least 100, got {grid_size}')
    if not 0 < alpha < 1:
        raise ConfigError(f'alpha must lie in (0, 1), got {alpha}')
    y = np.asarray(y, dtype=float)
    lo, hi = map(float, default_range(y) if range is None else range)
    taus = np.linspace(lo, hi, grid_size)
    pvals = grid_p_values(expansion, y, x_test, cfg, taus, n_jobs)
    half = 0.5 * (hi - lo) / (grid_size - 1)
    cells = [(max(lo, t - half), min(hi, t + half)) for t, pv in zip(taus, pvals) if pv >= alpha - 1e-12]
    intervals = tuple(merge_intervals(cells, tol=1e-12))
    clipped = bool(intervals) and (intervals[0][0] <= lo or intervals[-1][1] >= hi)
    log.debug('grid oracle: %d of %d points included', len(cells), grid_size)
    return ConformalSet(intervals, alpha, clipped, (lo, hi))


def membership_mismatches(exact, approx, grid_size=2000, slack_cells=1.0):
    """
    Points of the approximate set's grid where the two sets disagree away from any boundary.

    A disagreement within `slack_cells` grid cells of an endpoint of either set is
    ignored.

    Returns
    -------
    numpy array of tau values
    """
    lo, hi = approx.range
    taus = np.linspace(lo, hi, grid_size)
    slack = slack_cells * (hi - lo) / (grid_size - 1) + 1e-9
    ends = np.array([e for cset in (exact, approx) for iv in cset.intervals for e in iv])
    bad = []
    for t in taus:
        if ends.size and np.min(np.abs(ends - t)) <= slack:
            continue
        if exact.contains(t) != approx.contains(t):
            bad.append(t)
    return np.asarray(bad)
