"""
Conformal prediction sets: exact full-CP from a tau-path, split-CP, and coverage bookkeeping.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging
import warnings
from dataclasses import dataclass
from math import ceil
from time import perf_counter

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import r2_score

from .errors import ConfigError, DimensionError
from .helpers import dedupe_sorted, default_range, merge_intervals, resolve_workers
from .patterns import CovariateMatrix
from .solver import fit
from .taupath import compute_tau_path

log = logging.getLogger(__name__)

PI_TOL = 1e-12


@dataclass(frozen=True)
class ConformalSet:
    """
    Union of disjoint intervals, half-open [lo, hi) unless `closed`.
    """
    intervals: tuple
    alpha: float
    clipped: bool = False
    range: tuple = (-np.inf, np.inf)
    closed: bool = False

    @property
    def is_empty(self):
        return not self.intervals

    @property
    def length(self):
        """Total Lebesgue measure."""
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def hull(self):
        if self.is_empty:
            return None
        return self.intervals[0][0], self.intervals[-1][1]

    @property
    def hull_length(self):
        return 0.0 if self.is_empty else float(self.hull[1] - self.hull[0])

    def contains(self, tau):
        if self.closed:
            return any(lo <= tau <= hi for lo, hi in self.intervals)
        return any(lo <= tau < hi for lo, hi in self.intervals)

    def __contains__(self, tau):
        return self.contains(tau)


@dataclass(frozen=True)
class SplitResult:
    interval: tuple
    center: float
    q: float
    calibration_scores: np.ndarray
    alpha: float

    @property
    def infinite(self):
        return not np.isfinite(self.q)

    def as_set(self):
        return ConformalSet((self.interval,), self.alpha, closed=True)


@dataclass(frozen=True)
class PointResult:
    """Outcome for one test point; `to_record` gives the emitted row."""
    point_id: int
    conformal_set: ConformalSet
    y_true: float = np.nan
    prediction: float = np.nan
    kinks: int = 0
    nodes_visited: int = 0
    seconds: float = 0.0

    @property
    def covered(self):
        return bool(np.isfinite(self.y_true) and self.conformal_set.contains(self.y_true))

    def to_record(self):
        return {
            'point_id': int(self.point_id),
            'intervals': [[float(lo), float(hi)] for lo, hi in self.conformal_set.intervals],
            'alpha': float(self.conformal_set.alpha),
            'covered': self.covered,
            'length': self.conformal_set.length,
            'hull_length': self.conformal_set.hull_length,
            'clipped': self.conformal_set.clipped,
            'y_true': float(self.y_true),
            'prediction': float(self.prediction),
            'kinks': int(self.kinks),
            'nodes_visited': int(self.nodes_visited),
        }


@dataclass(frozen=True)
class ExperimentReport:
    n_points: int
    coverage: float
    length_mean: float
    length_sd: float
    hull_length_mean: float
    r2: float
    kinks_mean: float
    nodes_mean: float
    empty: int
    clipped: int

    def to_record(self):
        return dict(self.__dict__)


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ConfigError(f'alpha must lie in (0, 1), got {alpha}')


def p_value(scores):
    """
    Rank-based p-value of the last score among all of them.

    pi = 1 - #{i : S_i <= S_{n+1}} / (n+1); the test score always counts itself.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or len(scores) < 2:
        raise DimensionError(f'need at least two scores, got shape {scores.shape}')
    count = np.count_nonzero(scores <= scores[-1])
    return 1.0 - count / len(scores)


def segment_crossings(kink, next_tau):
    """
    Values of tau inside (kink.tau, next_tau) where some |w_i| meets |w_{n+1}|.

    On the segment w_i = a_i - u b_i for labeled rows and w_{n+1} = c + u d with
    u = tau - kink.tau, so w_i = w_{n+1} at u = (a_i - c)/(b_i + d) and
    w_i = -w_{n+1} at u = (a_i + c)/(b_i - d).
    """
    span = next_tau - kink.tau
    if not span > 0:
        return np.zeros(0)
    a, b = kink.residual[:-1], kink.v[:-1]
    c, d = kink.residual[-1], 1.0 - kink.v[-1]
    with np.errstate(divide='ignore', invalid='ignore'):
        same = (a - c) / (b + d)
        opposite = (a + c) / (b - d)
    u = np.concatenate([same, opposite])
    u = u[np.isfinite(u) & (u > 0) & (u < span)]
    return dedupe_sorted(kink.tau + u)


def full_cp(path, alpha):
    """
    Exact full conformal set over the range covered by a tau-path.

    Each segment is cut at its score crossings; pi is constant between cuts and is
    evaluated at the midpoints. Pieces with pi >= alpha are merged into half-open
    intervals.

    Parameters
    ----------
    path : TauPath
    alpha : float
        Miscoverage level in (0, 1).

    Returns
    -------
    ConformalSet
    """
    _check_alpha(alpha)
    lo, hi = path.range
    pieces = []
    for kink, end in path.segments():
        start, end = max(kink.tau, lo), min(end, hi)
        if not end > start:
            continue
        cuts = np.concatenate([[start], segment_crossings(kink, end), [end]])
        for a, b in zip(cuts[:-1], cuts[1:]):
            if not b > a:
                continue
            mid = 0.5 * (a + b)
            if p_value(np.abs(kink.residual_at(mid))) >= alpha - PI_TOL:
                pieces.append((float(a), float(b)))
    intervals = tuple(merge_intervals(pieces))
    clipped = bool(intervals) and (intervals[0][0] <= lo or intervals[-1][1] >= hi)
    if clipped:
        warnings.warn(f'conformal set reaches the search range [{lo:.6g}, {hi:.6g}]; widen it for an exact set')
        log.info('conformal set clipped at the search range')
    if not intervals:
        log.debug('empty conformal set at alpha=%s', alpha)
    return ConformalSet(intervals, alpha, clipped, (lo, hi))


def full_cp_point(Z, y, x_test, cfg, alpha, range=None, y_true=np.nan, prediction=np.nan, point_id=0,
                  prune=None, time_budget=None):
    """Tau-path and full-CP set for one test point; Z holds the n labeled rows only."""
    started = perf_counter()
    Zt = CovariateMatrix.with_test(Z, x_test)
    path = compute_tau_path(Zt, y, range, cfg, prune=prune, time_budget=time_budget)
    cset = full_cp(path, alpha)
    return PointResult(point_id, cset, float(y_true), float(prediction), path.kink_count,
                       path.stats.nodes_visited, perf_counter() - started)


def conformal_batch(Z, y, X_test, cfg, alpha, y_test=None, range=None, n_jobs=None, prune=None,
                    time_budget=None):
    """
    Full-CP sets for many test points, computed in a worker pool.

    Point predictions come from one fit on the n labeled rows. Results are returned
    in point order regardless of completion order.

    Returns
    -------
    list of PointResult
    """
    _check_alpha(alpha)
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=float)
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if y_test is None:
        y_test = np.full(len(X_test), np.nan)
    y_test = np.asarray(y_test, dtype=float)
    if len(y_test) != len(X_test):
        raise DimensionError(f'{len(y_test)} test responses for {len(X_test)} test rows')
    range = default_range(y) if range is None else range
    base = fit(CovariateMatrix.labeled(Z), y, cfg)
    predictions = base.predict(X_test)
    results = Parallel(n_jobs=resolve_workers(n_jobs))(
        delayed(full_cp_point)(Z, y, x, cfg, alpha, range, yt, pred, i, prune, time_budget)
        for i, (x, yt, pred) in enumerate(zip(X_test, y_test, predictions)))
    return sorted(results, key=lambda r: r.point_id)


def _quantile(scores, alpha):
    scores = np.sort(np.asarray(scores, dtype=float))
    k = ceil((1 - alpha) * (len(scores) + 1) - 1e-9)
    if k > len(scores):
        warnings.warn(f'{len(scores)} calibration scores are too few for alpha={alpha}; the interval is infinite')
        return np.inf
    return float(scores[max(k, 1) - 1])


def calibrate(Z_train, y_train, Z_cal, y_cal, cfg, alpha):
    """Fit on the training split and score the calibration split; returns (state, scores, q)."""
    _check_alpha(alpha)
    Z_cal = np.atleast_2d(np.asarray(Z_cal, dtype=float))
    y_cal = np.asarray(y_cal, dtype=float)
    if not len(y_cal):
        raise DimensionError('split-CP needs a nonempty calibration set')
    state = fit(CovariateMatrix.labeled(Z_train), y_train, cfg)
    scores = np.abs(y_cal - state.predict(Z_cal))
    return state, scores, _quantile(scores, alpha)


def split_cp(Z_train, y_train, Z_cal, y_cal, x_test, cfg, alpha):
    """
    Split conformal interval [mu(x_test) - q, mu(x_test) + q].

    q is the ceil((1 - alpha)(n_cal + 1))-th smallest calibration residual, infinite
    when that index exceeds n_cal.
    """
    state, scores, q = calibrate(Z_train, y_train, Z_cal, y_cal, cfg, alpha)
    center = float(state.predict(np.asarray(x_test, dtype=float))[0])
    return SplitResult((center - q, center + q), center, q, scores, alpha)


def split_batch(Z_train, y_train, Z_cal, y_cal, X_test, cfg, alpha, y_test=None):
    """Split-CP for many test points from a single fit, as PointResults."""
    state, scores, q = calibrate(Z_train, y_train, Z_cal, y_cal, cfg, alpha)
    centers = state.predict(np.atleast_2d(np.asarray(X_test, dtype=float)))
    if y_test is None:
        y_test = np.full(len(centers), np.nan)
    return [PointResult(i, SplitResult((c - q, c + q), float(c), q, scores, alpha).as_set(), float(yt), float(c))
            for i, (c, yt) in enumerate(zip(centers, y_test))]


def evaluate(results):
    """
    Aggregate per-point results into coverage, length and r2.

    Length is total measure; hull_length_mean reports the convex-hull width alongside.
    r2 compares the point predictions against the true responses.
    """
    results = list(results)
    if not results:
        raise DimensionError('evaluate needs at least one test point')
    truths = np.array([r.y_true for r in results])
    if not np.all(np.isfinite(truths)):
        raise DimensionError('every test point needs a known true response')
    lengths = np.array([r.conformal_set.length for r in results])
    preds = np.array([r.prediction for r in results])
    r2 = float(r2_score(truths, preds)) if len(results) > 1 and np.all(np.isfinite(preds)) else np.nan
    report = ExperimentReport(
        n_points=len(results),
        coverage=float(np.mean([r.covered for r in results])),
        length_mean=float(lengths.mean()),
        length_sd=float(lengths.std(ddof=1)) if len(results) > 1 else 0.0,
        hull_length_mean=float(np.mean([r.conformal_set.hull_length for r in results])),
        r2=r2,
        kinks_mean=float(np.mean([r.kinks for r in results])),
        nodes_mean=float(np.mean([r.nodes_visited for r in results])),
        empty=sum(r.conformal_set.is_empty for r in results),
        clipped=sum(r.conformal_set.clipped for r in results),
    )
    log.info('%d points: coverage %.3f, mean length %.4g', report.n_points, report.coverage, report.length_mean)
    return report
