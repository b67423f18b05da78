"""
Exact solution path tau -> b(tau) at fixed lambda.

Between kinks the active set and signs are fixed and the coefficients move along
nu = (X_A^T X_A + l2_weight I)^{-1} x_{n+1,A}. Each step takes the nearer of the
next leave event (an active coefficient reaching zero) and the next join event (an
inactive correlation reaching lambda). The join search walks the pattern tree and
skips any subtree whose anti-monotone bounds prove it cannot beat the current
minimum step.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from time import monotonic

import numpy as np
from scipy import linalg

from .errors import BudgetExceededError, ConfigError, DimensionError, SingularityError
from .helpers import default_range, pospos
from .patterns import bound_pair, materialize, search_space_size, walk
from .solver import augmented_response, colliding_patterns, fit

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
STEP_EPS = 1e-12
GAMMA_TOL = 1e-10
COEF_TOL = 1e-12


class Event(str, Enum):
    START = 'start'
    JOIN = 'join'
    LEAVE = 'leave'
    END = 'end'


@dataclass(frozen=True, eq=False)
class Kink:
    """
    Path state at one breakpoint and the direction it follows until the next one.

    `event`/`pattern` describe the change that produced this kink. `coalesced` lists
    the other events folded into it: earlier events when steps shorter than STEP_EPS
    occurred, and every further pattern that left at the same tau.
    """
    tau: float
    patterns: tuple
    coef: np.ndarray
    signs: np.ndarray
    event: Event
    pattern: object
    nu: np.ndarray
    v: np.ndarray
    residual: np.ndarray
    columns: tuple = field(repr=False)
    gamma: dict = field(default_factory=dict)
    coalesced: tuple = ()

    @property
    def residual_slope(self):
        """d w / d tau on this segment: e_{n+1} - v."""
        slope = -self.v.copy()
        slope[-1] += 1.0
        return slope

    def coef_at(self, tau):
        return self.coef + (tau - self.tau) * self.nu

    def residual_at(self, tau):
        return self.residual + (tau - self.tau) * self.residual_slope


@dataclass(frozen=True)
class JoinStep:
    delta2: float
    joiner: object
    sign: int
    nodes_visited: int
    gamma: float = 0.0


@dataclass(frozen=True)
class PathStats:
    nodes_per_step: tuple
    search_space: int
    degeneracies: int = 0
    coalesced: int = 0
    pruned: bool = True
    seconds: float = 0.0

    @property
    def nodes_visited(self):
        return int(sum(self.nodes_per_step))

    @property
    def node_fraction(self):
        """Mean share of the search space visited by one join search."""
        if not self.nodes_per_step:
            return 0.0
        return float(np.mean(self.nodes_per_step)) / self.search_space


@dataclass(frozen=True, eq=False)
class TauPath:
    kinks: tuple
    lam: float
    l2_weight: float
    range: tuple
    stats: PathStats

    @property
    def kink_count(self):
        return len(self.kinks)

    def segments(self):
        """(kink, next_tau) for every segment between consecutive kinks."""
        return [(k, nxt.tau) for k, nxt in zip(self.kinks[:-1], self.kinks[1:])]

    def locate(self, tau):
        taus = [k.tau for k in self.kinks]
        idx = bisect_right(taus, tau) - 1
        return min(max(idx, 0), len(self.kinks) - 1)

    def state_at(self, tau):
        """Active patterns, coefficients and residual at tau, by affine interpolation."""
        kink = self.kinks[self.locate(tau)]
        return kink.patterns, kink.coef_at(tau), kink.residual_at(tau)

    def prediction_at(self, tau):
        """Fitted value at the test row for candidate response tau."""
        _, _, residual = self.state_at(tau)
        return float(tau - residual[-1])

    def to_records(self):
        return [{
            'tau': float(k.tau),
            'event': k.event.value,
            'pattern': list(k.pattern.items) if k.pattern is not None else None,
            'active': [list(p.items) for p in k.patterns],
            'coef': [float(b) for b in k.coef],
        } for k in self.kinks]


def directions(columns, Z, l2_weight=0.0):
    """
    Direction vectors of the current segment.

    Parameters
    ----------
    columns : sequence of PatternColumn
        Active columns.
    Z : CovariateMatrix
        Must carry the test row.
    l2_weight : float, optional

    Returns
    -------
    nu : numpy array
        Solves (X_A^T X_A + l2_weight I) nu = x_{n+1,A}.
    v : numpy array, length n+1
        X_A nu.
    """
    if not Z.has_test:
        raise DimensionError('directions need a covariate matrix with a test row')
    if not columns:
        return np.zeros(0), np.zeros(Z.rows)
    X = np.column_stack([c.dense() for c in columns])
    G = X.T @ X + l2_weight * np.eye(X.shape[1])
    eigs = linalg.eigvalsh(G)
    if eigs[0] <= 1e-10 * max(1.0, eigs[-1]):
        raise SingularityError(colliding_patterns(columns, l2_weight) or tuple(c.pattern for c in columns))
    nu = linalg.solve(G, X[-1], assume_a='pos')
    return nu, X @ nu


def step_leave(kink):
    """
    Distance to the next leave event: min over active l of (-b_l / nu_l)++.

    A coefficient already at zero (within COEF_TOL) whose direction points against its
    sign leaves at once.

    Returns
    -------
    delta1 : float
        Infinity when no coefficient is heading to zero.
    leavers : tuple of Pattern
        Every pattern reaching zero within TIE_TOL of delta1, smallest first. Empty
        when delta1 is infinite.
    """
    if not len(kink.patterns):
        return np.inf, ()
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(kink.nu != 0, -kink.coef / kink.nu, np.inf)
    ratios = pospos(np.nan_to_num(ratios, nan=np.inf))
    stranded = (np.abs(kink.coef) <= COEF_TOL) & (kink.nu * kink.signs < 0)
    ratios = np.where(stranded, 0.0, ratios)
    delta1 = float(ratios.min())
    if not np.isfinite(delta1):
        return np.inf, ()
    tied = np.flatnonzero(ratios <= delta1 + TIE_TOL * max(1.0, delta1))
    return delta1, tuple(sorted(kink.patterns[i] for i in tied))


def step_join(kink, Z, cfg, cap=np.inf, exclude=(), prune=None, deadline=None):
    """
    Distance to the next join event over every inactive pattern.

    For an inactive pattern the correlation moves as rho + Delta * gamma with
    gamma = x_{n+1,l} - x_l^T v, so it reaches the lambda level after
    (lam sign(gamma) - rho) / gamma. The tree walk skips the subtree under l whenever

        b_{l,w} + D (b_{l,v} + x_{n+1,l}) < max_k |rho_k| - D (|eta_k| + x_{n+1,k})

    for the current minimum D, with rho_k, eta_k taken net of the ridge term for the
    elastic net; with no active pattern the right-hand side is lam itself.

    Parameters
    ----------
    kink : Kink
    Z : CovariateMatrix
    cfg : FitConfig
    cap : float, optional
        Steps at or beyond this value are not reported.
    exclude : collection of Pattern, optional
        The patterns that just left; their near-zero re-entry is ignored.
    prune : bool, optional
        Defaults to cfg.prune.
    deadline : float, optional
        time.monotonic() deadline for the walk.

    Returns
    -------
    JoinStep
    """
    prune = cfg.prune if prune is None else prune
    lam, l2_weight = cfg.lam, cfg.l2_weight
    w, v = kink.residual, kink.v
    active = set(kink.patterns)

    if kink.patterns:
        rho_k = np.array([abs(c.dot(w) - l2_weight * b) for c, b in zip(kink.columns, kink.coef)])
        eta_k = np.array([abs(c.dot(v) + l2_weight * nu) for c, nu in zip(kink.columns, kink.nu)])
        x_k = np.array([c.last_value for c in kink.columns])

        def reference(delta):
            return float(np.max(rho_k - delta * (eta_k + x_k)))
    else:
        def reference(delta):
            return lam

    best = {'delta': cap, 'pattern': None, 'sign': 0, 'gamma': 0.0}

    def visit(column):
        pattern = column.pattern
        x_last = column.last_value
        if pattern not in active:
            rho = column.dot(w)
            gamma = x_last - column.dot(v)
            if abs(gamma) > GAMMA_TOL:
                sign = 1 if gamma > 0 else -1
                delta = (lam * sign - rho) / gamma
                # at the lambda level already and moving outward: joins now
                if -STEP_EPS < delta <= 0:
                    delta = 0.0
                if delta >= 0 and not (pattern in exclude and delta <= STEP_EPS):
                    if delta < best['delta'] - (TIE_TOL if best['pattern'] is not None else 0.0):
                        best.update(delta=delta, pattern=pattern, sign=sign, gamma=gamma)
        if not prune or not np.isfinite(best['delta']):
            return True
        d = best['delta']
        b_w, b_v = bound_pair(column, w, v)
        return not b_w + d * (b_v + x_last) < reference(d)

    nodes = walk(Z, visit, cfg.max_order, deadline)
    if best['pattern'] is None:
        return JoinStep(np.inf, None, 0, nodes)
    return JoinStep(float(best['delta']), best['pattern'], best['sign'], nodes, float(best['gamma']))


def compute_tau_path(Z, y, range=None, cfg=None, prune=None, max_kinks=10000, time_budget=None):
    """
    Trace the piecewise-linear path of the fit as the test response tau sweeps a range.

    Parameters
    ----------
    Z : CovariateMatrix
        n labeled rows plus the test row.
    y : array-like, length n
        Observed responses.
    range : (float, float), optional
        [y_min, y_max] to cover. Defaults to default_range(y).
    cfg : FitConfig
    prune : bool, optional
        Use the subtree bounds in the join search. Defaults to cfg.prune.
    max_kinks : int, optional
        Safety cap on the number of kinks.
    time_budget : float, optional
        Wall-clock seconds after which the path is abandoned.

    Returns
    -------
    TauPath
        First kink at y_min, last kink at or beyond y_max.
    """
    y = np.asarray(y, dtype=float)
    if not Z.has_test or len(y) != Z.n:
        raise DimensionError(f'{len(y)} responses for {Z!r}')
    lo, hi = default_range(y) if range is None else (float(range[0]), float(range[1]))
    if not lo < hi:
        raise ConfigError(f'tau range must satisfy y_min < y_max, got [{lo}, {hi}]')
    prune = cfg.prune if prune is None else prune
    started = monotonic()
    deadline = started + time_budget if time_budget else None

    state = fit(Z, augmented_response(y, lo), cfg.replace(prune=prune))
    patterns = list(state.patterns)
    coef = np.array(state.coef, dtype=float)
    signs = list(state.signs)
    columns = list(state.columns)

    tau = lo
    event, changed = Event.START, None
    kinks, nodes = [], []
    degeneracies = coalesced = 0
    just_left = also = ()
    merge = False
    gamma = {}

    def partial():
        stats = PathStats(tuple(nodes), search_space_size(Z.m, cfg.max_order), degeneracies, coalesced,
                          prune, monotonic() - started)
        return TauPath(tuple(kinks), cfg.lam, cfg.l2_weight, (lo, hi), stats)

    while True:
        residual = augmented_response(y, tau)
        for column, b in zip(columns, coef):
            residual[column.support] -= b * column.weights
        nu, v = directions(columns, Z, cfg.l2_weight)
        folded = also
        if merge:
            prev = kinks.pop()
            folded = prev.coalesced + ((prev.event, prev.pattern),) + also
        kink = Kink(tau, tuple(patterns), coef.copy(), np.array(signs, dtype=float), event, changed,
                    nu, v, residual, tuple(columns), gamma, folded)
        kinks.append(kink)
        if event is Event.END:
            break
        if len(kinks) >= max_kinks:
            raise BudgetExceededError(partial(), 'kinks')

        remaining = hi - tau
        delta1, leavers = step_leave(kink)
        try:
            join = step_join(kink, Z, cfg, cap=min(delta1, remaining), exclude=just_left, prune=prune,
                             deadline=deadline)
        except TimeoutError:
            raise BudgetExceededError(partial(), 'time') from None
        nodes.append(join.nodes_visited)
        delta2 = join.delta2

        if min(delta1, delta2) >= remaining:
            coef = coef + remaining * nu
            tau, event, changed, gamma = hi, Event.END, None, {}
            merge, also = False, ()
            continue

        if delta1 <= delta2 + TIE_TOL:
            if abs(delta1 - delta2) <= TIE_TOL:
                degeneracies += 1
                log.debug('tie at tau=%.17g between leave of %s and join of %s; leave first',
                          tau + delta1, leavers, join.joiner)
            delta = delta1
            coef = coef + delta * nu
            keep = [i for i, p in enumerate(patterns) if p not in leavers]
            patterns = [patterns[i] for i in keep]
            signs = [signs[i] for i in keep]
            columns = [columns[i] for i in keep]
            coef = coef[keep]
            event, changed, gamma = Event.LEAVE, leavers[0], {}
            also = tuple((Event.LEAVE, p) for p in leavers[1:])
            if also:
                degeneracies += 1
                log.debug('tau=%.17g: %d patterns leave together', tau + delta, len(leavers))
            just_left = leavers
        else:
            delta = delta2
            coef = np.append(coef + delta * nu, 0.0)
            patterns.append(join.joiner)
            signs.append(float(join.sign))
            columns.append(materialize(join.joiner, Z))
            event, changed, gamma = Event.JOIN, join.joiner, {join.joiner: join.gamma}
            also, just_left = (), ()
        log.debug('tau=%.17g %s %s (%d nodes)', tau + delta, event.value, changed, join.nodes_visited)
        tau = tau + delta
        merge = delta <= STEP_EPS and len(kinks) > 1
        if merge:
            coalesced += 1

    path = partial()
    log.info('tau-path over [%.6g, %.6g]: %d kinks, %d nodes visited', lo, hi, path.kink_count,
             path.stats.nodes_visited)
    return path


def path_differences(a, b, tau_rtol=1e-8, coef_atol=1e-6):
    """
    Disagreements between two paths over the same data, as readable strings.

    Paths agree when they have the same kinks with the same events, kink locations
    within tau_rtol (relative) and coefficients within coef_atol.
    """
    problems = []
    if a.kink_count != b.kink_count:
        problems.append(f'{a.kink_count} kinks against {b.kink_count}')
    for t, (ka, kb) in enumerate(zip(a.kinks, b.kinks)):
        if (ka.event, ka.pattern) != (kb.event, kb.pattern):
            problems.append(f'kink {t}: {ka.event.value} {ka.pattern} against {kb.event.value} {kb.pattern}')
            break
        if abs(ka.tau - kb.tau) > tau_rtol * max(1.0, abs(ka.tau)):
            problems.append(f'kink {t}: tau {ka.tau!r} against {kb.tau!r}')
        if ka.patterns != kb.patterns:
            problems.append(f'kink {t}: active sets differ')
            break
        if ka.coef.size and np.max(np.abs(ka.coef - kb.coef)) > coef_atol:
            problems.append(f'kink {t}: coefficients differ by {np.max(np.abs(ka.coef - kb.coef)):.3g}')
    return problems
