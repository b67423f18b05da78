"""
Fixed-(lambda, tau) fits of the interaction LASSO / elastic net.

The feature space is never enumerated: a restricted problem is solved on a small
working set of patterns, and the tree search in `find_max_violation` either certifies
that no other pattern violates the optimality conditions or hands back the worst
offender to add. Objective (no 1/n scaling):

    1/2 ||y_aug - X b||^2 + lam ||b||_1 + 1/2 l2_weight ||b||^2
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, IterationLimitError, SingularityError
from .helpers import soft_threshold
from .patterns import bound, materialize, walk

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    lam: float
    l2_weight: float = 0.0
    max_order: int = None
    kkt_tol: float = 1e-9
    max_iterations: int = 200
    prune: bool = True
    cd_tol: float = 1e-10
    cd_max_sweeps: int = 10000

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f'lam must be positive, got {self.lam}')
        if not self.l2_weight >= 0:
            raise ConfigError(f'l2_weight must be nonnegative, got {self.l2_weight}')
        if not self.kkt_tol >= 0:
            raise ConfigError(f'kkt_tol must be nonnegative, got {self.kkt_tol}')
        if self.max_order is not None and self.max_order < 1:
            raise ConfigError(f'max_order must be at least 1, got {self.max_order}')
        if self.max_iterations < 1 or self.cd_max_sweeps < 1:
            raise ConfigError('iteration limits must be at least 1')

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ModelState:
    """
    Active patterns with their coefficients and signs, and the residual they leave.

    `columns` caches the sparse design columns of the active patterns. `history`
    holds the objective after each column-generation round of the fit that produced
    the state.
    """
    patterns: tuple
    coef: np.ndarray
    signs: np.ndarray
    residual: np.ndarray
    columns: tuple = field(repr=False)
    tau: float = None
    loss: float = 0.0
    l1: float = 0.0
    l2: float = 0.0
    objective: float = 0.0
    history: tuple = ()

    @classmethod
    def build(cls, Z, y_aug, patterns, coef, cfg, signs=None, tau=None, columns=None, history=()):
        """Assemble a state and recompute its residual and objective from scratch."""
        y_aug = np.asarray(y_aug, dtype=float)
        if len(y_aug) != Z.rows:
            raise DimensionError(f'response of length {len(y_aug)} for {Z.rows} covariate rows')
        patterns = tuple(patterns)
        coef = np.array(coef, dtype=float).reshape(len(patterns))
        if columns is None:
            columns = tuple(materialize(p, Z) for p in patterns)
        if signs is None:
            signs = np.sign(coef)
        residual = y_aug.copy()
        for column, b in zip(columns, coef):
            residual[column.support] -= b * column.weights
        loss = 0.5 * float(residual @ residual)
        l1 = float(np.abs(coef).sum())
        l2 = 0.5 * float(coef @ coef)
        objective = loss + cfg.lam * l1 + cfg.l2_weight * l2
        if tau is None and Z.has_test:
            tau = float(y_aug[-1])
        return cls(patterns, coef, np.asarray(signs, dtype=float), residual, tuple(columns),
                   tau, loss, l1, l2, objective, tuple(history))

    def __len__(self):
        return len(self.patterns)

    def active_matrix(self):
        if not self.columns:
            return np.zeros((len(self.residual), 0))
        return np.column_stack([c.dense() for c in self.columns])

    def predict(self, rows):
        """Evaluate sum_l b_l prod_{j in l} x_j on covariate rows of shape (k, m)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        out = np.zeros(rows.shape[0])
        for pattern, b in zip(self.patterns, self.coef):
            out += b * np.prod(rows[:, [i - 1 for i in pattern.items]], axis=1)
        return out

    def rules(self, names=None):
        """Active terms as (label, coefficient), largest magnitude first."""
        order = np.argsort(-np.abs(self.coef), kind='stable')
        return [(self.patterns[i].label(names), float(self.coef[i])) for i in order]


@dataclass(frozen=True)
class KKTReport:
    max_inactive: float
    worst_pattern: object
    max_active_deviation: float
    passed: bool
    nodes_visited: int


def augmented_response(y, tau):
    return np.append(np.asarray(y, dtype=float), float(tau))


def strongest_pattern(Z, w, max_order=None, exclude=(), floor=-np.inf, prune=True):
    """
    Pattern maximizing |x_l^T w| among those not in `exclude`, by pruned tree search.

    Subtrees whose bound b_{l,w} cannot beat the best value found so far are skipped.
    Only values strictly above `floor` are reported; ties keep the lexicographically
    smallest pattern.

    Returns
    -------
    pattern, value, nodes_visited
        pattern is None when nothing exceeds the floor.
    """
    best = [floor, None]
    exclude = frozenset(exclude)

    def visit(column):
        if column.pattern not in exclude:
            value = abs(column.dot(w))
            if value > best[0]:
                best[0], best[1] = value, column.pattern
        return not prune or bound(column, w) > best[0]

    nodes = walk(Z, visit, max_order)
    return best[1], best[0], nodes


def null_threshold(Z, y_aug, max_order=None, prune=True):
    """Smallest lam at which the fit is empty: max_l |x_l^T y|."""
    _, value, _ = strongest_pattern(Z, np.asarray(y_aug, dtype=float), max_order, floor=0.0, prune=prune)
    return value


def find_max_violation(state, Z, cfg):
    """
    The inactive pattern with the largest |x_l^T w|, or None if none exceeds lam + kkt_tol.

    Returns
    -------
    (Pattern, float) or None
    """
    pattern, value, nodes = strongest_pattern(Z, state.residual, cfg.max_order, exclude=state.patterns,
                                              floor=cfg.lam + cfg.kkt_tol, prune=cfg.prune)
    log.debug('violation search visited %d nodes', nodes)
    if pattern is None:
        return None
    return pattern, value


def _coordinate_descent(G, c, beta, lam, l2_weight, tol, max_sweeps):
    beta = beta.copy()
    diag = np.diag(G)
    for sweep in range(max_sweeps):
        change = 0.0
        for j in range(len(beta)):
            denom = diag[j] + l2_weight
            if denom <= 0:
                continue
            old = beta[j]
            rho = c[j] - G[j] @ beta + diag[j] * old
            new = soft_threshold(rho, lam) / denom
            if new != old:
                beta[j] = new
                change = max(change, abs(new - old))
        if change < tol:
            return beta, True
    return beta, False


def _polish(G, c, beta, lam, l2_weight, tol):
    """Solve the equicorrelation system on beta's support; keep beta if signs or KKT disagree."""
    nz = np.flatnonzero(beta)
    if not nz.size:
        return beta
    s = np.sign(beta[nz])
    A = G[np.ix_(nz, nz)] + l2_weight * np.eye(nz.size)
    try:
        sol = linalg.solve(A, c[nz] - lam * s, assume_a='pos')
    except (linalg.LinAlgError, ValueError):
        return beta
    if not np.all(np.isfinite(sol)) or np.any(np.sign(sol) != s):
        return beta
    candidate = np.zeros_like(beta)
    candidate[nz] = sol
    grad = c - G @ candidate
    rest = np.setdiff1d(np.arange(len(beta)), nz)
    if rest.size and np.max(np.abs(grad[rest])) > lam + tol:
        return beta
    return candidate


def colliding_patterns(columns, l2_weight=0.0, rcond=1e-10):
    """Patterns involved in a linear dependence among the given columns, or () if none."""
    if not columns:
        return ()
    X = np.column_stack([c.dense() for c in columns])
    G = X.T @ X + l2_weight * np.eye(X.shape[1])
    null = linalg.null_space(G, rcond=rcond)
    if not null.size:
        return ()
    involved = np.any(np.abs(null) > 1e-8, axis=1)
    return tuple(c.pattern for c, hit in zip(columns, involved) if hit)


def fit(Z, y_aug, cfg, initial=None):
    """
    Solve the interaction LASSO (elastic net when l2_weight > 0) at a fixed response.

    Column generation: solve the problem restricted to a working set by coordinate
    descent, polish it with an exact equicorrelation solve, then add the pattern
    that violates the optimality conditions most, until the tree search finds none.

    Parameters
    ----------
    Z : CovariateMatrix
    y_aug : array-like
        Response for every row of Z (the augmented response when Z has a test row).
    cfg : FitConfig
    initial : ModelState, optional
        Warm start; its patterns and coefficients seed the working set.

    Returns
    -------
    ModelState
        Certified optimal over the whole pattern space (up to cfg.max_order).
    """
    y_aug = np.asarray(y_aug, dtype=float)
    if len(y_aug) != Z.rows:
        raise DimensionError(f'response of length {len(y_aug)} for {Z.rows} covariate rows')
    patterns = list(initial.patterns) if initial is not None else []
    coef = list(initial.coef) if initial is not None else []
    columns = list(initial.columns) if initial is not None else []
    history = []
    state = None
    for round_ in range(cfg.max_iterations):
        if patterns:
            X = np.column_stack([c.dense() for c in columns])
            G = X.T @ X
            c = X.T @ y_aug
            beta, converged = _coordinate_descent(G, c, np.array(coef), cfg.lam, cfg.l2_weight,
                                                  cfg.cd_tol, cfg.cd_max_sweeps)
            if not converged:
                log.warning('coordinate descent hit %d sweeps in round %d', cfg.cd_max_sweeps, round_)
            beta = _polish(G, c, beta, cfg.lam, cfg.l2_weight, cfg.kkt_tol)
            keep = [i for i, b in enumerate(beta) if b != 0]
            patterns = [patterns[i] for i in keep]
            columns = [columns[i] for i in keep]
            coef = [float(beta[i]) for i in keep]
        state = ModelState.build(Z, y_aug, patterns, coef, cfg, columns=columns)
        history.append(state.objective)
        found = find_max_violation(state, Z, cfg)
        if found is None:
            if cfg.l2_weight == 0 and columns:
                collide = colliding_patterns(columns)
                if collide:
                    raise SingularityError(collide)
            log.debug('fit converged after %d rounds with %d active patterns', round_ + 1, len(patterns))
            return replace(state, history=tuple(history))
        pattern, value = found
        log.debug('round %d: adding %s with |x^T w| = %.6g', round_, pattern, value)
        patterns.append(pattern)
        columns.append(materialize(pattern, Z))
        coef.append(0.0)
    raise IterationLimitError(replace(state, history=tuple(history)),
                              f'column generation did not converge in {cfg.max_iterations} rounds')


def certify_kkt(state, Z, cfg):
    """
    Check the optimality conditions of a state over the full pattern space.

    Active patterns must satisfy x_l^T w - l2_weight b_l = lam s_l with s_l the sign of
    any nonzero b_l, every other pattern |x_l^T w| <= lam, all within cfg.kkt_tol. A
    coefficient on the wrong side of zero counts as a deviation of 2 lam.

    Returns
    -------
    KKTReport
    """
    deviation = 0.0
    for column, b, s in zip(state.columns, state.coef, state.signs):
        rho = column.dot(state.residual) - cfg.l2_weight * b
        deviation = max(deviation, abs(rho - cfg.lam * s))
        if s * b < -cfg.kkt_tol:
            deviation = max(deviation, 2 * cfg.lam)
    pattern, value, nodes = strongest_pattern(Z, state.residual, cfg.max_order, exclude=state.patterns,
                                              floor=-1.0, prune=cfg.prune)
    if pattern is None:
        value = 0.0
    passed = value <= cfg.lam + cfg.kkt_tol and deviation <= cfg.kkt_tol
    return KKTReport(float(value), pattern, float(deviation), bool(passed), nodes)
