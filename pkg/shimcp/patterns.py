"""
Interaction patterns and their design-matrix columns.

A pattern names one interaction term by the (1-based) covariates it multiplies.
Columns are kept sparse, as the sorted rows where the product is nonzero, because
every quantity the tree search needs (correlations, pruning bounds) only touches
those rows. Supports shrink as items are added, which is what makes the bounds
computed here valid for a whole subtree.
"""

__author__ = "shimcp developers"
__version__ = 0.1

from dataclasses import dataclass, field
from math import comb
from time import monotonic

import numpy as np

from .errors import DimensionError, InvalidPatternError


@dataclass(frozen=True, order=True)
class Pattern:
    items: tuple

    def __post_init__(self):
        try:
            items = tuple(sorted(int(i) for i in self.items))
        except (TypeError, ValueError) as e:
            raise InvalidPatternError(f'pattern items must be integers, got {self.items!r}') from e
        if not items:
            raise InvalidPatternError('a pattern needs at least one covariate')
        if len(set(items)) != len(items):
            raise InvalidPatternError(f'repeated covariate in pattern {items}')
        if items[0] < 1:
            raise InvalidPatternError(f'covariate indices start at 1, got {items}')
        object.__setattr__(self, 'items', items)

    @classmethod
    def of(cls, *items):
        return cls(tuple(items))

    @property
    def order(self):
        return len(self.items)

    def check(self, m):
        if self.items[-1] > m:
            raise InvalidPatternError(f'pattern {self} refers past the last covariate (m={m})')
        return self

    def label(self, names=None):
        if names is None:
            return ' & '.join(f'z{i}' for i in self.items)
        return ' & '.join(names[i - 1] for i in self.items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def __str__(self):
        return '{' + ','.join(str(i) for i in self.items) + '}'


class CovariateMatrix:
    """
    Covariates in [0, 1] for n labeled rows, optionally followed by the test row x_{n+1}.

    Parameters
    ----------
    values : array-like, shape (rows, m)
        Rows are the labeled instances, then the test instance when present.
    n : int, optional
        Number of labeled rows. Defaults to rows - 1, i.e. the last row is the test row.
    """

    def __init__(self, values, n=None):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f'covariates must be a 2-D array, got shape {values.shape}')
        rows, m = values.shape
        if n is None:
            n = rows - 1
        if n < 1 or m < 1:
            raise DimensionError(f'need at least one labeled row and one covariate, got n={n}, m={m}')
        if rows not in (n, n + 1):
            raise DimensionError(f'{rows} rows cannot hold {n} labeled rows')
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise DimensionError('covariate entries must lie in [0, 1]')
        values.setflags(write=False)
        self.values = values
        self.n = int(n)
        self.m = int(m)
        self.binary = bool(np.all((values == 0) | (values == 1)))
        self._supports = tuple(np.flatnonzero(values[:, j]) for j in range(m))

    @classmethod
    def with_test(cls, Z, x_test):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        x_test = np.asarray(x_test, dtype=float).reshape(1, -1)
        return cls(np.vstack([Z, x_test]), n=Z.shape[0])

    @classmethod
    def labeled(cls, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return cls(Z, n=Z.shape[0])

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def has_test(self):
        return self.rows == self.n + 1

    @property
    def test_row(self):
        return self.values[self.n] if self.has_test else None

    def support(self, j):
        """Nonzero rows of covariate j (1-based)."""
        return self._supports[j - 1]

    def __repr__(self):
        return f'CovariateMatrix(n={self.n}, m={self.m}, test_row={self.has_test}, binary={self.binary})'


@dataclass(frozen=True, eq=False)
class PatternColumn:
    pattern: Pattern
    support: np.ndarray
    weights: np.ndarray = field(repr=False)
    length: int

    def dense(self):
        out = np.zeros(self.length)
        out[self.support] = self.weights
        return out

    def dot(self, vec):
        if len(vec) != self.length:
            raise DimensionError(f'vector of length {len(vec)} against a column of length {self.length}')
        return float(self.weights @ vec[self.support])

    @property
    def last_value(self):
        """Entry in the final row, i.e. x_{n+1,l} when the matrix carries a test row."""
        if self.support.size and self.support[-1] == self.length - 1:
            return float(self.weights[-1])
        return 0.0


def materialize(pattern, Z):
    """
    Build the design-matrix column of a pattern as the elementwise product of its covariates.

    Parameters
    ----------
    pattern : Pattern
        Checked against Z.m.
    Z : CovariateMatrix

    Returns
    -------
    PatternColumn
    """
    pattern.check(Z.m)
    first = pattern.items[0]
    support = Z.support(first)
    weights = Z.values[support, first - 1]
    for item in pattern.items[1:]:
        factor = Z.values[support, item - 1]
        keep = factor != 0
        support = support[keep]
        weights = weights[keep] * factor[keep]
    return PatternColumn(pattern, support, weights, Z.rows)


def extend(column, item, Z):
    """Column of column.pattern plus one covariate, computed from the parent's support."""
    factor = Z.values[column.support, item - 1]
    keep = factor != 0
    return PatternColumn(Pattern(column.pattern.items + (item,)), column.support[keep],
                         column.weights[keep] * factor[keep], column.length)


def children(pattern, m):
    """
    Canonical children of a node: extensions by one index larger than the current maximum.

    None stands for the root, whose children are the singletons.
    """
    if pattern is None:
        return [Pattern((j,)) for j in range(1, m + 1)]
    last = pattern.items[-1]
    return [Pattern(pattern.items + (j,)) for j in range(last + 1, m + 1)]


def bound(column, vec):
    if len(vec) != column.length:
        raise DimensionError(f'vector of length {len(vec)} against a column of length {column.length}')
    prods = column.weights * vec[column.support]
    return float(max(prods[prods > 0].sum(), -prods[prods < 0].sum()))


def bound_pair(column, w, v):
    """
    Anti-monotone bounds b_w, b_v of a node.

    b_w is the larger of the positive and negative parts of w summed over the column's
    support, so it dominates |x^T w| for this pattern and every pattern below it.
    """
    return bound(column, w), bound(column, v)


def search_space_size(m, max_order=None):
    d = m if max_order is None else min(max_order, m)
    return sum(comb(m, k) for k in range(1, d + 1))


def walk(Z, visit, max_order=None, deadline=None):
    """
    Depth-first traversal of the pattern tree in canonical (lexicographic) order.

    Parameters
    ----------
    Z : CovariateMatrix
    visit : callable
        Called with each PatternColumn; returning True descends into its children.
    max_order : int, optional
        Deepest interaction order to visit. Unbounded by default.
    deadline : float, optional
        time.monotonic() value after which the walk raises TimeoutError.

    Returns
    -------
    int
        Number of nodes visited.
    """
    m = Z.m
    limit = m if max_order is None else min(max_order, m)
    stack = [materialize(Pattern((j,)), Z) for j in range(m, 0, -1)]
    visited = 0
    while stack:
        column = stack.pop()
        visited += 1
        if deadline is not None and visited % 512 == 1 and monotonic() > deadline:
            raise TimeoutError(f'pattern search passed its deadline after {visited} nodes')
        if visit(column) and column.pattern.order < limit:
            for j in range(m, column.pattern.items[-1], -1):
                stack.append(extend(column, j, Z))
    return visited
