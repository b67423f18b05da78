__author__ = "shimcp developers"
__version__ = 0.1

import os

import numpy as np
from psutil import cpu_count


def pospos(a, eps=0.0):
    """
    The (a)++ convention of homotopy step sizes: a where a > eps, infinity otherwise.

    Parameters
    ----------
    a : float or numpy array
        Candidate step sizes.
    eps : float, optional
        Steps at or below this value count as non-positive. The default is 0.

    Returns
    -------
    float or numpy array
        Same shape as the input.
    """
    a = np.asarray(a, dtype=float)
    out = np.where(a > eps, a, np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0)


def default_range(y):
    """[min(y) - spread, max(y) + spread] with spread = max(y) - min(y), or max(1, |y|) for constant y."""
    y = np.asarray(y, dtype=float)
    lo, hi = float(y.min()), float(y.max())
    spread = hi - lo
    if spread == 0:
        spread = max(1.0, abs(lo))
    return lo - spread, hi + spread


def dedupe_sorted(values, tol=1e-12):
    """Sort values and drop any within tol of the previous kept value."""
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return values
    keep = [values[0]]
    for val in values[1:]:
        if val - keep[-1] > tol:
            keep.append(val)
    return np.array(keep)


def merge_intervals(intervals, tol=0.0):
    """
    Merge half-open intervals [lo, hi) that overlap or touch.

    Intervals with lo >= hi are dropped. Touching means the gap between them is at most tol.
    """
    merged = []
    for lo, hi in sorted((float(lo), float(hi)) for lo, hi in intervals):
        if not hi > lo:
            continue
        if merged and lo - merged[-1][1] <= tol:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def resolve_workers(n_jobs=None):
    """Worker count from the argument, then SHIMCP_WORKERS, then the physical core count."""
    if n_jobs is None:
        env = os.environ.get('SHIMCP_WORKERS')
        if env:
            n_jobs = int(env)
    if n_jobs is None:
        n_jobs = cpu_count(logical=False) or 1
    return max(1, int(n_jobs))
