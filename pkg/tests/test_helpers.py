import numpy as np
import pytest

from shimcp.helpers import default_range, dedupe_sorted, merge_intervals, pospos, resolve_workers, soft_threshold


def test_pospos():
    np.testing.assert_array_equal(pospos([2.0, 0.0, -1.0]), [2.0, np.inf, np.inf])
    assert pospos(1e-13, eps=1e-12) == np.inf
    assert pospos(0.5) == 0.5


def test_soft_threshold():
    np.testing.assert_array_equal(soft_threshold(np.array([3.0, -3.0, 0.5]), 1.0), [2.0, -2.0, 0.0])


def test_dedupe_sorted():
    np.testing.assert_array_equal(dedupe_sorted([2.0, 1.0, 1.0 + 1e-14, 3.0]), [1.0, 2.0, 3.0])
    assert dedupe_sorted([]).size == 0


def test_merge_intervals():
    assert merge_intervals([(2, 3), (0, 1), (1, 1.5), (5, 5)]) == [(0.0, 1.5), (2.0, 3.0)]
    assert merge_intervals([(0, 1), (1.05, 2)], tol=0.1) == [(0.0, 2.0)]


def test_resolve_workers(monkeypatch):
    assert resolve_workers(3) == 3
    assert resolve_workers(0) == 1
    monkeypatch.setenv('SHIMCP_WORKERS', '2')
    assert resolve_workers() == 2
    monkeypatch.delenv('SHIMCP_WORKERS')
    assert resolve_workers() >= 1


@pytest.mark.parametrize('y, expected', [([1.0, 3.0, 2.0], (-1.0, 5.0)), ([0.0, 0.0], (-1.0, 1.0)),
                                         ([-5.0], (-10.0, 0.0))])
def test_default_range(y, expected):
    assert default_range(y) == expected
