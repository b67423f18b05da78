"""
Named experiment protocols, as plain dictionaries merged with `|`.

Runners in `experiments` start from one of these and apply keyword overrides on top.
"""

__author__ = "shimcp developers"
__version__ = 0.1

from .patterns import Pattern

FIFTH_ORDER = (
    (Pattern.of(1), 2.0),
    (Pattern.of(1, 2), 2.0),
    (Pattern.of(1, 2, 3), 2.0),
    (Pattern.of(1, 3, 4, 5), 2.0),
    (Pattern.of(1, 2, 3, 4, 5), 2.0),
    )

STRONG = (
    (Pattern.of(1), 5.0),
    (Pattern.of(1, 2), 5.0),
    (Pattern.of(1, 2, 3), 5.0),
    )

WEAK = tuple((p, 1.0) for p, _ in STRONG)

synthetic = {
    "zeta" : 0.4,
    "noise_sigma" : 1.0,
    "alpha" : 0.1,
    "l2_weight" : 0.0,
    "folds" : 5,
    "lam" : None,
    "split_fraction" : 0.5,
    "split_repeats" : 1,
    "seed" : 0,
    "time_budget" : None
    }

low_dim = synthetic|{
    "n" : 150,
    "m" : 10,
    "n_test" : 50,
    "terms" : FIFTH_ORDER,
    "orders" : (2, 3),
    "datasets" : 5,
    "repeats" : 3,
    "selection_datasets" : 15
    }

high_dim = low_dim|{
    "m" : 100
    }

strong_signal = synthetic|{
    "n" : 100,
    "m" : 5,
    "zeta" : 0.6,
    "n_test" : 10,
    "terms" : STRONG,
    "orders" : (None,),
    "datasets" : 3,
    "repeats" : 1,
    "selection_datasets" : 3,
    "split_repeats" : 30
    }

weak_signal = strong_signal|{
    "terms" : WEAK
    }

compas = {
    "n_train" : 5000,
    "n_test" : 2214,
    "orders" : (2,),
    "alpha" : 0.1,
    "l2_weight" : 0.0,
    "folds" : 5,
    "lam" : None,
    "split_fraction" : 0.5,
    "split_repeats" : 1,
    "repeats" : 100,
    "seed" : 0,
    "time_budget" : None
    }

table4 = {
    "n" : 100,
    "m" : 30,
    "terms" : FIFTH_ORDER,
    "noise_sigma" : 1.0,
    "zetas" : (0.4, 0.7, 0.9),
    "lams" : (1.0, 10.0),
    "l2_weight" : 0.0,
    "orders" : (2, 3, 4, 5, 10, 15, 20, 25),
    "prune" : (True, False),
    "seed" : 0,
    "time_budget" : 3600.0
    }

PROTOCOLS = {
    "low-dim" : low_dim,
    "high-dim" : high_dim,
    "strong" : strong_signal,
    "weak" : weak_signal,
    "compas" : compas,
    "table4" : table4
    }
