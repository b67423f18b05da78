"""
Benchmark runners: interval length / coverage / r2 per method, and pruning and kink counts.

Each runner takes a protocol from `presets` (or its name) and keyword overrides
merged on top of it.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import logging

import numpy as np
import pandas as pd

from . import presets
from .conformal import conformal_batch, evaluate, split_batch
from .datagen import Dataset, SyntheticSpec, generate, philox, select_lambda, select_lambda_median
from .errors import BudgetExceededError, ConfigError, SingularityError
from .patterns import CovariateMatrix, search_space_size
from .solver import FitConfig
from .tables import summarize
from .taupath import compute_tau_path

log = logging.getLogger(__name__)


def protocol(name_or_params, **kwargs):
    """Protocol dictionary with overrides applied."""
    if isinstance(name_or_params, str):
        try:
            params = presets.PROTOCOLS[name_or_params]
        except KeyError:
            raise ConfigError(f'unknown protocol {name_or_params!r}; choose from {sorted(presets.PROTOCOLS)}') from None
    else:
        params = name_or_params
    return dict(params)|kwargs


def method_name(order, kind):
    if order == 1:
        return f'lasso_{kind}'
    return f'shim_{kind}' if order is None else f'shim_{order}{kind}'


def _orders(params):
    return (1,) + tuple(d for d in params['orders'] if d != 1)


def _evaluate_methods(train, test, lams, params, n_jobs, replicate):
    rows = []
    for order in _orders(params):
        cfg = FitConfig(lam=lams[order], l2_weight=params['l2_weight'], max_order=order)
        full = conformal_batch(train.Z, train.y, test.Z, cfg, params['alpha'], y_test=test.y, n_jobs=n_jobs,
                               time_budget=params.get('time_budget'))
        rows.append(_row(evaluate(full), method_name(order, 'f'), replicate, lams[order]))
        for k in range(params['split_repeats']):
            fitting, calibration = train.split(params['split_fraction'], seed=params['seed'] + 7919 * replicate + k)
            split = split_batch(fitting.Z, fitting.y, calibration.Z, calibration.y, test.Z, cfg, params['alpha'],
                                y_test=test.y)
            rows.append(_row(evaluate(split), method_name(order, 's'), replicate, lams[order], k))
    return rows


def _row(report, method, replicate, lam, split_repeat=0):
    return {'method': method, 'replicate': replicate, 'split_repeat': split_repeat, 'lam': lam,
            'length': report.length_mean, 'hull_length': report.hull_length_mean, 'coverage': report.coverage,
            'r2': report.r2, 'kinks': report.kinks_mean, 'nodes': report.nodes_mean, 'points': report.n_points}


def _spec(params, seed, n):
    return SyntheticSpec(n, params['m'], params['zeta'], params['terms'], params['noise_sigma'], seed)


def _selected_lams(params, n_jobs):
    lams = {}
    for order in _orders(params):
        if params['lam'] is not None:
            lams[order] = float(params['lam'])
            continue
        specs = [_spec(params, 10_000 + params['seed'] + k, params['n']) for k in range(params['selection_datasets'])]
        template = FitConfig(lam=1.0, l2_weight=params['l2_weight'], max_order=order)
        lams[order], _ = select_lambda_median(specs, params['folds'], template, n_jobs=n_jobs)
        log.info('%s: lam=%.6g', method_name(order, ''), lams[order])
    return lams


def run_synthetic(name_or_params='low-dim', n_jobs=None, **kwargs):
    """
    Full-CP and split-CP for lasso and each SHIM order on fresh synthetic datasets.

    Returns
    -------
    records : pandas.DataFrame
        One row per (method, replicate, split repeat).
    summary : pandas.DataFrame
        method, length, cov, r2 as "mean (sd)".
    """
    params = protocol(name_or_params, **kwargs)
    lams = _selected_lams(params, n_jobs)
    rows = []
    for r in range(params['datasets'] * params['repeats']):
        data = generate(_spec(params, params['seed'] + r, params['n'] + params['n_test']))
        train = data.subset(np.arange(params['n']))
        test = data.subset(np.arange(params['n'], data.n))
        rows += _evaluate_methods(train, test, lams, params, n_jobs, r)
        log.info('replicate %d of %d done', r + 1, params['datasets'] * params['repeats'])
    records = pd.DataFrame(rows)
    return records, summarize(records)


def run_dataset(dataset, name_or_params='compas', n_jobs=None, **kwargs):
    """
    Repeated random train/test splits of a real dataset, lambda chosen by CV on each training part.
    """
    if not isinstance(dataset, Dataset):
        raise ConfigError('run_dataset needs a Dataset')
    params = protocol(name_or_params, **kwargs)
    total = params['n_train'] + params['n_test']
    n_train = params['n_train'] if total <= dataset.n else int(round(dataset.n * params['n_train'] / total))
    rows = []
    for r in range(params['repeats']):
        order = philox(params['seed'] + r).permutation(dataset.n)
        train = dataset.subset(np.sort(order[:n_train]))
        test = dataset.subset(np.sort(order[n_train:n_train + min(params['n_test'], dataset.n - n_train)]))
        lams = {}
        for d in _orders(params):
            if params['lam'] is not None:
                lams[d] = float(params['lam'])
            else:
                template = FitConfig(lam=1.0, l2_weight=params['l2_weight'], max_order=d)
                lams[d], _ = select_lambda(train, params['folds'], template, seed=params['seed'] + r, n_jobs=n_jobs)
        rows += _evaluate_methods(train, test, lams, params, n_jobs, r)
    records = pd.DataFrame(rows)
    return records, summarize(records)


def run_paths(name_or_params='table4', **kwargs):
    """
    Trace one tau-path per (lam, zeta, order, pruning) and record its cost.

    The last generated row is the test point. Runs that hit the time budget are kept
    with completed=False and the counts of the partial path; `status` says why
    (ok, time, kinks or singular).

    Returns
    -------
    pandas.DataFrame
        lam, zeta, d, prune, search_space, nodes_visited, node_fraction, kinks, seconds, completed, status
    """
    params = protocol(name_or_params, **kwargs)
    rows = []
    for zeta in params['zetas']:
        spec = SyntheticSpec(params['n'] + 1, params['m'], zeta, params['terms'], params['noise_sigma'],
                             params['seed'])
        data = generate(spec)
        Z = CovariateMatrix(data.Z)
        y = data.y[:-1]
        for lam in params['lams']:
            for d in params['orders']:
                for prune in params['prune']:
                    cfg = FitConfig(lam=float(lam), l2_weight=params['l2_weight'], max_order=d, prune=prune)
                    row = {'lam': float(lam), 'zeta': zeta, 'd': d, 'prune': prune,
                           'search_space': search_space_size(params['m'], d)}
                    try:
                        path, status = compute_tau_path(Z, y, cfg=cfg, time_budget=params['time_budget']), 'ok'
                    except BudgetExceededError as e:
                        path, status = e.partial, e.reason
                        log.info('d=%s prune=%s aborted: %s', d, prune, e)
                    except SingularityError as e:
                        log.warning('d=%s prune=%s: %s', d, prune, e)
                        rows.append(row | {'nodes_visited': np.nan, 'node_fraction': np.nan, 'kinks': 0,
                                           'seconds': np.nan, 'completed': False, 'status': 'singular'})
                        continue
                    stats = path.stats
                    rows.append(row | {'nodes_visited': stats.nodes_visited, 'node_fraction': stats.node_fraction,
                                       'kinks': path.kink_count, 'seconds': stats.seconds,
                                       'completed': status == 'ok', 'status': status})
    return pd.DataFrame(rows)


def pruning_table(frame):
    """Seconds per (d, search space) with one column per (lam, prune, zeta); aborted runs read inf."""
    frame = frame.assign(seconds=np.where(frame['completed'], frame['seconds'], np.inf))
    return frame.pivot_table(index=['d', 'search_space'], columns=['lam', 'prune', 'zeta'], values='seconds')


def kink_table(frame):
    """Kink counts per d with one column per (lam, zeta), pruned completed runs only."""
    done = frame[frame['prune'] & frame['completed']]
    return done.pivot_table(index='d', columns=['lam', 'zeta'], values='kinks')
