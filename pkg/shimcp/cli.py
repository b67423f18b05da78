"""
Command-line front end.

    shimcp generate --n 150 --m 10 --zeta 0.4 --seed 1 -o train.csv
    shimcp conformal --data train.csv --test test.csv --lam 1 --d 3 --alpha 0.1
    shimcp audit --n 20 --m 5 --d 2 --trials 25

Exit status: 0 ok, 2 configuration error, 3 data error, 4 numeric failure
(singular system, iteration or time budget), 5 audit mismatch.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import argparse
import json
import logging
import sys

import numpy as np
from joblib import Parallel, delayed

from . import presets
from .conformal import conformal_batch, evaluate, full_cp, split_batch
from .datagen import SyntheticSpec, generate, select_lambda
from .errors import ConfigError, DataError, NumericError, ShimError, SingularityError, SizeError
from .experiments import kink_table, pruning_table, run_dataset, run_paths, run_synthetic
from .helpers import resolve_workers
from .oracle import expand, grid_conformal, membership_mismatches
from .parsers import load_csv, save_csv
from .patterns import CovariateMatrix
from .solver import FitConfig, ModelState, augmented_response, certify_kkt, fit
from .tables import flatten_pivot, rules_frame, write_frame, write_records
from .taupath import compute_tau_path, path_differences

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_AUDIT = 0, 2, 3, 4, 5

MODELS = {
    'fifth': presets.FIFTH_ORDER,
    'strong': presets.STRONG,
    'weak': presets.WEAK,
    'none': (),
    }


def _orders(text):
    out = []
    for part in text.split(','):
        part = part.strip().lower()
        out.append(None if part in ('none', 'all') else int(part))
    return tuple(out)


def _floats(text):
    return tuple(float(x) for x in text.split(','))


def build_parser():
    parser = argparse.ArgumentParser(prog='shimcp', description='Exact full conformal prediction for sparse '
                                     'high-order interaction models.')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='count', default=0)
    sub = parser.add_subparsers(dest='command', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-o', '--out', default='-', help='output file; - for stdout')
    common.add_argument('--emit', choices=('csv', 'jsonl'), default='csv')
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--workers', type=int, default=None,
                        help='worker processes; defaults to SHIMCP_WORKERS, then the physical core count')

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument('--lam', type=float, default=None, help='lambda; chosen by 5-fold CV when omitted')
    model.add_argument('--l2', type=float, default=0.0, help='elastic-net l2 weight')
    model.add_argument('--d', type=int, default=None, help='maximum interaction order (unbounded by default)')
    model.add_argument('--no-prune', action='store_true', help='visit every node in the pattern searches')
    model.add_argument('--max-iterations', type=int, default=200)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument('--data', required=True, help='training CSV')
    data.add_argument('--schema', default=None, help='JSON binarization schema')

    p = sub.add_parser('generate', parents=[common], help='draw a synthetic dataset')
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--zeta', type=float, default=0.4)
    p.add_argument('--sigma', type=float, default=1.0)
    p.add_argument('--model', choices=sorted(MODELS), default='fifth')

    p = sub.add_parser('fit', parents=[common, model, data], help='fit once and list the active rules')

    for name, help_ in (('conformal', 'exact full-CP sets for test points'), ('split', 'split-CP intervals')):
        p = sub.add_parser(name, parents=[common, model, data], help=help_)
        p.add_argument('--alpha', type=float, required=True)
        p.add_argument('--test', default=None, help='test CSV; otherwise rows are held out of --data')
        p.add_argument('--test-fraction', type=float, default=0.25)
        p.add_argument('--points', type=int, default=None, help='use only the first N test points')
        p.add_argument('--report', default=None, help='write the aggregate report as JSON here')
        if name == 'conformal':
            p.add_argument('--range', type=float, nargs=2, default=None, metavar=('Y_MIN', 'Y_MAX'))
            p.add_argument('--time-budget', type=float, default=None, help='seconds per tau-path')
        else:
            p.add_argument('--fraction', type=float, default=0.5, help='share of training rows used for fitting')

    p = sub.add_parser('benchmark', parents=[common], help='method comparison or pruning tables')
    p.add_argument('--protocol', choices=sorted(presets.PROTOCOLS), default='low-dim')
    p.add_argument('--data', default=None, help='CSV for the compas protocol')
    p.add_argument('--schema', default=None)
    p.add_argument('--records', default=None, help='also write per-replicate records here')
    for flag, kind in (('--n', int), ('--m', int), ('--n-test', int), ('--datasets', int), ('--repeats', int),
                       ('--split-repeats', int), ('--selection-datasets', int), ('--lam', float),
                       ('--alpha', float), ('--zeta', float), ('--time-budget', float)):
        p.add_argument(flag, type=kind, default=None)
    p.add_argument('--l2', type=float, default=None, dest='l2_weight')
    p.add_argument('--orders', type=_orders, default=None, help='comma-separated, e.g. 2,3 or none')

    p = sub.add_parser('audit', parents=[common], help='compare against brute-force references')
    p.add_argument('--n', type=int, default=20)
    p.add_argument('--m', type=int, default=5)
    p.add_argument('--d', type=int, default=2)
    p.add_argument('--zeta', type=float, default=0.5)
    p.add_argument('--lam', type=float, default=1.0)
    p.add_argument('--l2', type=float, default=0.0)
    p.add_argument('--alpha', type=float, default=0.1)
    p.add_argument('--trials', type=int, default=25)
    p.add_argument('--grid', type=int, default=2000)

    p = sub.add_parser('kinks', parents=[common], help='kink counts and node fractions per (lambda, zeta, d)')
    p.add_argument('--n', type=int, default=100)
    p.add_argument('--m', type=int, default=30)
    p.add_argument('--lams', type=_floats, default=(1.0, 10.0))
    p.add_argument('--zetas', type=_floats, default=(0.4, 0.7, 0.9))
    p.add_argument('--l2', type=float, default=0.0)
    p.add_argument('--orders', type=_orders, default=(2, 3, 4, 5))
    p.add_argument('--no-prune', action='store_true')
    p.add_argument('--time-budget', type=float, default=None)
    return parser


def _config(args, lam):
    if args.lam is None and lam is None:
        raise ConfigError('no lambda given')
    return FitConfig(lam=lam if args.lam is None else args.lam, l2_weight=args.l2, max_order=args.d,
                     prune=not args.no_prune, max_iterations=args.max_iterations)


def _choose_lam(args, dataset):
    if args.lam is not None:
        return args.lam
    template = FitConfig(lam=1.0, l2_weight=args.l2, max_order=args.d, prune=not args.no_prune)
    lam, _ = select_lambda(dataset, 5, template, seed=args.seed, n_jobs=args.workers)
    return lam


def _train_test(args):
    dataset = load_csv(args.data, args.schema)
    if args.test is not None:
        test = load_csv(args.test, args.schema)
        if test.feature_names != dataset.feature_names:
            raise DataError(f'{args.test} does not have the features of {args.data}')
        train = dataset
    else:
        train, test = dataset.split(1 - args.test_fraction, seed=args.seed)
    if args.points is not None:
        test = test.subset(np.arange(min(args.points, test.n)))
    return train, test


def _planted(terms, m):
    """Terms of a planted model that only involve the first m covariates."""
    return tuple((p, c) for p, c in terms if p.items[-1] <= m)


def cmd_generate(args):
    spec = SyntheticSpec(args.n, args.m, args.zeta, _planted(MODELS[args.model], args.m), args.sigma, args.seed)
    save_csv(generate(spec), sys.stdout if args.out == '-' else args.out)
    return EXIT_OK


def cmd_fit(args):
    dataset = load_csv(args.data, args.schema)
    cfg = _config(args, _choose_lam(args, dataset))
    state = fit(CovariateMatrix.labeled(dataset.Z), dataset.y, cfg)
    log.info('lam=%.6g: %d active rules, objective %.6g', cfg.lam, len(state), state.objective)
    write_frame(rules_frame(state, dataset.feature_names), args.out, args.emit)
    return EXIT_OK


def _emit_report(args, report, extra):
    record = report.to_record()|extra
    log.info('report: %s', record)
    if args.report:
        with open(args.report, 'w', encoding='utf-8') as f:
            json.dump(record, f, indent=2)


def cmd_conformal(args):
    train, test = _train_test(args)
    cfg = _config(args, _choose_lam(args, train))
    results = conformal_batch(train.Z, train.y, test.Z, cfg, args.alpha, y_test=test.y,
                              range=tuple(args.range) if args.range else None, n_jobs=args.workers,
                              time_budget=args.time_budget)
    write_records([r.to_record() for r in results], args.out, args.emit)
    _emit_report(args, evaluate(results), {'lam': cfg.lam, 'alpha': args.alpha, 'method': 'full'})
    return EXIT_OK


def cmd_split(args):
    train, test = _train_test(args)
    fitting, calibration = train.split(args.fraction, seed=args.seed)
    cfg = _config(args, _choose_lam(args, fitting))
    results = split_batch(fitting.Z, fitting.y, calibration.Z, calibration.y, test.Z, cfg, args.alpha,
                          y_test=test.y)
    write_records([r.to_record() for r in results], args.out, args.emit)
    _emit_report(args, evaluate(results), {'lam': cfg.lam, 'alpha': args.alpha, 'method': 'split'})
    return EXIT_OK


def cmd_benchmark(args):
    keys = ('n', 'm', 'n_test', 'datasets', 'repeats', 'split_repeats', 'selection_datasets', 'lam', 'alpha',
            'zeta', 'time_budget', 'orders', 'l2_weight')
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    overrides['seed'] = args.seed
    if args.protocol == 'table4':
        if 'zeta' in overrides:
            overrides['zetas'] = (overrides.pop('zeta'),)
        for unused in ('n_test', 'datasets', 'repeats', 'split_repeats', 'selection_datasets', 'lam', 'alpha'):
            overrides.pop(unused, None)
        frame = run_paths('table4', **overrides)
        table = flatten_pivot(pruning_table(frame)).rename(columns={'search_space': 'nodes_total'})
        log.info('pruning table:\n%s', table)
        if args.records:
            write_frame(frame, args.records, args.emit)
        write_frame(table, args.out, args.emit)
        return EXIT_OK
    if args.protocol == 'compas':
        if args.data is None:
            raise ConfigError('the compas protocol needs --data (and usually --schema)')
        for unused in ('n', 'm', 'datasets', 'selection_datasets', 'zeta'):
            overrides.pop(unused, None)
        records, summary = run_dataset(load_csv(args.data, args.schema), 'compas', n_jobs=args.workers,
                                       **overrides)
    else:
        records, summary = run_synthetic(args.protocol, n_jobs=args.workers, **overrides)
    if args.records:
        write_frame(records, args.records, args.emit)
    write_frame(summary, args.out, args.emit)
    return EXIT_OK


def audit_trial(n, m, d, zeta, lam, l2_weight, alpha, grid_size, seed):
    """
    One random instance checked three ways: pruned against unpruned paths, optimality
    at every kink, and the exact conformal set against the dense grid oracle.
    """
    data = generate(SyntheticSpec(n + 1, m, zeta, _planted(presets.FIFTH_ORDER, m), 1.0, seed))
    Z = CovariateMatrix(data.Z)
    y = data.y[:-1]
    cfg = FitConfig(lam=lam, l2_weight=l2_weight, max_order=d)
    record = {'seed': seed, 'status': 'ok', 'kinks': 0, 'problems': []}
    try:
        pruned = compute_tau_path(Z, y, cfg=cfg, prune=True)
        full = compute_tau_path(Z, y, cfg=cfg, prune=False)
    except SingularityError as e:
        record['status'] = 'skipped'
        record['problems'].append(str(e))
        return record
    record['kinks'] = pruned.kink_count
    problems = path_differences(pruned, full)
    check = cfg.replace(kkt_tol=1e-7)
    for t, kink in enumerate(pruned.kinks):
        signs = np.where(np.abs(kink.coef) > 1e-9, np.sign(kink.coef), kink.signs)
        state = ModelState.build(Z, augmented_response(y, kink.tau), kink.patterns, kink.coef, cfg, signs=signs,
                                 columns=kink.columns)
        report = certify_kkt(state, Z, check)
        if not report.passed:
            off = max(report.max_active_deviation, report.max_inactive - lam)
            problems.append(f'kink {t}: optimality off by {off:.3g}')
    exact = full_cp(pruned, alpha)
    approx = grid_conformal(expand(data.Z[:-1], d), y, data.Z[-1], cfg, alpha, grid_size, pruned.range, n_jobs=1)
    bad = membership_mismatches(exact, approx, grid_size)
    if bad.size:
        problems.append(f'{bad.size} grid points disagree with the exact set, first at tau={bad[0]:.6g}')
    record['problems'] = problems
    if problems:
        record['status'] = 'mismatch'
    return record


def cmd_audit(args):
    records = Parallel(n_jobs=resolve_workers(args.workers))(
        delayed(audit_trial)(args.n, args.m, args.d, args.zeta, args.lam, args.l2, args.alpha, args.grid,
                             args.seed + t)
        for t in range(args.trials))
    for t, record in enumerate(records):
        record['trial'] = t
        for problem in record['problems']:
            log.warning('trial %d: %s', t, problem)
    write_records(records, args.out, args.emit)
    failed = sum(r['status'] == 'mismatch' for r in records)
    skipped = sum(r['status'] == 'skipped' for r in records)
    log.info('audit: %d trials, %d mismatched, %d skipped', len(records), failed, skipped)
    return EXIT_AUDIT if failed else EXIT_OK


def cmd_kinks(args):
    prune = (False,) if args.no_prune else (True,)
    frame = run_paths('table4', n=args.n, m=args.m, lams=args.lams, zetas=args.zetas, orders=args.orders,
                      prune=prune, l2_weight=args.l2, seed=args.seed, time_budget=args.time_budget)
    if not args.no_prune:
        log.info('kinks:\n%s', kink_table(frame))
    write_frame(frame, args.out, args.emit)
    return EXIT_OK


COMMANDS = {
    'generate': cmd_generate,
    'fit': cmd_fit,
    'conformal': cmd_conformal,
    'split': cmd_split,
    'benchmark': cmd_benchmark,
    'audit': cmd_audit,
    'kinks': cmd_kinks,
    }


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose + 10 * args.quiet
    logging.basicConfig(level=max(logging.DEBUG, level), format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        log.error('%s', e)
        return EXIT_CONFIG
    except (DataError, SizeError, FileNotFoundError) as e:
        log.error('%s', e)
        return EXIT_DATA
    except NumericError as e:
        log.error('%s', e)
        return EXIT_NUMERIC
    except ShimError as e:
        log.error('%s', e)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
