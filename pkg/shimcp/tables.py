"""
Plot-ready tabular output: result records, "mean (sd)" summaries, path dumps and rule tables.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import json
import logging
import sys
from contextlib import nullcontext

import numpy as np
import pandas as pd

from .errors import ConfigError

log = logging.getLogger(__name__)

EMIT_FORMATS = ('csv', 'jsonl')


def mean_sd(values, digits=2):
    """"1.76 (0.05)" from a sequence; the sd is the sample standard deviation."""
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if not values.size:
        return 'nan'
    sd = values.std(ddof=1) if values.size > 1 else 0.0
    return f'{values.mean():.{digits}f} ({sd:.{digits}f})'


def summarize(records, by='method', **kwargs):
    """
    Collapse benchmark records into one "mean (sd)" row per method.

    Methods keep their first-seen order.
    """
    params = {
        "metrics" : (('length', 'length'), ('coverage', 'cov'), ('r2', 'r2')),
        "digits" : 2
        }
    params.update(**kwargs)
    rows = []
    for key, group in records.groupby(by, sort=False):
        row = {by: key}
        for column, label in params['metrics']:
            row[label] = mean_sd(group[column], params['digits'])
        rows.append(row)
    return pd.DataFrame(rows)


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


def _opened(path):
    if path == '-':
        return nullcontext(sys.stdout)
    return open(path, 'w', encoding='utf-8', newline='\n')


def write_records(records, path, emit='csv'):
    """
    Write a list of flat dictionaries as CSV (nested values JSON-encoded) or one JSON object per line.
    """
    if emit not in EMIT_FORMATS:
        raise ConfigError(f'emit must be one of {EMIT_FORMATS}, got {emit!r}')
    records = [{k: _jsonable(v) for k, v in r.items()} for r in records]
    if emit == 'jsonl':
        with _opened(path) as f:
            for record in records:
                f.write(json.dumps(record) + '\n')
    else:
        frame = pd.DataFrame([{k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()}
                              for r in records])
        frame.to_csv(sys.stdout if path == '-' else path, index=False, encoding='utf-8', lineterminator='\n')
    log.debug('wrote %d records to %s', len(records), path)
    return path


def write_frame(frame, path, emit='csv'):
    if emit == 'jsonl':
        return write_records(frame.to_dict('records'), path, 'jsonl')
    frame.to_csv(sys.stdout if path == '-' else path, index=False, encoding='utf-8', lineterminator='\n')
    return path


def flatten_pivot(table):
    """A pivot table as a flat frame: index levels become columns, column levels join as key=value."""
    table = table.copy()
    if table.columns.nlevels > 1:
        names = table.columns.names
        table.columns = [' '.join(f'{n}={v}' for n, v in zip(names, key)) for key in table.columns]
    else:
        table.columns = [f'{table.columns.name}={v}' if table.columns.name else str(v) for v in table.columns]
    return table.reset_index()


def write_path_jsonl(taupath, path):
    """One JSON object per kink; floats keep their full repr."""
    return write_records(taupath.to_records(), path, 'jsonl')


def path_frame(taupath):
    """Kink table of a tau-path with the fitted test-point value at each kink."""
    rows = []
    for kink in taupath.kinks:
        rows.append({
            'tau': kink.tau,
            'event': kink.event.value,
            'pattern': str(kink.pattern) if kink.pattern is not None else '',
            'active': len(kink.patterns),
            'prediction': kink.tau - kink.residual[-1],
            'test_residual': kink.residual[-1],
            'coalesced': len(kink.coalesced),
            })
    return pd.DataFrame(rows)


def rules_frame(state, names=None):
    return pd.DataFrame(state.rules(names), columns=['rule', 'coef'])
