"""
Tabular ingestion: CSV files binarized by a JSON schema into named 0/1 features.

Schema layout::

    {
        "response": "score",
        "columns": {
            "sex": {"onehot": ["male"]},
            "age": {"thresholds": ["18-20", "21-22", ">45"]},
            "juvenile-felonies": {"thresholds": [">0"]},
            "flag": "binary"
        }
    }

Threshold rules are `=k`, `>k`, `>=k`, `<k`, `<=k` or an inclusive range `a-b`.
Every rule becomes one feature named `column:rule`; one-hot levels become
`column:level`. Columns the schema does not mention must already be binary and
keep their own name. Rows count from 1 after the header in error messages.
"""

__author__ = "shimcp developers"
__version__ = 0.1

import json
import logging
import re
from os.path import getsize

import numpy as np
import pandas as pd
from psutil import virtual_memory

from .datagen import Dataset
from .errors import DataError, SchemaError, SizeError

log = logging.getLogger(__name__)

_RULE = re.compile(r'^\s*(?:(?P<op>>=|<=|=|>|<)\s*(?P<x>-?\d+(?:\.\d+)?)|(?P<a>-?\d+(?:\.\d+)?)\s*-\s*(?P<b>-?\d+(?:\.\d+)?))\s*$')


def load_schema(path):
    with open(path, encoding='utf-8') as f:
        try:
            schema = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f'schema {path} is not valid JSON: {e}') from e
    return _check_schema(schema)


def _check_schema(schema):
    if schema is None:
        schema = {}
    if not isinstance(schema, dict):
        raise DataError('schema must be a mapping')
    columns = schema.get('columns', {})
    for column, rule in columns.items():
        if rule == 'binary':
            continue
        if not isinstance(rule, dict) or len(rule) != 1 or not set(rule) & {'thresholds', 'onehot'}:
            raise SchemaError(f'unknown rule {rule!r}', column=column)
        if 'thresholds' in rule:
            for r in rule['thresholds']:
                if not _RULE.match(str(r)):
                    raise SchemaError(f'cannot parse threshold {r!r}', column=column)
    return {'response': schema.get('response', 'y'), 'columns': dict(columns)}


def threshold_mask(values, rule):
    """Indicator of `values` satisfying one threshold rule."""
    match = _RULE.match(str(rule))
    if match is None:
        raise SchemaError(f'cannot parse threshold {rule!r}')
    if match['op'] is None:
        return (values >= float(match['a'])) & (values <= float(match['b']))
    x = float(match['x'])
    return {
        '=': values == x,
        '>': values > x,
        '>=': values >= x,
        '<': values < x,
        '<=': values <= x,
    }[match['op']]


def _numeric(frame, column):
    values = pd.to_numeric(frame[column], errors='coerce')
    bad = values.isna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise SchemaError(f'non-numeric value {frame[column].iloc[row]!r}', row=row + 1, column=column)
    return values.to_numpy(dtype=float)


def load_csv(path, schema=None):
    """
    Read a CSV into a Dataset of binary features.

    Parameters
    ----------
    path : str
        UTF-8 CSV with a header row.
    schema : dict or str, optional
        Schema mapping, or the path to a JSON schema file.

    Returns
    -------
    Dataset
    """
    if getsize(path) > virtual_memory().available:
        raise SizeError(f'{path} is larger than the available memory')
    if isinstance(schema, str):
        schema = load_schema(schema)
    else:
        schema = _check_schema(schema)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise DataError(f'{path} is empty') from None
    except pd.errors.ParserError as e:
        raise DataError(f'{path} is not a well-formed CSV: {e}') from None
    except UnicodeDecodeError as e:
        raise DataError(f'{path} is not UTF-8 text ({e.reason} at byte {e.start})') from None
    response = schema['response']
    if response not in frame.columns:
        raise DataError(f'response column {response!r} missing from {path}')
    for column in frame.columns:
        empty = frame[column].str.strip() == ''
        if empty.any():
            raise SchemaError('missing value', row=int(np.flatnonzero(empty.to_numpy())[0]) + 1, column=column)
    for column in schema['columns']:
        if column not in frame.columns:
            raise DataError(f'schema column {column!r} missing from {path}')

    names, features = [], []
    for column in frame.columns:
        if column == response:
            continue
        rule = schema['columns'].get(column, 'binary')
        if rule == 'binary':
            values = _numeric(frame, column)
            off = ~np.isin(values, (0.0, 1.0))
            if off.any():
                row = int(np.flatnonzero(off)[0])
                raise SchemaError(f'non-binary value {frame[column].iloc[row]!r} without a rule',
                                  row=row + 1, column=column)
            names.append(column)
            features.append(values)
        elif 'thresholds' in rule:
            values = _numeric(frame, column)
            for r in rule['thresholds']:
                names.append(f'{column}:{r}')
                features.append(threshold_mask(values, r).astype(float))
        else:
            levels = frame[column].str.strip()
            for level in rule['onehot']:
                names.append(f'{column}:{level}')
                features.append((levels == str(level)).to_numpy(dtype=float))
    if not features:
        raise DataError(f'{path} has no covariate columns')
    y = _numeric(frame, response)
    log.info('loaded %s: %d rows, %d binary features', path, len(y), len(names))
    return Dataset(np.column_stack(features), y, names, {'source': str(path), 'schema': schema})


def save_csv(dataset, path, response='y'):
    """Write a dataset with one column per feature (integers when binary) and the response last."""
    frame = pd.DataFrame(dataset.Z, columns=list(dataset.feature_names))
    if np.all((dataset.Z == 0) | (dataset.Z == 1)):
        frame = frame.astype(int)
    frame[response] = dataset.y
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
    log.debug('wrote %d rows to %s', dataset.n, path)
    return path
