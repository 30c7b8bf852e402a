"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Dataset CSV import/export. Header: x1..xp, y1..yK, outlier. Floats are       ║
║   written with 17 significant digits so values round-trip exactly.             ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import re
import logging

import numpy as np
import pandas as pd

from lib.data.datasets import DATASET_TYPES, is_one_hot
from lib.exceptions import DatasetFormatError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'

_COLUMN_PATTERN = re.compile(r'^([xy])(\d+)$')
_PARSER_LINE = re.compile(r'line (\d+)')


def dataset_columns(p, K):
    """Column names in file order"""
    return [f"x{i + 1}" for i in range(p)] + [f"y{k + 1}" for k in range(K)] + ['outlier']


def write_dataset_csv(dataset, path):
    """
    Write a dataset to CSV

    Args:
        dataset: RegressionDataset or ClassificationDataset
        path: Output file path

    Returns:
        str: The path written
    """
    df = pd.DataFrame(
        np.column_stack([dataset.X, dataset.Y]),
        columns=dataset_columns(dataset.p, dataset.K)[:-1],
    )
    df['outlier'] = dataset.outlier_mask.astype(int)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {dataset.N} samples to {path}")
    return path


def _check_header(columns):
    # Returns (p, K) or raises naming the first offending column.
    xs, ys = [], []
    for name in columns:
        if name == 'outlier':
            continue
        match = _COLUMN_PATTERN.match(name)
        if not match:
            raise DatasetFormatError(f"unexpected column '{name}'", line=1)
        (xs if match.group(1) == 'x' else ys).append(int(match.group(2)))
    if 'outlier' not in columns:
        raise DatasetFormatError("missing column 'outlier'", line=1)
    if not xs:
        raise DatasetFormatError("missing column 'x1'", line=1)
    if not ys:
        raise DatasetFormatError("missing column 'y1'", line=1)
    p, K = max(xs), max(ys)
    expected = dataset_columns(p, K)
    for name in expected:
        if name not in columns:
            raise DatasetFormatError(f"missing column '{name}'", line=1)
    if list(columns) != expected:
        raise DatasetFormatError(f"columns must appear in the order {','.join(expected)}", line=1)
    return p, K


def _parse_column(df, name):
    raw = df[name].to_numpy()
    try:
        values = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        values = None
    if values is not None and np.all(np.isfinite(values)):
        return values
    # Locate the first offending row for the diagnostic.
    for row, cell in enumerate(raw):
        try:
            number = float(cell)
        except (TypeError, ValueError):
            number = float('nan')
        if not np.isfinite(number):
            raise DatasetFormatError(f"column '{name}': invalid value {cell!r}", line=row + 2)
    raise DatasetFormatError(f"column '{name}': invalid values")


def read_dataset_csv(path, family=None):
    """
    Read a dataset CSV

    Args:
        path: Input file path
        family: 'MLR' or 'MLG'; inferred from the responses when omitted
            (one-hot responses mean classification)

    Returns:
        Dataset: RegressionDataset or ClassificationDataset
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DatasetFormatError("file is empty", line=1)
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        raise DatasetFormatError(f"malformed row ({e})", line=int(match.group(1)) if match else None)

    p, K = _check_header(list(df.columns))
    if df.empty:
        raise DatasetFormatError("no data rows", line=2)
    X = np.column_stack([_parse_column(df, f"x{i + 1}") for i in range(p)])
    Y = np.column_stack([_parse_column(df, f"y{k + 1}") for k in range(K)])
    outlier = _parse_column(df, 'outlier')
    bad = np.flatnonzero((outlier != 0.0) & (outlier != 1.0))
    if bad.size:
        raise DatasetFormatError(f"column 'outlier' must be 0 or 1, got {df['outlier'].iloc[bad[0]]!r}",
                                 line=int(bad[0]) + 2)

    if family is None:
        family = 'MLG' if is_one_hot(Y) else 'MLR'
    if family not in DATASET_TYPES:
        raise DatasetFormatError(f"unknown dataset family '{family}'")
    if family == 'MLG' and not is_one_hot(Y):
        rows = np.flatnonzero(~(np.all((Y == 0) | (Y == 1), axis=1) & (Y.sum(axis=1) == 1)))
        raise DatasetFormatError("classification responses must be one-hot", line=int(rows[0]) + 2)

    logger.info(f"Read {len(df)} samples (p={p}, K={K}, family={family}) from {path}")
    return DATASET_TYPES[family](X, Y, outlier.astype(bool))
