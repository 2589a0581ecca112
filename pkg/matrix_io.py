"""
Matrix input and output component.

Reads dense real matrices from Matrix Market (array or coordinate, real or integer field) and headerless CSV
    files, and writes generated instances back in either format.
"""

import logging
import os
import re

import numpy as np
import pandas as pd
import scipy.io
import scipy.sparse

from matrix_core import as_dense_matrix
from search_types import InputError, MatrixFormat

logger = logging.getLogger(__name__)

SUPPORTED_FIELDS = ('real', 'integer')


def _data_lines(path):
    """Yields (1-based line number, tokens) for the data lines of a Matrix Market file, size line included."""

    with open(path) as f:
        for number, line in enumerate(f, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith('%'):
                yield number, stripped.split()


def _locate_bad_token(path, expected_tokens):
    lines = _data_lines(path)
    next(lines, None)
    for number, tokens in lines:
        if len(tokens) != expected_tokens:
            return number, None, 'expected {} value(s), found {}'.format(expected_tokens, len(tokens))
        for column, token in enumerate(tokens, start=1):
            try:
                float(token)
            except ValueError:
                return number, column, 'cannot parse "{}" as a number'.format(token)
    return None, None, None


def _duplicate_line(path, row, col):
    lines = _data_lines(path)
    next(lines, None)
    seen = 0
    for number, tokens in lines:
        if len(tokens) >= 2 and int(tokens[0]) == row + 1 and int(tokens[1]) == col + 1:
            seen += 1
            if seen == 2:
                return number
    return None


def _load_matrix_market(path):
    try:
        _, _, _, representation, field, _ = scipy.io.mminfo(path)
    except (ValueError, OSError, IndexError) as e:
        raise InputError('{} is not a Matrix Market file: {}'.format(path, e), line=1)

    if field not in SUPPORTED_FIELDS:
        raise InputError('unsupported Matrix Market field "{}"; only real matrices are accepted'.format(field),
                         line=1)

    try:
        data = scipy.io.mmread(path)
    except (ValueError, IndexError, TypeError, RuntimeError) as e:
        line, column, reason = _locate_bad_token(path, 3 if representation == 'coordinate' else 1)
        raise InputError('cannot read {}: {}'.format(path, reason or e), line=line, column=column)

    if representation == 'coordinate':
        coo = scipy.sparse.coo_matrix(data)
        flat = coo.row.astype(np.int64) * coo.shape[1] + coo.col
        unique, counts = np.unique(flat, return_counts=True)
        if np.any(counts > 1):
            row, col = divmod(int(unique[np.argmax(counts > 1)]), coo.shape[1])
            raise InputError('duplicate coordinate entry ({}, {})'.format(row + 1, col + 1),
                             line=_duplicate_line(path, row, col))
        return coo.toarray()
    return np.asarray(data)


def _load_csv(path):
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise InputError('{} contains no data'.format(path), line=1)
    except pd.errors.ParserError as e:
        match = re.search(r'line (\d+)', str(e))
        raise InputError('cannot parse {}: {}'.format(path, e), line=int(match.group(1)) if match else None)

    values = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        row, column = bad[0]
        token = frame.iat[row, column]
        reason = 'missing value' if token is None or token != token or token == '' \
            else 'cannot parse "{}" as a finite number'.format(token)
        raise InputError(reason, line=int(row) + 1, column=int(column) + 1)
    return values


def load_matrix(path, fmt=None):
    """Loads a dense real matrix.

    :param path: path to the matrix file.
    :param fmt: MatrixFormat or its value; guessed from the extension when omitted.
    :return: float64 numpy array.
    """

    fmt = MatrixFormat(fmt) if fmt is not None else MatrixFormat.from_path(path)
    if not os.path.isfile(path):
        raise InputError('matrix file {} does not exist'.format(path))

    A = _load_matrix_market(path) if fmt == MatrixFormat.MATRIX_MARKET else _load_csv(path)
    A = as_dense_matrix(A)
    logger.info('loaded %dx%d matrix from %s', A.shape[0], A.shape[1], path)
    return A


def save_matrix(path, A, fmt=None):
    """Writes a dense matrix as a Matrix Market array or as CSV with round-trip precision."""

    fmt = MatrixFormat(fmt) if fmt is not None else MatrixFormat.from_path(path)
    A = as_dense_matrix(A)
    if fmt == MatrixFormat.MATRIX_MARKET:
        # mmwrite appends .mtx to string paths, so hand it an open file.
        with open(path, 'wb') as f:
            scipy.io.mmwrite(f, A, field='real', precision=17, symmetry='general')
    else:
        np.savetxt(path, A, delimiter=',', fmt='%.17g')
    logger.info('wrote %dx%d matrix to %s', A.shape[0], A.shape[1], path)
