"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   L_{r,s} matrix norm family: the l_s norm of the vector of per-column l_r     ║
║   norms. Provides the norm itself, a deterministic subgradient, and the dual   ║
║   exponent map. Every regularizer in the toolkit is computed through here.     ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import math
import logging
from typing import Union

import numpy as np

from lib.exceptions import DomainError, ShapeError

logger = logging.getLogger(__name__)

# Infinity is carried as IEEE infinity and always dispatched to an exact
# max-based branch, never raised to a power.
INFINITY = math.inf

NormOrder = Union[float, int, str]

_INFINITY_NAMES = {'inf', 'infinity', '+inf', 'oo'}


def parse_order(order):
    """
    Normalize a norm order to a float, mapping 'inf'/'infinity' to math.inf

    Args:
        order: Number >= 1 or one of the infinity spellings

    Returns:
        float: The normalized order
    """
    if isinstance(order, str):
        text = order.strip().lower()
        if text in _INFINITY_NAMES:
            return INFINITY
        try:
            order = float(text)
        except ValueError:
            raise DomainError(f"Invalid norm order: {order!r}")
    order = float(order)
    if math.isnan(order) or order < 1:
        raise DomainError(f"Norm order must be >= 1, got {order}")
    return order


def format_order(order):
    """Render an order for JSON/CSV output ('inf' for infinity)"""
    order = parse_order(order)
    return 'inf' if math.isinf(order) else order


def dual_exponent(r):
    """
    Return s with 1/r + 1/s = 1

    Args:
        r: Norm order >= 1

    Returns:
        float: The dual order (infinity for r=1, 1 for r=infinity)
    """
    r = parse_order(r)
    if r == 1:
        return INFINITY
    if math.isinf(r):
        return 1.0
    return r / (r - 1.0)


def as_matrix(A, name='matrix'):
    """Coerce to a finite 2-D float array; 1-D input becomes a column"""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def column_norms(A, r):
    """l_r norm of every column of A"""
    return np.linalg.norm(as_matrix(A), ord=parse_order(r), axis=0)


def row_norms(X, r):
    """l_r norm of every row of X"""
    return np.linalg.norm(as_matrix(X), ord=parse_order(r), axis=1)


def lrs_norm(A, r, s):
    """
    Compute the L_{r,s} norm of a matrix

    Args:
        A: m x n matrix (1-D input is treated as an m x 1 column)
        r: Order applied down each column
        s: Order applied across the column norms

    Returns:
        float: (sum_j (sum_i |a_ij|^r)^(s/r))^(1/s)
    """
    A = as_matrix(A)
    cols = np.linalg.norm(A, ord=parse_order(r), axis=0)
    return float(np.linalg.norm(cols, ord=parse_order(s)))


def _outer_weights(cols, total, s):
    # Minimum-norm element of the subdifferential of ||.||_s at cols >= 0.
    if s == 1:
        return (cols > 0).astype(float)
    if math.isinf(s):
        active = cols == cols.max()
        return active / active.sum()
    return (cols / total) ** (s - 1.0)


def _inner_directions(A, cols, r):
    # Minimum-norm element of the subdifferential of ||.||_r for each column.
    signs = np.sign(A)
    if r == 1:
        return signs
    absA = np.abs(A)
    if math.isinf(r):
        active = (absA == cols) & (cols > 0)
        counts = np.maximum(active.sum(axis=0), 1)
        return signs * active / counts
    ratio = np.divide(absA, cols, out=np.zeros_like(absA), where=cols > 0)
    return signs * ratio ** (r - 1.0)


def lrs_subgradient(A, r, s):
    """
    Subgradient of the L_{r,s} norm

    At kinks the minimum-norm element of the subdifferential is returned, so
    zero entries (r=1) and zero columns contribute nothing and the zero matrix
    maps to the zero matrix. Ties in the infinity branches are split evenly.

    Args:
        A: m x n matrix
        r: Column order
        s: Aggregation order

    Returns:
        np.ndarray: G with the shape of A and <G, A> = lrs_norm(A, r, s)
    """
    A = as_matrix(A)
    r = parse_order(r)
    s = parse_order(s)
    cols = np.linalg.norm(A, ord=r, axis=0)
    total = float(np.linalg.norm(cols, ord=s))
    if total == 0.0:
        return np.zeros_like(A)
    weights = _outer_weights(cols, total, s)
    return _inner_directions(A, cols, r) * weights
