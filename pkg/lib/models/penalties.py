"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Regularizer norms of the relaxed robust problems, written through the        ║
║   L_{r,s} matrix norm, together with their subgradients mapped back to the     ║
║   coefficient matrix B.                                                        ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging

import numpy as np

from lib.exceptions import DomainError
from lib.norms import as_matrix, dual_exponent, lrs_norm, lrs_subgradient, parse_order

logger = logging.getLogger(__name__)

VARIANTS = ('SR', '1S')


def normalize_variant(variant):
    variant = str(variant).upper()
    if variant not in VARIANTS:
        raise DomainError(f"Unknown relaxation variant '{variant}', expected one of {VARIANTS}")
    return variant


def augmented_matrix(B):
    """
    K x (p+K) matrix whose i-th row is (-B_1i, ..., -B_pi, e_i)

    Args:
        B: p x K coefficient matrix

    Returns:
        np.ndarray: [-B' | I_K]
    """
    B = as_matrix(B, 'B')
    return np.hstack([-B.T, np.eye(B.shape[1])])


def mlr_penalty_norm(B, r, variant):
    """
    Norm part of the regression regularizer (without the eps * L factor)

    SR uses ||B~'||_{s,r}; 1S uses ||B~||_{1,s}, with s dual to r.
    """
    variant = normalize_variant(variant)
    s = dual_exponent(r)
    augmented = augmented_matrix(B)
    if variant == 'SR':
        return lrs_norm(augmented.T, s, r)
    return lrs_norm(augmented, 1, s)


def mlr_penalty_subgradient(B, r, variant):
    """Subgradient of mlr_penalty_norm with respect to B (the identity block drops out)"""
    variant = normalize_variant(variant)
    s = dual_exponent(r)
    augmented = augmented_matrix(B)
    p = augmented.shape[1] - augmented.shape[0]
    if variant == 'SR':
        G = lrs_subgradient(augmented.T, s, r)
        return -G[:p, :]
    G = lrs_subgradient(augmented, 1, s)
    return -G[:, :p].T


def mlg_penalty_norm(B, r, variant):
    """
    Norm part of the classification regularizer (without eps)

    SR: K^(1/s) ||B||_{s,r} + ||B||_{s,1}
    1S: K^(1/s) ||B'||_{1,s} + ||B||_{s,1}
    """
    variant = normalize_variant(variant)
    B = as_matrix(B, 'B')
    s = dual_exponent(r)
    scale = B.shape[1] ** (1.0 / s)
    label_term = lrs_norm(B, s, 1)
    if variant == 'SR':
        return scale * lrs_norm(B, s, r) + label_term
    return scale * lrs_norm(B.T, 1, s) + label_term


def mlg_penalty_subgradient(B, r, variant):
    """Subgradient of mlg_penalty_norm with respect to B"""
    variant = normalize_variant(variant)
    B = as_matrix(B, 'B')
    r = parse_order(r)
    s = dual_exponent(r)
    scale = B.shape[1] ** (1.0 / s)
    label_term = lrs_subgradient(B, s, 1)
    if variant == 'SR':
        return scale * lrs_subgradient(B, s, r) + label_term
    return scale * lrs_subgradient(B.T, 1, s).T + label_term
