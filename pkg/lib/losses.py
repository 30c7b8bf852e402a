"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Pointwise losses and their gradients with respect to the coefficient         ║
║   matrix B: Lipschitz residual losses for regression, the multiclass           ║
║   log-loss, and softmax probabilities.                                         ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp, softmax

from lib.data.datasets import is_one_hot
from lib.exceptions import DomainError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossValue:
    """Loss value at a sample together with its gradient w.r.t. B (p x K)"""
    value: float
    gradient: np.ndarray


@dataclass(frozen=True)
class ResidualLoss:
    """
    A Lipschitz loss l(z) on residuals z = y - B'x

    Attributes:
        name: Identifier stored with fitted models
        value: Maps an (n, K) residual matrix to n loss values
        gradient: Maps an (n, K) residual matrix to (n, K) (sub)gradients of l
        lipschitz: Lipschitz constant L of l on (R^K, ||.||_2), or a callable
            K -> L when the constant depends on the response dimension
    """
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: Union[float, Callable[[int], float]]

    def lipschitz_for(self, K: Optional[int]) -> Optional[float]:
        """Lipschitz constant for K responses (None while K is unknown and it matters)"""
        if not callable(self.lipschitz):
            return float(self.lipschitz)
        if K is None:
            return None
        return float(self.lipschitz(K))


def _l2_value(R):
    return np.linalg.norm(R, axis=1)


def _l2_gradient(R):
    norms = np.linalg.norm(R, axis=1, keepdims=True)
    # Zero residual takes the zero subgradient.
    return np.divide(R, norms, out=np.zeros_like(R), where=norms > 0)


def _l1_value(R):
    return np.abs(R).sum(axis=1)


def _huber_value(R, delta=1.0):
    norms = np.linalg.norm(R, axis=1)
    return np.where(norms <= delta, 0.5 * norms ** 2, delta * (norms - 0.5 * delta))


def _huber_gradient(R, delta=1.0):
    norms = np.linalg.norm(R, axis=1, keepdims=True)
    return R * np.minimum(1.0, delta / np.maximum(norms, delta))


L2_RESIDUAL = ResidualLoss('l2', _l2_value, _l2_gradient, 1.0)

# ||z||_1 <= sqrt(K) ||z||_2
L1_RESIDUAL = ResidualLoss('l1', _l1_value, np.sign, lambda K: float(np.sqrt(K)))

HUBER_RESIDUAL = ResidualLoss('huber', _huber_value, _huber_gradient, 1.0)

RESIDUAL_LOSSES = {loss.name: loss for loss in (L2_RESIDUAL, L1_RESIDUAL, HUBER_RESIDUAL)}


def _check_shapes(B, X, Y):
    B = np.asarray(B, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if B.ndim != 2:
        raise ShapeError(f"B must be a p x K matrix, got shape {B.shape}")
    if X.shape[1] != B.shape[0]:
        raise ShapeError(f"x has {X.shape[1]} features but B has {B.shape[0]} rows")
    if Y.shape[1] != B.shape[1] or Y.shape[0] != X.shape[0]:
        raise ShapeError(f"y shape {Y.shape} does not match B ({B.shape}) and x ({X.shape})")
    return B, X, Y


def mlr_batch(B, X, Y, loss=L2_RESIDUAL):
    """
    Residual losses over a batch

    Args:
        B: p x K coefficients
        X: n x p predictors
        Y: n x K responses
        loss: ResidualLoss (default l2)

    Returns:
        tuple: (n loss values, p x K gradient of the mean loss)
    """
    B, X, Y = _check_shapes(B, X, Y)
    R = Y - X @ B
    values = loss.value(R)
    gradient = -(X.T @ loss.gradient(R)) / X.shape[0]
    return values, gradient


def mlr_loss(B, x, y, loss=L2_RESIDUAL):
    """
    Residual loss l(y - B'x) at one sample

    Returns:
        LossValue: value and gradient -x g' with g a (sub)gradient of l
    """
    values, gradient = mlr_batch(B, np.reshape(x, (1, -1)), np.reshape(y, (1, -1)), loss)
    return LossValue(float(values[0]), gradient)


def softmax_probs(B, x):
    """
    Class probabilities softmax(B'x), computed with a max shift

    Args:
        B: p x K coefficients
        x: Vector of length p, or an n x p matrix for batch evaluation

    Returns:
        np.ndarray: Length-K simplex vector (or n x K rows)
    """
    B = np.asarray(B, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != B.shape[0]:
        raise ShapeError(f"x has {x.shape[-1]} features but B has {B.shape[0]} rows")
    return softmax(x @ B, axis=-1)


def mlg_batch(B, X, Y, validate=True):
    """
    Multiclass log-losses over a batch

    Returns:
        tuple: (n loss values, p x K gradient of the mean loss)
    """
    B, X, Y = _check_shapes(B, X, Y)
    if validate and not is_one_hot(Y):
        raise DomainError("Log-loss labels must be one-hot")
    scores = X @ B
    lse = logsumexp(scores, axis=1)
    values = np.maximum(lse - np.sum(scores * Y, axis=1), 0.0)
    probs = np.exp(scores - lse[:, None])
    gradient = X.T @ (probs - Y) / X.shape[0]
    return values, gradient


def mlg_logloss(B, x, y):
    """
    Log-loss log 1'exp(B'x) - y'B'x at one sample

    Returns:
        LossValue: value and gradient x (softmax(B'x) - y)'
    """
    values, gradient = mlg_batch(B, np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))
    return LossValue(float(values[0]), gradient)
