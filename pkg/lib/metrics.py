"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Evaluation metrics: weighted mean square error, tail risk, classification    ║
║   rate, log-loss, minimal perturbation distance and the generalization bound   ║
║   for the robust classifiers.                                                  ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from lib.exceptions import DomainError, FactorizationError, ShapeError
from lib.losses import L2_RESIDUAL, mlg_batch
from lib.models.penalties import mlg_penalty_norm
from lib.norms import INFINITY, as_matrix, row_norms

logger = logging.getLogger(__name__)

COV_FLOOR = 1e-8

ROBUST_CLASSIFIERS = ('mlg_sr', 'mlg_1s')


def _as_rows(Y, K):
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, K)
    return Y


def wmse_terms(Y_true, Y_pred, sigma_hat):
    """Per-sample quadratic forms (y - y_hat)' inv(sigma_hat) (y - y_hat)"""
    sigma_hat = np.atleast_2d(np.asarray(sigma_hat, dtype=float))
    K = sigma_hat.shape[0]
    residuals = _as_rows(Y_true, K) - _as_rows(Y_pred, K)
    if residuals.shape[1] != K:
        raise ShapeError(f"Responses have {residuals.shape[1]} columns but sigma_hat is {K} x {K}")
    try:
        factor = cho_factor(sigma_hat)
    except (LinAlgError, ValueError) as e:
        raise FactorizationError(f"Error covariance is not positive definite: {e}") from e
    solved = cho_solve(factor, residuals.T).T
    return np.sum(residuals * solved, axis=1)


def wmse(Y_true, Y_pred, sigma_hat):
    """
    Weighted mean square error (1/M) sum (y_i - y_hat_i)' inv(sigma_hat) (y_i - y_hat_i)

    Args:
        Y_true: M x K responses
        Y_pred: M x K predictions
        sigma_hat: K x K positive definite weight covariance

    Returns:
        float: Nonnegative mean of the weighted squared errors
    """
    return float(np.mean(wmse_terms(Y_true, Y_pred, sigma_hat)))


def train_error_cov(Y, Y_hat, p, K):
    """
    Training prediction-error covariance R'R / (N - pK), symmetrized and
    floored with 1e-8 I

    When N <= pK the divisor falls back to max(1, N - pK) with a warning.
    """
    residuals = _as_rows(Y, K) - _as_rows(Y_hat, K)
    n = residuals.shape[0]
    dof = n - p * K
    if dof <= 0:
        logger.warning(f"N={n} does not exceed pK={p * K}; using divisor {max(1, dof)} for the error covariance")
        dof = max(1, dof)
    cov = residuals.T @ residuals / dof
    return (cov + cov.T) / 2.0 + COV_FLOOR * np.eye(K)


def cvar(losses, alpha):
    """
    Conditional value at risk: mean of the ceil((1 - alpha) M) largest losses

    Args:
        losses: M loss values
        alpha: Confidence level in (0, 1)
    """
    losses = np.asarray(losses, dtype=float).ravel()
    if losses.size == 0:
        raise DomainError("CVaR of an empty loss list")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    tail = max(1, math.ceil(round((1.0 - alpha) * losses.size, 9)))
    return float(np.mean(np.sort(losses)[::-1][:tail]))


def ccr(labels_true, labels_pred):
    """Correct classification rate"""
    labels_true = np.asarray(labels_true)
    labels_pred = np.asarray(labels_pred)
    if labels_true.shape != labels_pred.shape:
        raise ShapeError(f"Label lists differ in shape: {labels_true.shape} vs {labels_pred.shape}")
    if labels_true.size == 0:
        raise DomainError("CCR of an empty label list")
    return float(np.mean(labels_true == labels_pred))


def mpd_per_point(model, X_test):
    """
    Smallest l1 perturbation flipping the predicted label, per test point

    With predicted class k and rival j, the distance from x to the halfspace
    (w_j - w_k)'x' >= 0 is max(0, (w_k - w_j)'x) / ||w_k - w_j||_inf, and 0
    when w_j = w_k.
    """
    B = as_matrix(getattr(model, 'B', model), 'B')
    K = B.shape[1]
    if K < 2:
        raise DomainError("MPD needs at least two classes")
    X = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X.shape[1] != B.shape[0]:
        raise ShapeError(f"X_test has {X.shape[1]} features but B has {B.shape[0]} rows")

    scores = X @ B
    predicted = np.argmax(scores, axis=1)
    rows = np.arange(X.shape[0])
    best = np.full(X.shape[0], INFINITY)
    for j in range(K):
        gaps = B[:, predicted].T - B[:, j]
        scale = np.linalg.norm(gaps, INFINITY, axis=1)
        margin = np.maximum(scores[rows, predicted] - scores[:, j], 0.0)
        distance = np.divide(margin, scale, out=np.zeros_like(margin), where=scale > 0)
        distance[predicted == j] = INFINITY
        best = np.minimum(best, distance)
    return best


def mpd(model, X_test):
    """Minimal perturbation distance over all test points and competing classes"""
    return float(np.min(mpd_per_point(model, X_test)))


@dataclass(frozen=True)
class BoundInputs:
    """
    Quantities entering the generalization bound

    Attributes:
        train_avg_loss: Average training log-loss
        R_x: Radius of the predictors in the transport norm
        C_bar: Complexity constant of the coefficient matrix
        K: Number of classes
        N: Training size
        delta: Failure probability
    """
    train_avg_loss: float
    R_x: float
    C_bar: float
    K: int
    N: int
    delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.N < 1:
            raise DomainError(f"N must be >= 1, got {self.N}")
        if self.K < 1:
            raise DomainError(f"K must be >= 1, got {self.K}")
        if self.R_x < 0 or self.C_bar < 0:
            raise DomainError("R_x and C_bar must be nonnegative")


def generalization_bound(inputs):
    """
    Upper bound on the expected log-loss holding with probability 1 - delta:

        train + 2 c / sqrt(N) + c sqrt(8 log(2 / delta) / N),  c = R_x C_bar + log K
    """
    complexity = inputs.R_x * inputs.C_bar + math.log(inputs.K)
    return (inputs.train_avg_loss
            + 2.0 * complexity / math.sqrt(inputs.N)
            + complexity * math.sqrt(8.0 * math.log(2.0 / inputs.delta) / inputs.N))


def empirical_radius(X, r):
    """Largest ||x_i||_r over the rows of X"""
    return float(np.max(row_norms(np.atleast_2d(np.asarray(X, dtype=float)), r)))


def complexity_constant(B, r, variant):
    """
    C_bar of the bound: K^(1/s) ||B||_{s,r} + ||B||_{s,1} for SR,
    K^(1/s) ||B'||_{1,s} + ||B||_{s,1} for 1S
    """
    return mlg_penalty_norm(B, r, variant)


@dataclass
class MetricReport:
    wmse: float = math.nan
    cvar_wmse: float = math.nan
    ccr: float = math.nan
    avg_logloss: float = math.nan
    cvar_logloss: float = math.nan
    mpd: float = math.nan
    bound_value: float = math.nan
    per_sample_losses: List[float] = field(default_factory=list, repr=False)

    def to_row(self):
        """Metric columns of a results CSV row"""
        return {
            'wmse': self.wmse,
            'cvar_wmse': self.cvar_wmse,
            'ccr': self.ccr,
            'logloss': self.avg_logloss,
            'cvar_logloss': self.cvar_logloss,
            'mpd': self.mpd,
            'bound': self.bound_value,
        }

    def to_dict(self):
        return {
            key: (None if isinstance(value, float) and math.isnan(value) else value)
            for key, value in asdict(self).items()
        }


def training_diagnostics(model, data):
    """
    Training-set quantities evaluation needs later: the error covariance for
    regression, the average training loss, the predictor radius and N
    """
    r = getattr(model.config, 'r', 2.0)
    diagnostics = {'n_train': data.N, 'radius_x': empirical_radius(data.X, r)}
    if model.family == 'MLR':
        fitted = data.X @ model.B
        loss = getattr(model.config, 'residual_loss', L2_RESIDUAL)
        diagnostics['train_error_cov'] = train_error_cov(data.Y, fitted, data.p, data.K)
        diagnostics['train_avg_loss'] = float(np.mean(loss.value(data.Y - fitted)))
    else:
        values, _ = mlg_batch(model.B, data.X, data.Y, validate=False)
        diagnostics['train_avg_loss'] = float(np.mean(values))
    return diagnostics


def evaluate_model(model, data, alpha=0.8, delta=0.1, sigma_hat=None):
    """
    Evaluate a fitted model on a test set

    Args:
        model: FittedModel
        data: Test Dataset of the model's family
        alpha: CVaR confidence level
        delta: Failure probability of the generalization bound
        sigma_hat: WMSE weight covariance (defaults to the model's training Σ̂)

    Returns:
        MetricReport: Regression fills wmse/cvar_wmse, classification fills
        ccr/logloss/cvar_logloss/mpd and, for the robust classifiers, the bound
    """
    if data.family != model.family:
        raise ShapeError(f"{model.family} model cannot be evaluated on {data.family} data")
    if data.p != model.p or data.K != model.K:
        raise ShapeError(f"Dataset is {data.p} x {data.K} but the model is {model.p} x {model.K}")

    if model.family == 'MLR':
        if sigma_hat is None:
            sigma_hat = model.diagnostics.get('train_error_cov')
        if sigma_hat is None:
            raise DomainError("Model carries no training error covariance; pass sigma_hat")
        terms = wmse_terms(data.Y, model.predict(data.X), sigma_hat)
        return MetricReport(
            wmse=float(np.mean(terms)),
            cvar_wmse=cvar(terms, alpha),
            per_sample_losses=terms.tolist(),
        )

    losses, _ = mlg_batch(model.B, data.X, data.Y, validate=False)
    report = MetricReport(
        ccr=ccr(data.labels, model.predict_label(data.X)),
        avg_logloss=float(np.mean(losses)),
        cvar_logloss=cvar(losses, alpha),
        mpd=mpd(model, data.X),
        per_sample_losses=losses.tolist(),
    )
    diagnostics = model.diagnostics
    if model.method in ROBUST_CLASSIFIERS and 'train_avg_loss' in diagnostics and 'radius_x' in diagnostics:
        report.bound_value = generalization_bound(BoundInputs(
            train_avg_loss=diagnostics['train_avg_loss'],
            R_x=diagnostics['radius_x'],
            C_bar=complexity_constant(model.B, model.config.r, model.config.variant),
            K=model.K,
            N=int(diagnostics.get('n_train', data.N)),
            delta=delta,
        ))
    return report
