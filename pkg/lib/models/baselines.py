"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Comparison estimators: ordinary least squares, ridge and principal           ║
║   components regression, and vanilla, ridge, LASSO and principal components    ║
║   multiclass logistic regression.                                              ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg
from sklearn.decomposition import PCA
from sklearn.linear_model import Ridge

from lib import metrics
from lib.exceptions import ConfigError, DomainError, ShapeError, SingularGramError
from lib.losses import mlg_batch
from lib.models.fitted import FittedModel
from lib.solver import SolverConfig, minimize

logger = logging.getLogger(__name__)

REGRESSION_KINDS = ('ols', 'ridge_mlr', 'pcr')
CLASSIFICATION_KINDS = ('mlg_vanilla', 'mlg_ridge', 'mlg_lasso', 'mlg_pcc')
BASELINE_KINDS = REGRESSION_KINDS + CLASSIFICATION_KINDS

# Ridge weight substituted for a singular Gram matrix
SINGULAR_RIDGE = 1e-8


@dataclass
class BaselineConfig:
    """
    Configuration of a comparison estimator

    Attributes:
        kind: One of BASELINE_KINDS
        lam: Penalty weight (ridge and LASSO kinds)
        n_components: Principal components kept (pcr, mlg_pcc); all when None
        standardize_scores: Scale principal-component scores to unit variance (mlg_pcc)
    """
    kind: str
    lam: float = 0.0
    n_components: Optional[int] = None
    standardize_scores: bool = False

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ConfigError(f"Unknown baseline '{self.kind}', expected one of {BASELINE_KINDS}")
        self.lam = float(self.lam)
        if not self.lam >= 0:
            raise DomainError(f"lambda must be nonnegative, got {self.lam}")
        if self.n_components is not None:
            self.n_components = int(self.n_components)
            if self.n_components < 1:
                raise DomainError(f"n_components must be >= 1, got {self.n_components}")

    @property
    def family(self):
        return 'MLR' if self.kind in REGRESSION_KINDS else 'MLG'

    @property
    def method(self):
        return self.kind

    def to_dict(self):
        payload = asdict(self)
        payload['lambda'] = payload.pop('lam')
        return payload

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        if 'lambda' in payload:
            payload['lam'] = payload.pop('lambda')
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(f"Invalid baseline configuration: {e}") from e


def _check_family(data, cfg):
    if data.family != cfg.family:
        raise ShapeError(f"{cfg.kind} cannot be fit on {data.family} data")


def _resolve_components(n_components, p):
    if n_components is None:
        return p
    if not 1 <= n_components <= p:
        raise DomainError(f"n_components must lie in [1, {p}], got {n_components}")
    return n_components


def _ridge_solve(X, Y, lam):
    # No intercept: B solves (X'X + lam I) B = X'Y.
    ridge = Ridge(alpha=lam, fit_intercept=False, solver='cholesky').fit(X, Y)
    return np.asarray(ridge.coef_, dtype=float).T.reshape(X.shape[1], Y.shape[1])


def least_squares(X, Y, allow_fallback=True):
    """
    Least squares coefficients through a rank-revealing solve

    A rank-deficient design falls back to ridge with weight 1e-8 (warning),
    or raises SingularGramError when the fallback is disabled.
    """
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        if not allow_fallback:
            raise SingularGramError(f"Gram matrix is singular (rank {rank} < {X.shape[1]})")
        logger.warning(f"Design has rank {rank} < {X.shape[1]}; falling back to ridge with lambda={SINGULAR_RIDGE:g}")
        return _ridge_solve(X, Y, SINGULAR_RIDGE)
    solution, _, _, _ = scipy.linalg.lstsq(X, Y)
    return solution


def principal_directions(X, n_components):
    """
    Top principal directions of X (eigenvectors of the sample covariance),
    as a p x n matrix with columns in decreasing explained variance
    """
    if n_components > min(X.shape):
        raise DomainError(f"{n_components} components need at least that many samples and predictors, got {X.shape}")
    pca = PCA(n_components=n_components, svd_solver='full').fit(X)
    V = pca.components_.T.copy()
    # Sign convention: largest-magnitude entry of each direction is positive.
    pivots = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivots, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _closed_form_model(B, data, cfg, seed, penalty=0.0):
    residuals = data.Y - data.X @ B
    objective = float(np.sum(residuals ** 2) / data.N) + penalty
    model = FittedModel(B=B, config=cfg, objective_trace=[objective], iterations=0, converged=True, seed=seed)
    model.diagnostics = metrics.training_diagnostics(model, data)
    return model


def fit_ols(data, allow_fallback=True, seed=None):
    """
    Ordinary least squares B = (X'X)^-1 X'Y

    Args:
        data: RegressionDataset
        allow_fallback: Use ridge 1e-8 on a singular Gram matrix instead of raising
        seed: Seed recorded with the model
    """
    cfg = BaselineConfig('ols')
    _check_family(data, cfg)
    B = least_squares(data.X, data.Y, allow_fallback)
    return _closed_form_model(B, data, cfg, seed)


def fit_ridge_mlr(data, lam, seed=None):
    """Ridge regression B = (X'X + lam I)^-1 X'Y"""
    cfg = BaselineConfig('ridge_mlr', lam=lam)
    _check_family(data, cfg)
    if cfg.lam == 0:
        B = least_squares(data.X, data.Y)
    else:
        B = _ridge_solve(data.X, data.Y, cfg.lam)
    return _closed_form_model(B, data, cfg, seed, penalty=cfg.lam * float(np.sum(B ** 2)))


def fit_pcr(data, n_components=None, seed=None):
    """
    Principal components regression: OLS on the scores of the top
    n_components directions, mapped back to p x K
    """
    n_components = _resolve_components(n_components, data.p)
    cfg = BaselineConfig('pcr', n_components=n_components)
    _check_family(data, cfg)
    V = principal_directions(data.X, n_components)
    scores_B = least_squares(data.X @ V, data.Y)
    return _closed_form_model(V @ scores_B, data, cfg, seed)


def _logistic_terms(cfg):
    if cfg.kind == 'mlg_ridge':
        return (lambda B: cfg.lam * float(np.sum(B * B)),
                lambda B: 2.0 * cfg.lam * B)
    if cfg.kind == 'mlg_lasso':
        return (lambda B: cfg.lam * float(np.sum(np.abs(B))),
                lambda B: cfg.lam * np.sign(B))
    return (lambda B: 0.0, lambda B: np.zeros_like(B))


def fit_mlg_baseline(data, kind, lam=0.0, n_components=None, solver_cfg=None,
                     standardize_scores=False, seed=None):
    """
    Fit a penalized multiclass logistic regression by subgradient descent

    Args:
        data: ClassificationDataset
        kind: 'mlg_vanilla', 'mlg_ridge' (lam tr(B'B)), 'mlg_lasso'
            (lam sum |B_ij|) or 'mlg_pcc' (vanilla fit on principal-component scores)
        lam: Penalty weight
        n_components: Components kept by mlg_pcc (all when None)
        solver_cfg: SolverConfig
        standardize_scores: Scale mlg_pcc scores to unit variance
        seed: Seed recorded with the model

    Returns:
        FittedModel: Coefficients in the original p x K predictor space
    """
    if kind not in CLASSIFICATION_KINDS:
        raise ConfigError(f"'{kind}' is not a logistic baseline, expected one of {CLASSIFICATION_KINDS}")
    if kind == 'mlg_pcc':
        n_components = _resolve_components(n_components, data.p)
    cfg = BaselineConfig(kind, lam=lam, n_components=n_components, standardize_scores=standardize_scores)
    _check_family(data, cfg)
    solver_cfg = solver_cfg or SolverConfig()
    training = data.canonicalized()

    X = training.X
    transform = np.eye(data.p)
    if kind == 'mlg_pcc':
        transform = principal_directions(X, n_components)
        if standardize_scores:
            scale = (X @ transform).std(axis=0, ddof=1)
            scale[scale == 0] = 1.0
            transform = transform / scale
        X = X @ transform

    penalty, penalty_subgradient = _logistic_terms(cfg)

    def objective(B):
        values, _ = mlg_batch(B, X, training.Y, validate=False)
        return float(np.mean(values)) + penalty(B)

    def subgradient(B):
        _, gradient = mlg_batch(B, X, training.Y, validate=False)
        return gradient + penalty_subgradient(B)

    logger.debug(f"Fitting {kind} (lambda={cfg.lam:g}) on N={data.N}")
    result = minimize(objective, subgradient, (X.shape[1], data.K), solver_cfg)
    model = FittedModel(
        B=transform @ result.solution,
        config=cfg,
        objective_trace=result.trace,
        iterations=result.iterations,
        converged=result.converged,
        seed=seed,
        solver=solver_cfg.settings(),
    )
    model.diagnostics = metrics.training_diagnostics(model, data)
    return model


def fit_baseline(data, cfg, solver_cfg=None, seed=None):
    """Dispatch a BaselineConfig to its fitting routine"""
    if cfg.kind == 'ols':
        return fit_ols(data, seed=seed)
    if cfg.kind == 'ridge_mlr':
        return fit_ridge_mlr(data, cfg.lam, seed=seed)
    if cfg.kind == 'pcr':
        return fit_pcr(data, cfg.n_components, seed=seed)
    return fit_mlg_baseline(data, cfg.kind, cfg.lam, cfg.n_components, solver_cfg,
                            cfg.standardize_scores, seed)
