"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Wasserstein-robust estimators as regularized empirical risk: the MLR-SR,     ║
║   MLR-1S, MLG-SR and MLG-1S objectives, their subgradients and the fitting     ║
║   entry point.                                                                 ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from lib import metrics
from lib.data.generators import make_rng
from lib.exceptions import ConfigError, DomainError, ShapeError, SolverError
from lib.losses import L2_RESIDUAL, RESIDUAL_LOSSES, ResidualLoss, mlg_batch, mlr_batch
from lib.models.fitted import FittedModel
from lib.models.penalties import (
    mlg_penalty_norm,
    mlg_penalty_subgradient,
    mlr_penalty_norm,
    mlr_penalty_subgradient,
    normalize_variant,
)
from lib.norms import dual_exponent, format_order, parse_order
from lib.solver import SolverConfig, minimize

logger = logging.getLogger(__name__)

FAMILIES = ('MLR', 'MLG')


@dataclass
class DroConfig:
    """
    Configuration of a robust fit

    Attributes:
        family: 'MLR' (regression) or 'MLG' (classification)
        variant: 'SR' or '1S' relaxation
        r: Order of the transport norm on x; the penalty uses its dual s
        epsilon: Wasserstein radius (> 0)
        lipschitz: Lipschitz constant L of the residual loss (regression only);
            taken from the loss when None, and left unset while K is unknown
            for losses whose constant depends on K
        K: Response dimension, filled in from the data when None
        p: Predictor dimension, filled in from the data when None
        loss: Residual loss name or ResidualLoss instance (regression only)
        allow_zero_radius: Permit epsilon = 0 (unregularized limit)
    """
    family: str = 'MLR'
    variant: str = 'SR'
    r: Union[float, str] = 2.0
    epsilon: float = 0.1
    lipschitz: Optional[float] = None
    K: Optional[int] = None
    p: Optional[int] = None
    loss: Union[str, ResidualLoss] = L2_RESIDUAL.name
    allow_zero_radius: bool = False

    def __post_init__(self):
        self.family = str(self.family).upper()
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got '{self.family}'")
        self.variant = normalize_variant(self.variant)
        self.r = parse_order(self.r)
        self.epsilon = float(self.epsilon)
        if self.epsilon < 0 or not np.isfinite(self.epsilon):
            raise DomainError(f"epsilon must be a finite nonnegative radius, got {self.epsilon}")
        if self.epsilon == 0 and not self.allow_zero_radius:
            raise DomainError("epsilon must be positive")
        if isinstance(self.loss, str) and self.loss not in RESIDUAL_LOSSES:
            raise ConfigError(f"Unknown residual loss '{self.loss}', expected one of {sorted(RESIDUAL_LOSSES)}")
        if self.lipschitz is None:
            self.lipschitz = self.residual_loss.lipschitz_for(self.K)
        if self.lipschitz is not None:
            self.lipschitz = float(self.lipschitz)
            if not self.lipschitz > 0:
                raise DomainError(f"lipschitz must be positive, got {self.lipschitz}")

    @property
    def s(self):
        return dual_exponent(self.r)

    @property
    def method(self):
        return f"{self.family.lower()}_{self.variant.lower()}"

    @property
    def residual_loss(self):
        if isinstance(self.loss, ResidualLoss):
            return self.loss
        return RESIDUAL_LOSSES[self.loss]

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)

    def to_dict(self):
        return {
            'family': self.family,
            'variant': self.variant,
            'r': format_order(self.r),
            's': format_order(self.s),
            'epsilon': self.epsilon,
            'lipschitz': self.lipschitz,
            'loss': self.residual_loss.name,
            'p': self.p,
            'K': self.K,
        }

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        payload.pop('s', None)
        # Stored radii may be the zero limit.
        payload['allow_zero_radius'] = float(payload.get('epsilon', 1.0)) == 0.0
        try:
            return cls(**payload)
        except TypeError as e:
            raise ConfigError(f"Invalid robust model configuration: {e}") from e


def _check_coefficients(B, data, cfg):
    B = np.asarray(B, dtype=float)
    if data.family != cfg.family:
        raise ShapeError(f"{cfg.family} objective cannot use {data.family} data")
    if B.shape != (data.p, data.K):
        raise ShapeError(f"B must be {data.p} x {data.K}, got {B.shape}")
    return B


def _lipschitz(B, cfg):
    if cfg.lipschitz is not None:
        return cfg.lipschitz
    return cfg.residual_loss.lipschitz_for(np.shape(B)[1])


def mlr_regularizer(B, cfg):
    """eps L ||B~'||_{s,r} (SR) or eps L ||B~||_{1,s} (1S)"""
    return cfg.epsilon * _lipschitz(B, cfg) * mlr_penalty_norm(B, cfg.r, cfg.variant)


def mlg_regularizer(B, cfg):
    """eps (K^(1/s) ||B||_{s,r} + ||B||_{s,1}) (SR) or eps (K^(1/s) ||B'||_{1,s} + ||B||_{s,1}) (1S)"""
    return cfg.epsilon * mlg_penalty_norm(B, cfg.r, cfg.variant)


def regularizer(B, cfg):
    if cfg.family == 'MLR':
        return mlr_regularizer(B, cfg)
    return mlg_regularizer(B, cfg)


def regularizer_subgradient(B, cfg):
    if cfg.family == 'MLR':
        return cfg.epsilon * _lipschitz(B, cfg) * mlr_penalty_subgradient(B, cfg.r, cfg.variant)
    return cfg.epsilon * mlg_penalty_subgradient(B, cfg.r, cfg.variant)


def _empirical_risk(B, data, cfg):
    if cfg.family == 'MLR':
        return mlr_batch(B, data.X, data.Y, cfg.residual_loss)
    return mlg_batch(B, data.X, data.Y, validate=False)


def dro_objective(B, data, cfg):
    """
    (1/N) sum_i loss(B, x_i, y_i) + regularizer(B)

    Args:
        B: p x K coefficients
        data: Dataset of cfg.family
        cfg: DroConfig

    Returns:
        float: Objective value
    """
    B = _check_coefficients(B, data, cfg)
    values, _ = _empirical_risk(B, data, cfg)
    return float(np.mean(values)) + regularizer(B, cfg)


def dro_subgradient(B, data, cfg):
    """Mean loss gradient plus a regularizer subgradient, as a p x K matrix"""
    B = _check_coefficients(B, data, cfg)
    _, gradient = _empirical_risk(B, data, cfg)
    return gradient + regularizer_subgradient(B, cfg)


def fit_dro(data, cfg, solver_cfg=None, seed=None, restarts=0):
    """
    Fit a robust model by subgradient descent

    Rows are put in canonical order first, so the fit does not depend on
    sample order.

    Args:
        data: Training Dataset
        cfg: DroConfig
        solver_cfg: SolverConfig (defaults when None)
        seed: Seed recorded with the model; also seeds the restart points
        restarts: Extra descents from standard normal starting matrices;
            the lowest final objective wins

    Returns:
        FittedModel: Best iterate with its trace and training diagnostics
    """
    if cfg.p is None or cfg.K is None:
        cfg = replace(cfg, p=data.p, K=data.K)
    if (cfg.p, cfg.K) != (data.p, data.K):
        raise ShapeError(f"Config expects {cfg.p} x {cfg.K} but data is {data.p} x {data.K}")
    if data.family != cfg.family:
        raise ShapeError(f"{cfg.method} cannot be fit on {data.family} data")
    if int(restarts) < 0:
        raise DomainError(f"restarts must be non-negative, got {restarts}")
    solver_cfg = solver_cfg or SolverConfig()
    training = data.canonicalized()

    starts = [solver_cfg]
    if restarts:
        rng = make_rng(seed or 0, 0, 'restarts')
        starts += [solver_cfg.with_init(rng.standard_normal((data.p, data.K))) for _ in range(int(restarts))]

    logger.debug(f"Fitting {cfg.method} (r={format_order(cfg.r)}, eps={cfg.epsilon:g}) on N={data.N}"
                 f" from {len(starts)} starting point(s)")
    result = None
    for start in starts:
        try:
            candidate = minimize(
                lambda B: dro_objective(B, training, cfg),
                lambda B: dro_subgradient(B, training, cfg),
                (data.p, data.K),
                start,
            )
        except SolverError as e:
            logger.error(f"{cfg.method} diverged at iteration {e.iteration}: {e}")
            raise
        if result is None or candidate.objective < result.objective:
            result = candidate

    if not result.converged:
        logger.debug(f"{cfg.method} hit the iteration cap ({solver_cfg.max_iters})")
    model = FittedModel(
        B=result.solution,
        config=cfg,
        objective_trace=result.trace,
        iterations=result.iterations,
        converged=result.converged,
        seed=seed,
        solver=solver_cfg.settings(),
    )
    model.diagnostics = metrics.training_diagnostics(model, data)
    return model
