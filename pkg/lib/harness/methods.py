"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Method registry of the harness: which hyperparameter each method tunes       ║
║   and how a method key turns into a fitted model.                              ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass
from typing import Optional

from lib.exceptions import ConfigError
from lib.models.baselines import fit_mlg_baseline, fit_ols, fit_pcr, fit_ridge_mlr
from lib.models.dro import DroConfig, fit_dro

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSpec:
    """
    Attributes:
        key: Method key used in configs and reports
        family: 'MLR' or 'MLG'
        tuned: Hyperparameter chosen by cross-validation ('epsilon',
            'lambda', 'n_components') or None
    """
    key: str
    family: str
    tuned: Optional[str] = None


METHODS = {spec.key: spec for spec in (
    MethodSpec('mlr_sr', 'MLR', 'epsilon'),
    MethodSpec('mlr_1s', 'MLR', 'epsilon'),
    MethodSpec('ols', 'MLR'),
    MethodSpec('ridge_mlr', 'MLR', 'lambda'),
    MethodSpec('pcr', 'MLR', 'n_components'),
    MethodSpec('mlg_sr', 'MLG', 'epsilon'),
    MethodSpec('mlg_1s', 'MLG', 'epsilon'),
    MethodSpec('mlg_vanilla', 'MLG'),
    MethodSpec('mlg_ridge', 'MLG', 'lambda'),
    MethodSpec('mlg_lasso', 'MLG', 'lambda'),
    MethodSpec('mlg_pcc', 'MLG', 'n_components'),
)}


def method_spec(method):
    try:
        return METHODS[method]
    except KeyError:
        raise ConfigError(f"Unknown method '{method}', expected one of {sorted(METHODS)}") from None


def tuning_grid(method, grid, p):
    """Candidate values for the method's hyperparameter: component counts 1..p or the given grid"""
    tuned = method_spec(method).tuned
    if tuned is None:
        return [None]
    if tuned == 'n_components':
        return list(range(1, p + 1))
    return list(grid)


def fit_method(method, data, value=None, r=2.0, solver_cfg=None, standardize_scores=False, seed=None,
               loss='l2', restarts=0):
    """
    Fit one method with its hyperparameter set to value

    Args:
        method: Method key
        data: Training Dataset
        value: Epsilon, lambda or component count, depending on the method
        r: Transport norm order of the robust methods
        solver_cfg: SolverConfig of iterative fits
        standardize_scores: Standardize PCC scores
        seed: Seed recorded with the model
        loss: Residual loss name of the robust regression methods
        restarts: Extra random starting points of the robust fits

    Returns:
        FittedModel
    """
    spec = method_spec(method)
    if spec.family != data.family:
        raise ConfigError(f"Method '{method}' needs {spec.family} data, got {data.family}")
    if spec.tuned is not None and value is None:
        raise ConfigError(f"Method '{method}' needs a value for {spec.tuned}")

    if spec.tuned == 'epsilon':
        variant = method.split('_')[1]
        loss = loss if spec.family == 'MLR' else 'l2'
        cfg = DroConfig(family=spec.family, variant=variant, r=r, epsilon=value, loss=loss)
        return fit_dro(data, cfg, solver_cfg, seed=seed, restarts=restarts)
    if method == 'ols':
        return fit_ols(data, seed=seed)
    if method == 'ridge_mlr':
        return fit_ridge_mlr(data, value, seed=seed)
    if method == 'pcr':
        return fit_pcr(data, int(value), seed=seed)
    lam = value if spec.tuned == 'lambda' else 0.0
    n_components = int(value) if spec.tuned == 'n_components' else None
    return fit_mlg_baseline(data, method, lam, n_components, solver_cfg, standardize_scores, seed)
