"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Fitted coefficient matrices with the configuration, solver settings and      ║
║   training diagnostics they came from, plus their JSON form.                   ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from lib.exceptions import ConfigError, ShapeError
from lib.losses import RESIDUAL_LOSSES, softmax_probs

logger = logging.getLogger(__name__)

DRO_METHODS = ('mlr_sr', 'mlr_1s', 'mlg_sr', 'mlg_1s')


@dataclass
class FittedModel:
    """
    Estimated p x K coefficient matrix and its provenance

    Attributes:
        B: Coefficient matrix
        config: DroConfig or BaselineConfig used for the fit
        objective_trace: Best-so-far objective per iteration (nonincreasing)
        iterations: Solver iterations run (0 for closed-form fits)
        converged: Whether the stopping rule fired before the iteration cap
        seed: Seed of the data the model was fit on, when known
        solver: Solver settings for iterative fits
        diagnostics: Training-set quantities needed at evaluation time
            (train_error_cov, train_avg_loss, radius_x, n_train)
    """
    B: np.ndarray
    config: Any
    objective_trace: List[float] = field(default_factory=list, repr=False)
    iterations: int = 0
    converged: bool = True
    seed: Optional[int] = None
    solver: Optional[Dict[str, Any]] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim != 2:
            raise ShapeError(f"B must be a p x K matrix, got shape {self.B.shape}")

    @property
    def family(self):
        return self.config.family

    @property
    def method(self):
        return self.config.method

    @property
    def p(self):
        return self.B.shape[0]

    @property
    def K(self):
        return self.B.shape[1]

    @property
    def objective(self):
        return self.objective_trace[-1] if self.objective_trace else float('nan')

    def predict(self, x):
        """
        B'x for regression, softmax(B'x) for classification

        Accepts one vector of length p or an n x p matrix.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise ShapeError(f"x has {x.shape[-1]} features but the model expects {self.p}")
        if self.family == 'MLG':
            return softmax_probs(self.B, x)
        return x @ self.B

    def predict_label(self, x):
        """Index of the largest score B'x (lowest index on ties)"""
        if self.family != 'MLG':
            raise ShapeError("predict_label applies to classification models only")
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise ShapeError(f"x has {x.shape[-1]} features but the model expects {self.p}")
        return np.argmax(x @ self.B, axis=-1)

    def to_dict(self):
        diagnostics = {
            key: (value.tolist() if isinstance(value, np.ndarray) else value)
            for key, value in self.diagnostics.items()
        }
        return {
            'family': self.family,
            'method': self.method,
            'p': self.p,
            'K': self.K,
            'config': self.config.to_dict(),
            'B': self.B.tolist(),
            'seed': self.seed,
            'solver': self.solver,
            'iterations': self.iterations,
            'converged': self.converged,
            'objective': self.objective,
            'diagnostics': diagnostics,
        }

    @classmethod
    def from_dict(cls, payload):
        # Config classes import this module.
        from lib.models.baselines import BaselineConfig
        from lib.models.dro import DroConfig

        try:
            method = payload['method']
            config_cls = DroConfig if method in DRO_METHODS else BaselineConfig
            config = config_cls.from_dict(payload['config'])
            B = np.array(payload['B'], dtype=float)
            diagnostics = dict(payload.get('diagnostics') or {})
        except KeyError as e:
            raise ConfigError(f"Model file is missing field {e}") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Model file is malformed: {e}") from e

        if 'train_error_cov' in diagnostics and diagnostics['train_error_cov'] is not None:
            diagnostics['train_error_cov'] = np.array(diagnostics['train_error_cov'], dtype=float)
        objective = payload.get('objective')
        return cls(
            B=B,
            config=config,
            objective_trace=[] if objective is None else [float(objective)],
            iterations=int(payload.get('iterations', 0)),
            converged=bool(payload.get('converged', True)),
            seed=payload.get('seed'),
            solver=payload.get('solver'),
            diagnostics=diagnostics,
        )


def predict(model, x):
    return model.predict(x)


def predict_label(model, x):
    return model.predict_label(x)


def save_model(model, path):
    """
    Write a fitted model as JSON; B survives the round trip bit for bit

    Raises:
        ConfigError: The model uses a residual loss that is not registered
            under its name, so it could not be loaded back
    """
    loss = getattr(model.config, 'residual_loss', None)
    if loss is not None and RESIDUAL_LOSSES.get(loss.name) is not loss:
        raise ConfigError(f"Residual loss '{loss.name}' is not registered; register it in RESIDUAL_LOSSES before saving")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(model.to_dict(), f, indent=2, allow_nan=True)
    logger.info(f"Saved {model.method} model to {path}")
    return path


def load_model(path):
    """Read a model written by save_model"""
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    return FittedModel.from_dict(payload)
