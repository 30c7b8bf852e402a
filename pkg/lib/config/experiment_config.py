"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Experiment configuration: the JSON schema of replication runs, presets       ║
║   for the regression and classification benchmarks, and strict loading that    ║
║   rejects unknown keys.                                                        ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional

import numpy as np

from lib.exceptions import ConfigError
from lib.norms import format_order, parse_order
from lib.solver import SolverConfig

logger = logging.getLogger(__name__)

MLR_METHODS = ('mlr_sr', 'mlr_1s', 'ols', 'ridge_mlr', 'pcr')
MLG_METHODS = ('mlg_sr', 'mlg_1s', 'mlg_vanilla', 'mlg_ridge', 'mlg_lasso', 'mlg_pcc')
PLACEMENTS = ('train', 'test', 'both')

DEFAULT_GRID = np.logspace(-4, 0, 10).tolist()

PRESETS = {
    'mlr_response_outliers': {
        'family': 'MLR',
        'outlier_kind': 'response',
        'outlier_fractions': [0.0, 0.1, 0.2, 0.3, 0.4],
        'methods': list(MLR_METHODS),
        'placement': 'test',
    },
    'mlr_covariate_outliers': {
        'family': 'MLR',
        'outlier_kind': 'covariate',
        'outlier_fractions': [0.0, 0.1, 0.2, 0.3, 0.4],
        'methods': list(MLR_METHODS),
        'placement': 'test',
    },
    'mlg_covariate_outliers': {
        'family': 'MLG',
        'outlier_kind': 'covariate',
        'outlier_fractions': [0.2],
        'methods': list(MLG_METHODS),
        'placement': 'train',
    },
}


@dataclass
class ExperimentConfig:
    """
    One replication experiment

    Attributes:
        kind: Preset name, fixes the family and outlier kind
        p, K: Predictor and response dimensions
        n_train, n_test: Sample sizes per run
        outlier_fractions: Contamination levels swept per run
        outlier_rho: Correlation of the outlier noise (generator default when None)
        n_runs: Independent replications
        seed: Base seed; run i uses the stream (seed, i)
        methods: Method keys to fit
        grid: Candidate epsilon / lambda values for cross-validation
        folds: Cross-validation folds
        placement: Where contamination goes: 'train', 'test' or 'both'
        r: Transport norm order of the robust methods
        n_components: Fixed PCR/PCC component count (tuned when None)
        standardize_scores: Standardize PCC scores
        intercept: Prepend a column of ones to the predictors
        alpha: CVaR level
        delta: Failure probability of the generalization bound
        solver: SolverConfig overrides
    """
    kind: str
    family: str = ''
    outlier_kind: str = ''
    p: int = 5
    K: int = 3
    n_train: int = 100
    n_test: int = 60
    outlier_fractions: List[float] = field(default_factory=list)
    outlier_rho: Optional[float] = None
    n_runs: int = 10
    seed: int = 0
    methods: List[str] = field(default_factory=list)
    grid: List[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    folds: int = 5
    placement: str = ''
    r: Any = 2.0
    n_components: Optional[int] = None
    standardize_scores: bool = False
    intercept: bool = False
    alpha: float = 0.8
    delta: float = 0.1
    solver: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PRESETS:
            raise ConfigError(f"kind: unknown experiment '{self.kind}', expected one of {sorted(PRESETS)}")
        preset = PRESETS[self.kind]
        self.family = self.family or preset['family']
        self.outlier_kind = self.outlier_kind or preset['outlier_kind']
        self.placement = self.placement or preset['placement']
        if not self.outlier_fractions:
            self.outlier_fractions = list(preset['outlier_fractions'])
        if not self.methods:
            self.methods = list(preset['methods'])
        self._validate()

    def _validate(self):
        if self.family != PRESETS[self.kind]['family']:
            raise ConfigError(f"family: '{self.family}' does not match experiment '{self.kind}'")
        for name in ('p', 'K', 'n_train', 'n_test', 'n_runs', 'folds'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name}: expected a positive integer, got {value!r}")
        if self.folds < 2:
            raise ConfigError(f"folds: must be >= 2, got {self.folds}")
        if self.folds > self.n_train:
            raise ConfigError(f"folds: {self.folds} folds need at least as many training samples (n_train={self.n_train})")
        if self.family == 'MLG' and self.K < 2:
            raise ConfigError(f"K: classification needs at least two classes, got {self.K}")
        if any(not 0.0 <= float(f) <= 1.0 for f in self.outlier_fractions):
            raise ConfigError(f"outlier_fractions: values must lie in [0, 1], got {self.outlier_fractions}")
        if not self.grid or any(not float(v) > 0 for v in self.grid):
            raise ConfigError(f"grid: expected a nonempty list of positive values, got {self.grid}")
        allowed = MLR_METHODS if self.family == 'MLR' else MLG_METHODS
        unknown = [m for m in self.methods if m not in allowed]
        if unknown:
            raise ConfigError(f"methods: {unknown} not available for {self.family}, expected a subset of {allowed}")
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"placement: expected one of {PLACEMENTS}, got '{self.placement}'")
        features = self.p + (1 if self.intercept else 0)
        if self.n_components is not None and not 1 <= self.n_components <= features:
            raise ConfigError(f"n_components: must lie in [1, {features}], got {self.n_components}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha: must lie in (0, 1), got {self.alpha}")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta: must lie in (0, 1), got {self.delta}")
        try:
            self.r = parse_order(self.r)
        except ValueError as e:
            raise ConfigError(f"r: {e}") from e
        self.outlier_fractions = [float(f) for f in self.outlier_fractions]
        self.grid = [float(v) for v in self.grid]
        self.solver_config()

    def solver_config(self, base=None):
        """SolverConfig with this experiment's overrides applied on top of base"""
        settings = (base or SolverConfig()).settings()
        unknown = set(self.solver) - set(settings)
        if unknown:
            raise ConfigError(f"solver: unknown key(s) {sorted(unknown)}")
        settings.update(self.solver)
        return SolverConfig(**settings)

    def to_dict(self):
        payload = asdict(self)
        payload['r'] = format_order(self.r)
        return payload

    @classmethod
    def from_dict(cls, payload):
        if not isinstance(payload, dict):
            raise ConfigError("Experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in payload:
            if key not in known:
                raise ConfigError(f"Unknown experiment config key '{key}'")
        if 'kind' not in payload:
            raise ConfigError("Experiment config is missing required key 'kind'")
        return cls(**payload)


def load_experiment_config(path):
    """Read and validate an experiment JSON file"""
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from e
    logger.info(f"Loaded experiment config from {path}")
    return ExperimentConfig.from_dict(payload)
