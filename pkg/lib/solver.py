"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Full-batch subgradient descent. Returns the best iterate seen, records       ║
║   the best-so-far objective every iteration, and stops when the best value     ║
║   stalls over a sliding window.                                                ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import math
import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

from lib.exceptions import ConfigError, SolverError

logger = logging.getLogger(__name__)

STEP_RULES = ('constant', 'diminishing', 'geometric')


@dataclass
class SolverConfig:
    """
    Subgradient descent settings

    Attributes:
        max_iters: Iteration cap
        step_rule: 'constant' (c), 'diminishing' (c / sqrt(t)) or
            'geometric' (c * decay^(t-1) along the unit subgradient)
        c: Base step size
        decay: Ratio of the geometric rule
        tol: Relative improvement of the best objective below which the
            window test declares convergence
        window: Iterations spanned by the convergence test
        init: Starting matrix (zeros when None)
    """
    max_iters: int = 5000
    step_rule: str = 'diminishing'
    c: float = 0.1
    decay: float = 0.999
    tol: float = 1e-6
    window: int = 50
    init: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.max_iters) < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.step_rule not in STEP_RULES:
            raise ConfigError(f"step_rule must be one of {STEP_RULES}, got '{self.step_rule}'")
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        if not 0 < self.decay <= 1:
            raise ConfigError(f"decay must lie in (0, 1], got {self.decay}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if int(self.window) < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        self.max_iters = int(self.max_iters)
        self.window = int(self.window)

    def step(self, t):
        """Step length at iteration t (1-based)"""
        if self.step_rule == 'constant':
            return self.c
        if self.step_rule == 'diminishing':
            return self.c / math.sqrt(t)
        return self.c * self.decay ** (t - 1)

    def settings(self):
        """Serializable settings (without the initial matrix)"""
        settings = asdict(self)
        settings.pop('init')
        return settings

    def with_init(self, init):
        """Copy of this config starting from another matrix"""
        return SolverConfig(self.max_iters, self.step_rule, self.c, self.decay, self.tol, self.window, init)


@dataclass
class MinimizeResult:
    solution: np.ndarray
    trace: List[float]
    converged: bool
    iterations: int

    @property
    def objective(self):
        return self.trace[-1]


def minimize(objective, subgradient, shape, cfg=None):
    """
    Minimize a convex function by subgradient descent

    Args:
        objective: Callable mapping a matrix of the given shape to a float
        subgradient: Callable mapping a matrix to a subgradient of the same shape
        shape: Shape of the decision matrix
        cfg: SolverConfig (defaults when None)

    Returns:
        MinimizeResult: best iterate, best-so-far trace, convergence flag, iterations run
    """
    cfg = cfg or SolverConfig()
    x = np.zeros(shape) if cfg.init is None else np.array(cfg.init, dtype=float).reshape(shape)

    value = float(objective(x))
    if not math.isfinite(value):
        raise SolverError(f"Objective is not finite at the initial point ({value})", trace=[], iteration=0)
    best_x, best_value = x.copy(), value
    trace = [best_value]
    converged = False
    normalized = cfg.step_rule == 'geometric'

    for t in range(1, cfg.max_iters + 1):
        g = np.asarray(subgradient(x), dtype=float)
        if not np.all(np.isfinite(g)):
            raise SolverError(f"Subgradient is not finite at iteration {t}", trace=trace, iteration=t)
        g_norm = float(np.linalg.norm(g))
        if g_norm == 0.0:
            # Zero subgradient certifies optimality of a convex objective.
            converged = True
            break
        direction = g / g_norm if normalized else g
        x = x - cfg.step(t) * direction

        value = float(objective(x))
        if not math.isfinite(value):
            raise SolverError(f"Objective diverged at iteration {t} ({value})", trace=trace, iteration=t)
        if value < best_value:
            best_value, best_x = value, x.copy()
        trace.append(best_value)

        if t >= cfg.window:
            previous = trace[t - cfg.window]
            if previous - best_value <= cfg.tol * max(abs(previous), 1e-12):
                converged = True
                break

    iterations = len(trace) - 1
    logger.debug(f"Subgradient descent stopped after {iterations} iterations, best objective {best_value:.6g}, "
                 f"converged={converged}")
    return MinimizeResult(best_x, trace, converged, iterations)
