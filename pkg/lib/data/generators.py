"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Synthetic data generators for the regression and classification              ║
║   experiments: AR(1) covariances, seeded multivariate normal sampling, and     ║
║   injection of response outliers or covariate shift.                           ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝

Random streams are numpy PCG64 generators keyed by a SeedSequence built from
(seed, run index, CRC32 of a purpose tag). Normal draws use numpy's ziggurat
standard_normal, which is bit-reproducible for a given stream.
"""

import math
import zlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import softmax

from lib.data.datasets import ClassificationDataset, RegressionDataset
from lib.exceptions import DomainError, FactorizationError
from lib.norms import as_matrix

logger = logging.getLogger(__name__)

# Covariance parameters of the simulation protocol
MLR_X_RHO = 0.9
MLR_RESPONSE_RHO = -0.9
MLR_COVARIATE_RHO = -0.5
MLG_COVARIATE_RHO = 0.7

OUTLIER_KINDS = ('none', 'response', 'covariate')


def make_rng(seed, run=0, purpose='data'):
    """
    Create an independent random stream for (seed, run, purpose)

    Args:
        seed: Non-negative integer experiment seed
        run: Replication index
        purpose: Tag separating streams used for different things

    Returns:
        np.random.Generator: PCG64-backed generator
    """
    if int(seed) < 0 or int(run) < 0:
        raise DomainError(f"seed and run must be non-negative, got {seed}, {run}")
    tag = zlib.crc32(purpose.encode('utf-8'))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(run), tag])))


@dataclass(frozen=True)
class OutlierSpec:
    """
    Contamination settings

    Attributes:
        kind: 'none', 'response' or 'covariate'
        fraction: Share of rows turned into outliers
        rho: AR(1) parameter of the outlier noise covariance (None = protocol default)
    """
    kind: str = 'none'
    fraction: float = 0.0
    rho: Optional[float] = None

    def __post_init__(self):
        if self.kind not in OUTLIER_KINDS:
            raise DomainError(f"Unknown outlier kind '{self.kind}', expected one of {OUTLIER_KINDS}")
        if not 0.0 <= self.fraction <= 1.0:
            raise DomainError(f"Outlier fraction must lie in [0, 1], got {self.fraction}")
        if self.rho is not None and not abs(self.rho) < 1.0:
            raise DomainError(f"|rho| must be < 1, got {self.rho}")

    def count(self, n):
        """Number of outlier rows among n samples"""
        if self.kind == 'none':
            return 0
        return int(math.floor(round(self.fraction * n, 9)))

    def resolve_rho(self, default):
        return default if self.rho is None else self.rho


def ar1_cov(dim, rho):
    """
    AR(1) covariance with entries rho^|i-j|

    Args:
        dim: Matrix dimension
        rho: Correlation parameter, |rho| < 1

    Returns:
        np.ndarray: dim x dim symmetric positive definite matrix
    """
    if dim < 1:
        raise DomainError(f"dim must be >= 1, got {dim}")
    if not abs(rho) < 1.0:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    idx = np.arange(dim)
    lags = np.abs(np.subtract.outer(idx, idx))
    return np.power(float(rho), lags)


def sample_mvn(cov, n, rng):
    """
    Draw n zero-mean Gaussian rows with covariance cov (Cholesky factor times
    standard normal vectors)

    Returns:
        np.ndarray: n x dim sample matrix
    """
    cov = as_matrix(cov, 'covariance')
    if cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise FactorizationError("Covariance must be a symmetric square matrix")
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise FactorizationError(f"Covariance is not positive definite: {e}")
    z = rng.standard_normal((int(n), cov.shape[0]))
    return z @ factor.T


def outlier_indices(n, spec, rng):
    """Seeded shuffle of the row indices, prefix of length spec.count(n)"""
    count = spec.count(n)
    if count == 0:
        return np.empty(0, dtype=int)
    return np.sort(rng.permutation(n)[:count])


def draw_coefficients(p, K, seed, run=0):
    """Ground-truth coefficients with standard normal entries"""
    return make_rng(seed, run, 'coefficients').standard_normal((p, K))


def make_mlr_dataset(p, K, N, spec=None, seed=0, run=0, true_B=None, purpose='data'):
    """
    Generate a regression dataset y = B*'x + eta

    Args:
        p: Number of predictors
        K: Number of responses
        N: Number of samples
        spec: OutlierSpec (default: no outliers)
        seed: Experiment seed
        run: Replication index
        true_B: Ground truth to reuse (default: drawn from the run's coefficient stream)
        purpose: Stream tag, e.g. 'train' or 'test'

    Returns:
        RegressionDataset: Samples with outlier flags and the ground truth
    """
    spec = spec or OutlierSpec()
    if min(p, K, N) < 1:
        raise DomainError(f"p, K, N must be >= 1, got {p}, {K}, {N}")
    if true_B is None:
        true_B = draw_coefficients(p, K, seed, run)
    rng = make_rng(seed, run, purpose)

    X = sample_mvn(ar1_cov(p, MLR_X_RHO), N, rng)
    noise = rng.standard_normal((N, K))
    idx = outlier_indices(N, spec, rng)
    mask = np.zeros(N, dtype=bool)
    mask[idx] = True

    if spec.kind == 'covariate' and idx.size:
        X[idx] += sample_mvn(ar1_cov(p, spec.resolve_rho(MLR_COVARIATE_RHO)), idx.size, rng)
    Y = X @ true_B + noise
    if spec.kind == 'response' and idx.size:
        Y[idx] += sample_mvn(ar1_cov(K, spec.resolve_rho(MLR_RESPONSE_RHO)), idx.size, rng)

    logger.debug(f"Generated MLR dataset N={N} p={p} K={K} outliers={idx.size} ({spec.kind})")
    return RegressionDataset(X, Y, mask, true_B)


def make_mlg_dataset(p, K, N, spec=None, seed=0, run=0, true_B=None, purpose='data'):
    """
    Generate a classification dataset with labels drawn from one multinomial
    trial with probabilities softmax(B*'x + eta)

    Covariate outliers receive extra N(0, AR(1)) predictor noise before the
    labels are drawn, so the conditional label law is unchanged.

    Returns:
        ClassificationDataset: One-hot samples with outlier flags and the ground truth
    """
    spec = spec or OutlierSpec()
    if min(p, K, N) < 1:
        raise DomainError(f"p, K, N must be >= 1, got {p}, {K}, {N}")
    if spec.kind == 'response':
        raise DomainError("Response outliers are only defined for regression data")
    if true_B is None:
        true_B = draw_coefficients(p, K, seed, run)
    rng = make_rng(seed, run, purpose)

    X = rng.standard_normal((N, p))
    idx = outlier_indices(N, spec, rng)
    mask = np.zeros(N, dtype=bool)
    mask[idx] = True
    if spec.kind == 'covariate' and idx.size:
        X[idx] += sample_mvn(ar1_cov(p, spec.resolve_rho(MLG_COVARIATE_RHO)), idx.size, rng)

    noise = rng.standard_normal((N, K))
    probs = softmax(X @ true_B + noise, axis=1)
    u = rng.random(N)
    thresholds = np.cumsum(probs, axis=1)[:, :-1]
    labels = (u[:, None] >= thresholds).sum(axis=1)

    logger.debug(f"Generated MLG dataset N={N} p={p} K={K} outliers={idx.size} ({spec.kind})")
    return ClassificationDataset.from_labels(X, labels, K, mask, true_B)


def make_dataset(family, p, K, N, spec=None, seed=0, run=0, true_B=None, purpose='data'):
    """Dispatch to the generator of the given family ('MLR' or 'MLG')"""
    generators = {'MLR': make_mlr_dataset, 'MLG': make_mlg_dataset}
    if family not in generators:
        raise DomainError(f"Unknown family '{family}'")
    return generators[family](p, K, N, spec, seed=seed, run=run, true_B=true_B, purpose=purpose)
