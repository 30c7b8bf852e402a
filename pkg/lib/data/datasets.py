"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Dataset containers for paired samples (x_i, y_i) in regression and           ║
║   one-hot classification flavors, with per-sample outlier flags.               ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Optional

import numpy as np

from lib.exceptions import DomainError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    """
    N paired samples with X of shape (N, p) and Y of shape (N, K)

    Attributes:
        X: Predictor matrix
        Y: Response matrix (real for regression, one-hot for classification)
        outlier_mask: Boolean flag per sample
        true_B: Ground truth p x K coefficients when known
    """
    X: np.ndarray
    Y: np.ndarray
    outlier_mask: Optional[np.ndarray] = None
    true_B: Optional[np.ndarray] = field(default=None, repr=False)

    family: ClassVar[str] = ''

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise ShapeError(f"X and Y must be 2-D, got {self.X.shape} and {self.Y.shape}")
        if self.X.shape[0] < 1:
            raise ShapeError("Dataset must contain at least one sample")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ShapeError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if self.outlier_mask is None:
            self.outlier_mask = np.zeros(self.X.shape[0], dtype=bool)
        self.outlier_mask = np.asarray(self.outlier_mask, dtype=bool)
        if self.outlier_mask.shape != (self.X.shape[0],):
            raise ShapeError(f"outlier_mask must have length {self.X.shape[0]}")
        if self.true_B is not None:
            self.true_B = np.asarray(self.true_B, dtype=float)
            if self.true_B.shape != (self.p, self.K):
                raise ShapeError(f"true_B must be {self.p} x {self.K}, got {self.true_B.shape}")

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def K(self):
        return self.Y.shape[1]

    @property
    def n_outliers(self):
        return int(self.outlier_mask.sum())

    def subset(self, indices):
        """Return a dataset restricted to the given row indices"""
        indices = np.asarray(indices)
        return type(self)(self.X[indices], self.Y[indices], self.outlier_mask[indices], self.true_B)

    def canonical_order(self):
        """Row permutation that sorts samples lexicographically by (x, y)"""
        keys = np.column_stack([self.X, self.Y])
        return np.lexsort(keys.T[::-1])

    def canonicalized(self):
        """Copy of the dataset with rows in canonical order"""
        return self.subset(self.canonical_order())

    def with_intercept(self):
        """Copy with a leading column of ones in X (ground truth dropped)"""
        ones = np.ones((self.N, 1))
        return type(self)(np.hstack([ones, self.X]), self.Y, self.outlier_mask, None)


@dataclass
class RegressionDataset(Dataset):
    family: ClassVar[str] = 'MLR'


@dataclass
class ClassificationDataset(Dataset):
    family: ClassVar[str] = 'MLG'

    def __post_init__(self):
        super().__post_init__()
        if not is_one_hot(self.Y):
            raise DomainError("Classification responses must be one-hot rows")

    @property
    def labels(self):
        return np.argmax(self.Y, axis=1)

    @classmethod
    def from_labels(cls, X, labels, K, outlier_mask=None, true_B=None):
        """Build a dataset from integer class labels in [0, K)"""
        labels = np.asarray(labels, dtype=int)
        if labels.size and (labels.min() < 0 or labels.max() >= K):
            raise DomainError(f"Labels must lie in [0, {K})")
        return cls(X, np.eye(K)[labels], outlier_mask, true_B)


def is_one_hot(Y):
    """True when every row of Y has exactly one 1 and zeros elsewhere"""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        return False
    binary = np.all((Y == 0.0) | (Y == 1.0))
    return bool(binary and np.all(Y.sum(axis=1) == 1.0))


DATASET_TYPES = {
    'MLR': RegressionDataset,
    'MLG': ClassificationDataset,
}
