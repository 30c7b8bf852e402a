"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Cross-validated hyperparameter selection over a grid with seeded k-fold      ║
║   splits.                                                                      ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import logging

import numpy as np
from sklearn.model_selection import KFold

from lib.exceptions import DomainError, DroToolkitError
from lib.harness.methods import fit_method
from lib.losses import mlg_batch
from lib.metrics import wmse
from lib.models.baselines import fit_ols

logger = logging.getLogger(__name__)


def fold_indices(n, folds, seed):
    """
    Seeded shuffled k-fold partition of range(n)

    Returns:
        list: (train_indices, validation_indices) pairs; validation sets are
        disjoint and cover range(n)
    """
    if folds < 2:
        raise DomainError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise DomainError(f"{folds} folds over {n} samples leave a validation set empty")
    splitter = KFold(n_splits=folds, shuffle=True, random_state=int(seed))
    return list(splitter.split(np.zeros((n, 1))))


def validation_score(model, validation, sigma_hat=None):
    """Validation WMSE (regression, weighted by sigma_hat) or mean log-loss (classification)"""
    if validation.family == 'MLR':
        return wmse(validation.Y, model.predict(validation.X), sigma_hat)
    values, _ = mlg_batch(model.B, validation.X, validation.Y, validate=False)
    return float(np.mean(values))


def cv_scores(data, method, grid, folds=5, seed=0, **fit_options):
    """
    Mean validation score of every grid value

    Regression folds share one weight covariance per fold, taken from an OLS
    fit on that fold's training part, so scores are comparable across the grid.

    Returns:
        dict: grid value -> mean validation score (inf when a fit failed)
    """
    splits = fold_indices(data.N, folds, seed)
    totals = {value: 0.0 for value in grid}
    for train_idx, val_idx in splits:
        train, validation = data.subset(train_idx), data.subset(val_idx)
        sigma_hat = None
        if data.family == 'MLR':
            sigma_hat = fit_ols(train).diagnostics['train_error_cov']
        for value in grid:
            try:
                model = fit_method(method, train, value, **fit_options)
                score = validation_score(model, validation, sigma_hat)
            except DroToolkitError as e:
                logger.warning(f"{method} with value {value} failed on a fold: {e}")
                score = np.inf
            totals[value] += score
    return {value: total / len(splits) for value, total in totals.items()}


def cv_tune(data, method, grid, folds=5, seed=0, **fit_options):
    """
    Pick the grid value with the smallest mean validation score

    Ties go to the larger (more regularized) value.

    Args:
        data: Training Dataset
        method: Method key
        grid: Nonempty candidate values
        folds: Number of folds
        seed: Shuffle seed of the fold split
        **fit_options: Passed to fit_method (r, solver_cfg, standardize_scores)

    Returns:
        Selected grid value
    """
    grid = list(grid)
    if not grid:
        raise DomainError("Tuning grid is empty")
    fold_indices(data.N, folds, seed)
    if len(grid) == 1:
        return grid[0]
    scores = cv_scores(data, method, grid, folds, seed, **fit_options)
    best = min(grid, key=lambda value: (scores[value], -value))
    logger.debug(f"{method}: selected {best} from {len(grid)} candidates (score {scores[best]:.6g})")
    return best
