"""Tests for the evaluation metrics and the generalization bound"""

import logging
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from lib.data import make_mlg_dataset
from lib.exceptions import DomainError, FactorizationError, ShapeError
from lib.metrics import (
    BoundInputs,
    MetricReport,
    ccr,
    complexity_constant,
    cvar,
    empirical_radius,
    evaluate_model,
    generalization_bound,
    mpd,
    mpd_per_point,
    train_error_cov,
    wmse,
)
from lib.models import DroConfig, FittedModel, fit_dro, fit_ols
from lib.solver import SolverConfig


def test_wmse_examples(rng):
    Y = rng.normal(size=(8, 3))
    Y_hat = rng.normal(size=(8, 3))
    assert wmse(Y, Y_hat, np.eye(3)) == pytest.approx(np.mean(np.sum((Y - Y_hat) ** 2, axis=1)))
    assert wmse(Y, Y, np.eye(3)) == 0.0
    assert wmse([[1.0], [3.0]], [[0.0], [0.0]], [[2.0]]) == pytest.approx(2.5)


def test_wmse_rejects_indefinite_covariance():
    with pytest.raises(FactorizationError):
        wmse(np.ones((2, 2)), np.zeros((2, 2)), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ShapeError):
        wmse(np.ones((2, 3)), np.zeros((2, 3)), np.eye(2))


def test_train_error_cov_examples(rng):
    Y = rng.normal(size=(10, 2))
    np.testing.assert_allclose(train_error_cov(Y, Y, 1, 2), 1e-8 * np.eye(2), atol=0)
    sigma = train_error_cov(np.ones((4, 1)), np.zeros((4, 1)), 1, 1)
    assert sigma[0, 0] == pytest.approx(4.0 / 3.0 + 1e-8, abs=1e-15)


def test_train_error_cov_matches_gram(rng):
    Y, Y_hat = rng.normal(size=(2, 30, 3))
    R = Y - Y_hat
    expected = R.T @ R / (30 - 2 * 3) + 1e-8 * np.eye(3)
    np.testing.assert_allclose(train_error_cov(Y, Y_hat, 2, 3), expected, rtol=1e-12)


def test_train_error_cov_small_sample_fallback(caplog, rng):
    Y = rng.normal(size=(5, 2))
    with caplog.at_level(logging.WARNING):
        sigma = train_error_cov(Y, np.zeros((5, 2)), 3, 2)
    assert 'does not exceed' in caplog.text
    np.testing.assert_allclose(sigma, Y.T @ Y + 1e-8 * np.eye(2))


def test_cvar_examples(rng):
    assert cvar(np.arange(1, 11), 0.8) == pytest.approx(9.5)
    assert cvar([2.5] * 7, 0.8) == 2.5
    losses = rng.exponential(size=37)
    for alpha in (0.5, 0.8, 0.95):
        tail = math.ceil((1 - alpha) * 37)
        assert cvar(losses, alpha) == pytest.approx(np.mean(sorted(losses, reverse=True)[:tail]))
        assert cvar(losses, alpha) >= np.mean(losses)


def test_cvar_errors():
    with pytest.raises(DomainError):
        cvar([], 0.8)
    with pytest.raises(DomainError):
        cvar([1.0], 1.0)


def test_ccr_examples():
    assert ccr([0, 1, 2], [0, 1, 2]) == 1.0
    assert ccr([0, 1], [1, 0]) == 0.0
    assert ccr([0, 1, 2, 2], [0, 1, 0, 1]) == 0.5
    with pytest.raises(ShapeError):
        ccr([0, 1], [0])


def test_mpd_halfspace_example():
    B = np.array([[1.0, -1.0], [0.0, 0.0]])
    assert mpd(B, np.array([[2.0, 0.0]])) == pytest.approx(2.0)
    assert mpd(B, np.array([[0.0, 5.0]])) == 0.0


def test_mpd_requires_two_classes():
    with pytest.raises(DomainError):
        mpd(np.ones((2, 1)), np.ones((1, 2)))


def _mpd_linear_program(B, x):
    """Smallest l1 move of x onto any rival class, by variable splitting"""
    p, K = B.shape
    k = int(np.argmax(x @ B))
    best = math.inf
    for j in range(K):
        if j == k:
            continue
        d = B[:, j] - B[:, k]
        # x~ = x + u - v with u, v >= 0 and d'x~ >= 0
        result = linprog(np.ones(2 * p), A_ub=np.concatenate([-d, d])[None, :], b_ub=[d @ x],
                         bounds=[(0, None)] * (2 * p), method='highs')
        best = min(best, result.fun if result.status == 0 else math.inf)
    return best


def test_mpd_matches_linear_program(rng):
    for _ in range(50):
        p, K = rng.integers(2, 5), rng.integers(2, 5)
        B = rng.normal(size=(p, K))
        X = rng.normal(size=(3, p))
        expected = min(_mpd_linear_program(B, x) for x in X)
        assert mpd(B, X) == pytest.approx(expected, abs=1e-6)


def test_mpd_is_invariant_to_common_shift(rng):
    B = rng.normal(size=(4, 3))
    X = rng.normal(size=(20, 4))
    shifted = B + rng.normal(size=(4, 1))
    np.testing.assert_allclose(mpd_per_point(shifted, X), mpd_per_point(B, X), rtol=1e-10)


def test_bound_examples():
    inputs = BoundInputs(train_avg_loss=0.0, R_x=1.0, C_bar=1.0 - math.log(2), K=2, N=4, delta=2 / math.e)
    assert generalization_bound(inputs) == pytest.approx(1.0 + math.sqrt(2.0), abs=1e-12)
    limit = BoundInputs(train_avg_loss=0.7, R_x=3.0, C_bar=2.0, K=3, N=10 ** 12, delta=0.1)
    assert abs(generalization_bound(limit) - 0.7) <= 1e-4


@pytest.mark.parametrize('kwargs', [{'delta': 0.0}, {'delta': 1.0}, {'N': 0}, {'C_bar': -1.0}])
def test_bound_input_validation(kwargs):
    values = dict(train_avg_loss=0.5, R_x=1.0, C_bar=1.0, K=3, N=100, delta=0.1)
    values.update(kwargs)
    with pytest.raises(DomainError):
        BoundInputs(**values)


def test_complexity_constant_and_radius(rng):
    B = rng.normal(size=(4, 3))
    col_norms = np.sqrt((B ** 2).sum(axis=0))
    sr = math.sqrt(3) * math.sqrt((col_norms ** 2).sum()) + col_norms.sum()
    one_s = math.sqrt(3) * math.sqrt((np.abs(B).sum(axis=1) ** 2).sum()) + col_norms.sum()
    assert complexity_constant(B, 2, 'SR') == pytest.approx(sr)
    assert complexity_constant(B, 2, '1S') == pytest.approx(one_s)
    X = np.array([[3.0, 4.0], [1.0, -1.0]])
    assert empirical_radius(X, 2) == 5.0
    assert empirical_radius(X, 1) == 7.0


def test_bound_of_fitted_classifier(mlg_data, mlg_test_data, quick_solver):
    model = fit_dro(mlg_data, DroConfig('MLG', 'SR', epsilon=0.1), quick_solver)
    report = evaluate_model(model, mlg_test_data, delta=0.1)

    scores = mlg_data.X @ model.B
    train_loss = np.mean(np.log(np.exp(scores).sum(axis=1)) - (scores * mlg_data.Y).sum(axis=1))
    radius = max(math.sqrt(sum(v * v for v in x)) for x in mlg_data.X)
    col_norms = np.sqrt((model.B ** 2).sum(axis=0))
    c_bar = math.sqrt(3) * math.sqrt((col_norms ** 2).sum()) + col_norms.sum()
    c = radius * c_bar + math.log(3)
    expected = train_loss + 2 * c / math.sqrt(100) + c * math.sqrt(8 * math.log(2 / 0.1) / 100)
    assert report.bound_value == pytest.approx(expected, abs=1e-10)


def test_evaluate_classifier(mlg_data, mlg_test_data, quick_solver):
    model = fit_dro(mlg_data, DroConfig('MLG', '1S', epsilon=0.1), quick_solver)
    report = evaluate_model(model, mlg_test_data)
    assert 0.0 <= report.ccr <= 1.0
    assert report.cvar_logloss >= report.avg_logloss
    assert report.mpd >= 0.0
    assert math.isfinite(report.bound_value)
    assert math.isnan(report.wmse)
    assert len(report.per_sample_losses) == mlg_test_data.N
    row = report.to_row()
    assert row['logloss'] == report.avg_logloss
    assert row['bound'] == report.bound_value
    assert report.to_dict()['wmse'] is None


def test_evaluate_regression(mlr_data, mlr_test_data):
    model = fit_ols(mlr_data)
    report = evaluate_model(model, mlr_test_data)
    assert report.wmse > 0
    assert report.cvar_wmse >= report.wmse
    assert math.isnan(report.ccr) and math.isnan(report.bound_value)
    assert evaluate_model(model, mlr_test_data, sigma_hat=np.eye(3)).wmse == pytest.approx(
        np.mean(np.sum((mlr_test_data.Y - mlr_test_data.X @ model.B) ** 2, axis=1)))


def test_evaluate_errors(mlr_data, mlg_data):
    with pytest.raises(ShapeError):
        evaluate_model(fit_ols(mlr_data), mlg_data)
    with pytest.raises(DomainError):
        evaluate_model(FittedModel(np.zeros((5, 3)), DroConfig('MLR')), mlr_data)


def test_models_without_training_diagnostics_carry_no_bound(mlg_data, mlg_test_data):
    model = FittedModel(np.zeros((5, 3)), DroConfig('MLG'))
    assert math.isnan(evaluate_model(model, mlg_test_data).bound_value)
    assert MetricReport().to_dict()['mpd'] is None


@pytest.mark.slow
def test_bound_covers_test_loss():
    covered = 0
    solver = SolverConfig(max_iters=300, c=0.5)
    for run in range(200):
        train = make_mlg_dataset(5, 3, 100, seed=7, run=run, purpose='train')
        test = make_mlg_dataset(5, 3, 500, seed=7, run=run, true_B=train.true_B, purpose='test')
        model = fit_dro(train, DroConfig('MLG', 'SR', epsilon=0.1), solver)
        report = evaluate_model(model, test, delta=0.1)
        covered += report.bound_value >= report.avg_logloss
    assert covered >= 170
