"""Tests for the robust regularizers, objectives and fits"""

import math

import numpy as np
import pytest

from lib.data import RegressionDataset, make_mlr_dataset
from lib.exceptions import ConfigError, DomainError, ShapeError
from lib.losses import HUBER_RESIDUAL, L1_RESIDUAL, RESIDUAL_LOSSES, ResidualLoss
from lib.models import (
    DroConfig,
    FittedModel,
    augmented_matrix,
    dro_objective,
    dro_subgradient,
    fit_dro,
    load_model,
    mlg_regularizer,
    mlr_regularizer,
    save_model,
)
from lib.models.dro import regularizer
from lib.norms import dual_exponent, lrs_norm
from lib.solver import SolverConfig

DUAL_ORDERS = [1.0, 1.5, 2.0, 3.0, math.inf]
ALL_METHODS = [('MLR', 'SR'), ('MLR', '1S'), ('MLG', 'SR'), ('MLG', '1S')]


def _pnorm(values, q):
    values = [abs(v) for v in values]
    if q == math.inf:
        return max(values)
    return sum(v ** q for v in values) ** (1.0 / q)


def _mlr_sr_formula(B, r):
    """eps L (sum_i ||b_i||_s^r)^(1/r) with b_i = (-B_1i, ..., -B_pi, e_i)"""
    p, K = len(B), len(B[0])
    s = dual_exponent(r)
    row_norms = []
    for i in range(K):
        b_i = [-B[j][i] for j in range(p)] + [1.0 if k == i else 0.0 for k in range(K)]
        row_norms.append(_pnorm(b_i, s))
    return _pnorm(row_norms, r)


def _mlr_1s_formula(B, r):
    """eps L ||v||_s with v_j the absolute column sums of the augmented matrix"""
    p, K = len(B), len(B[0])
    s = dual_exponent(r)
    v = [sum(abs(B[j][i]) for i in range(K)) for j in range(p)] + [1.0] * K
    return _pnorm(v, s)


def _mlg_formula(B, r, variant):
    p, K = len(B), len(B[0])
    s = dual_exponent(r)
    class_norms = [_pnorm([B[j][k] for j in range(p)], s) for k in range(K)]
    label_term = sum(class_norms)
    if variant == 'SR':
        return K ** (1.0 / s) * _pnorm(class_norms, r) + label_term
    feature_sums = [sum(abs(B[j][k]) for k in range(K)) for j in range(p)]
    return K ** (1.0 / s) * _pnorm(feature_sums, s) + label_term


def test_augmented_matrix_blocks(rng):
    B = rng.normal(size=(4, 3))
    augmented = augmented_matrix(B)
    assert augmented.shape == (3, 7)
    np.testing.assert_array_equal(augmented[:, :4], -B.T)
    np.testing.assert_array_equal(augmented[:, 4:], np.eye(3))


@pytest.mark.parametrize('r', DUAL_ORDERS)
def test_mlr_regularizer_at_zero(r):
    B = np.zeros((4, 3))
    s = dual_exponent(r)
    assert mlr_regularizer(B, DroConfig('MLR', 'SR', r=r, epsilon=1.0)) == pytest.approx(3 ** (1.0 / r))
    assert mlr_regularizer(B, DroConfig('MLR', '1S', r=r, epsilon=1.0)) == pytest.approx(3 ** (1.0 / s))


@pytest.mark.parametrize('variant', ['SR', '1S'])
@pytest.mark.parametrize('r', DUAL_ORDERS)
def test_single_response_reduces_to_vector_penalty(rng, variant, r):
    beta = rng.normal(size=4)
    cfg = DroConfig('MLR', variant, r=r, epsilon=0.3)
    expected = 0.3 * _pnorm(list(-beta) + [1.0], dual_exponent(r))
    assert mlr_regularizer(beta.reshape(4, 1), cfg) == pytest.approx(expected, rel=1e-12)


def test_mlr_regularizer_matches_scalar_formula(rng):
    B = rng.normal(size=(2, 2))
    sr = DroConfig('MLR', 'SR', r=2, epsilon=1.0)
    one_s = DroConfig('MLR', '1S', r=2, epsilon=1.0)
    assert mlr_regularizer(B, sr) == pytest.approx(_mlr_sr_formula(B.tolist(), 2.0), abs=1e-12)
    assert mlr_regularizer(B, one_s) == pytest.approx(_mlr_1s_formula(B.tolist(), 2.0), abs=1e-12)


def test_rewrite_identity_on_random_matrices(rng):
    for _ in range(1000):
        p, K = rng.integers(1, 5, size=2)
        r = DUAL_ORDERS[rng.integers(len(DUAL_ORDERS))] if rng.random() < 0.5 else rng.uniform(1.2, 5.0)
        epsilon, lipschitz = rng.uniform(0.01, 2.0, size=2)
        B = rng.normal(size=(p, K))
        sr = DroConfig('MLR', 'SR', r=r, epsilon=epsilon, lipschitz=lipschitz)
        one_s = DroConfig('MLR', '1S', r=r, epsilon=epsilon, lipschitz=lipschitz)
        scale = epsilon * lipschitz
        assert abs(mlr_regularizer(B, sr) - scale * _mlr_sr_formula(B.tolist(), r)) <= 1e-10
        assert abs(mlr_regularizer(B, one_s) - scale * _mlr_1s_formula(B.tolist(), r)) <= 1e-10


def test_mlg_regularizer_at_zero():
    for variant in ('SR', '1S'):
        assert mlg_regularizer(np.zeros((5, 3)), DroConfig('MLG', variant, epsilon=1.0)) == 0.0


@pytest.mark.parametrize('r', DUAL_ORDERS)
def test_two_class_reduction(rng, r):
    beta = rng.normal(size=4)
    B = np.column_stack([beta, np.zeros(4)])
    s = dual_exponent(r)
    expected = _pnorm(beta, s)
    assert lrs_norm(B, s, r) == pytest.approx(expected, rel=1e-12)
    assert lrs_norm(B, s, 1) == pytest.approx(expected, rel=1e-12)
    assert lrs_norm(B.T, 1, s) == pytest.approx(expected, rel=1e-12)
    for variant in ('SR', '1S'):
        penalty = mlg_regularizer(B, DroConfig('MLG', variant, r=r, epsilon=1.0))
        assert penalty == pytest.approx((2 ** (1.0 / s) + 1.0) * expected, rel=1e-12)


@pytest.mark.parametrize('variant', ['SR', '1S'])
def test_mlg_regularizer_matches_scalar_formula(rng, variant):
    for _ in range(50):
        B = rng.normal(size=(3, 3))
        r = DUAL_ORDERS[rng.integers(len(DUAL_ORDERS))]
        cfg = DroConfig('MLG', variant, r=r, epsilon=1.0)
        assert mlg_regularizer(B, cfg) == pytest.approx(_mlg_formula(B.tolist(), r, variant), abs=1e-10)


def test_regression_objective_example():
    data = RegressionDataset(np.array([[1.0, -2.0]]), np.array([[3.0, 4.0]]))
    cfg = DroConfig('MLR', '1S', r=2, epsilon=0.1)
    assert dro_objective(np.zeros((2, 2)), data, cfg) == pytest.approx(5.0 + 0.1 * math.sqrt(2.0))


def test_classification_objective_at_zero(mlg_data):
    cfg = DroConfig('MLG', 'SR', epsilon=0.5)
    assert dro_objective(np.zeros((5, 3)), mlg_data, cfg) == pytest.approx(math.log(3.0))


@pytest.mark.parametrize('variant', ['SR', '1S'])
def test_objective_composes_loss_and_penalty(rng, mlr_data, variant):
    B = rng.normal(size=(5, 3))
    cfg = DroConfig('MLR', variant, r=3.0, epsilon=0.2)
    losses = [np.linalg.norm(y - B.T @ x) for x, y in zip(mlr_data.X, mlr_data.Y)]
    expected = np.mean(losses) + 0.2 * _mlr_sr_formula(B.tolist(), 3.0) if variant == 'SR' else \
        np.mean(losses) + 0.2 * _mlr_1s_formula(B.tolist(), 3.0)
    assert dro_objective(B, mlr_data, cfg) == pytest.approx(expected, rel=1e-12)


def test_objective_rejects_mismatched_shapes(mlr_data, mlg_data):
    with pytest.raises(ShapeError):
        dro_objective(np.zeros((4, 3)), mlr_data, DroConfig('MLR'))
    with pytest.raises(ShapeError):
        dro_objective(np.zeros((5, 3)), mlg_data, DroConfig('MLR'))


def test_classification_subgradient_at_zero(mlg_data):
    cfg = DroConfig('MLG', 'SR', epsilon=0.5)
    expected = mlg_data.X.T @ (np.full((mlg_data.N, 3), 1.0 / 3.0) - mlg_data.Y) / mlg_data.N
    np.testing.assert_allclose(dro_subgradient(np.zeros((5, 3)), mlg_data, cfg), expected, atol=1e-14)


def test_regression_sr_subgradient_matches_finite_differences(rng, mlr_data):
    cfg = DroConfig('MLR', 'SR', r=2, epsilon=0.3)
    h = 1e-6
    for _ in range(20):
        B = rng.normal(size=(5, 3))
        numeric = np.zeros_like(B)
        for index in np.ndindex(*B.shape):
            step = np.zeros_like(B)
            step[index] = h
            numeric[index] = (dro_objective(B + step, mlr_data, cfg) - dro_objective(B - step, mlr_data, cfg)) / (2 * h)
        analytic = dro_subgradient(B, mlr_data, cfg)
        assert np.linalg.norm(analytic - numeric) <= 1e-5 * np.linalg.norm(numeric)


@pytest.mark.parametrize('r', [2.0, math.inf])
def test_one_s_subgradient_inequality_at_zero_row(rng, mlr_data, r):
    cfg = DroConfig('MLR', '1S', r=r, epsilon=0.5)
    B = rng.normal(size=(5, 3))
    B[2] = 0.0
    G = dro_subgradient(B, mlr_data, cfg)
    base = dro_objective(B, mlr_data, cfg)
    for _ in range(100):
        D = 0.1 * rng.normal(size=B.shape)
        assert dro_objective(B + D, mlr_data, cfg) >= base + np.sum(G * D) - 1e-12


@pytest.mark.parametrize('family,variant', ALL_METHODS)
def test_objective_is_convex(rng, mlr_data, mlg_data, family, variant):
    data = mlr_data if family == 'MLR' else mlg_data
    cfg = DroConfig(family, variant, r=rng.choice([1.5, 2.0, 3.0]), epsilon=0.2)
    for _ in range(20):
        B1, B2 = rng.normal(size=(2, 5, 3))
        t = rng.random()
        mixed = dro_objective(t * B1 + (1 - t) * B2, data, cfg)
        assert mixed <= t * dro_objective(B1, data, cfg) + (1 - t) * dro_objective(B2, data, cfg) + 1e-9


@pytest.mark.parametrize('family,variant', ALL_METHODS)
def test_penalty_is_monotone_in_radius(rng, family, variant):
    B = rng.normal(size=(5, 3))
    values = [regularizer(B, DroConfig(family, variant, epsilon=eps)) for eps in (1e-3, 0.01, 0.1, 1.0, 10.0)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_sr_penalty_does_not_split_per_response():
    B = np.array([[1.0, 2.0], [0.0, 1.0]])
    cfg = DroConfig('MLR', 'SR', r=2, epsilon=1.0)
    per_column = sum(mlr_regularizer(B[:, [k]], cfg) for k in range(2))
    assert abs(mlr_regularizer(B, cfg) - per_column) > 0.1


def test_config_validation():
    with pytest.raises(DomainError):
        DroConfig('MLR', epsilon=0.0)
    with pytest.raises(DomainError):
        DroConfig('MLR', epsilon=-1.0)
    with pytest.raises(DomainError):
        DroConfig('MLR', variant='2S')
    with pytest.raises(ConfigError):
        DroConfig('GLM')
    with pytest.raises(ConfigError):
        DroConfig('MLR', loss='hinge')
    assert DroConfig('MLR', epsilon=0.0, allow_zero_radius=True).epsilon == 0.0
    assert DroConfig.from_dict({'family': 'MLR', 'variant': '1S', 'epsilon': 0.0}).epsilon == 0.0


def test_config_names_and_dual_order():
    cfg = DroConfig('mlg', '1s', r='inf')
    assert cfg.method == 'mlg_1s'
    assert cfg.s == 1.0
    assert cfg.to_dict()['r'] == 'inf'


def test_unregularized_fit_recovers_noiseless_coefficients(precise_solver):
    source = make_mlr_dataset(3, 2, 400, seed=5)
    data = RegressionDataset(source.X, source.X @ source.true_B)
    cfg = DroConfig('MLR', 'SR', epsilon=0.0, allow_zero_radius=True)
    model = fit_dro(data, cfg, precise_solver)
    assert np.linalg.norm(model.B - source.true_B) <= 1e-3


@pytest.mark.parametrize('family,variant', ALL_METHODS)
def test_huge_radius_shrinks_to_zero(mlr_data, mlg_data, family, variant):
    data = mlr_data if family == 'MLR' else mlg_data
    start = np.ones((data.p, data.K))
    solver = SolverConfig(max_iters=3000, step_rule='geometric', c=1.0, decay=0.99, tol=1e-12, window=500)
    model = fit_dro(data, DroConfig(family, variant, epsilon=1e6), solver.with_init(start))
    assert model.iterations > 0
    assert model.objective < model.objective_trace[0]
    assert np.linalg.norm(model.B) <= 1e-3


def test_classification_fit_matches_restarts(rng, mlg_data, precise_solver):
    cfg = DroConfig('MLG', 'SR', epsilon=0.05)
    model = fit_dro(mlg_data, cfg, precise_solver)
    assert np.all(np.diff(model.objective_trace) <= 0)
    restarts = [
        fit_dro(mlg_data, cfg, precise_solver.with_init(rng.normal(size=(5, 3)))).objective
        for _ in range(5)
    ]
    assert model.objective <= min(restarts) + 1e-4


def test_fit_records_provenance(mlr_data, quick_solver):
    model = fit_dro(mlr_data, DroConfig('MLR', '1S', epsilon=0.1), quick_solver, seed=11)
    assert model.method == 'mlr_1s'
    assert (model.config.p, model.config.K) == (5, 3)
    assert model.seed == 11
    assert model.iterations == len(model.objective_trace) - 1
    assert model.solver['max_iters'] == 400
    assert model.diagnostics['n_train'] == 100
    assert model.diagnostics['train_error_cov'].shape == (3, 3)


def test_fit_rejects_wrong_family(mlg_data, quick_solver):
    with pytest.raises(ShapeError):
        fit_dro(mlg_data, DroConfig('MLR'), quick_solver)


def test_predictions_at_zero():
    mlr = FittedModel(np.zeros((3, 2)), DroConfig('MLR'))
    mlg = FittedModel(np.zeros((3, 4)), DroConfig('MLG'))
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(mlr.predict(x), np.zeros(2))
    np.testing.assert_allclose(mlg.predict(x), np.full(4, 0.25))
    assert mlg.predict_label(x) == 0
    with pytest.raises(ShapeError):
        mlr.predict_label(x)
    with pytest.raises(ShapeError):
        mlr.predict(np.ones(4))


def test_prediction_with_true_coefficients():
    source = make_mlr_dataset(4, 2, 10, seed=3)
    model = FittedModel(source.true_B, DroConfig('MLR'))
    np.testing.assert_array_equal(model.predict(source.X), source.X @ source.true_B)


def test_model_file_round_trip(tmp_path, mlr_data, quick_solver):
    model = fit_dro(mlr_data, DroConfig('MLR', 'SR', r=3.0, epsilon=0.07), quick_solver, seed=11)
    path = save_model(model, tmp_path / 'models' / 'mlr.json')
    loaded = load_model(path)
    np.testing.assert_array_equal(loaded.B, model.B)
    assert loaded.method == 'mlr_sr'
    assert loaded.config.r == 3.0
    assert loaded.config.epsilon == 0.07
    assert loaded.objective == model.objective
    np.testing.assert_array_equal(loaded.diagnostics['train_error_cov'], model.diagnostics['train_error_cov'])


def test_load_model_rejects_bad_files(tmp_path):
    broken = tmp_path / 'broken.json'
    broken.write_text('{"B": [[1.0]],')
    with pytest.raises(ConfigError):
        load_model(broken)
    incomplete = tmp_path / 'incomplete.json'
    incomplete.write_text('{"B": [[1.0]]}')
    with pytest.raises(ConfigError):
        load_model(incomplete)


def _huber_value(R, delta=1.0):
    norms = np.linalg.norm(R, axis=1)
    return np.where(norms <= delta, 0.5 * norms ** 2, delta * (norms - 0.5 * delta))


def test_registered_residual_losses():
    assert sorted(RESIDUAL_LOSSES) == ['huber', 'l1', 'l2']
    R = np.array([[0.3, -0.4], [3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(HUBER_RESIDUAL.value(R), [0.125, 4.5, 0.0])
    np.testing.assert_allclose(HUBER_RESIDUAL.gradient(R), [[0.3, -0.4], [0.6, 0.8], [0.0, 0.0]])
    np.testing.assert_allclose(L1_RESIDUAL.value(R), [0.7, 7.0, 0.0])
    assert L1_RESIDUAL.lipschitz_for(4) == pytest.approx(2.0)
    assert L1_RESIDUAL.lipschitz_for(None) is None
    assert HUBER_RESIDUAL.lipschitz_for(None) == 1.0


def test_custom_residual_loss(rng, mlr_data, quick_solver):
    cfg = DroConfig('MLR', 'SR', epsilon=0.1, loss='huber')
    assert cfg.lipschitz == 1.0
    assert cfg.residual_loss is HUBER_RESIDUAL
    B = rng.normal(size=(5, 3))
    expected = np.mean(_huber_value(mlr_data.Y - mlr_data.X @ B)) + mlr_regularizer(B, cfg)
    assert dro_objective(B, mlr_data, cfg) == pytest.approx(expected)
    model = fit_dro(mlr_data, cfg, quick_solver)
    assert model.objective <= dro_objective(np.zeros((5, 3)), mlr_data, cfg)


def test_l1_residual_loss_scales_penalty_with_response_count(rng, mlr_data, quick_solver):
    cfg = DroConfig('MLR', '1S', epsilon=0.1, loss='l1')
    base = DroConfig('MLR', '1S', epsilon=0.1)
    assert cfg.lipschitz is None
    assert DroConfig('MLR', '1S', epsilon=0.1, loss='l1', K=3).lipschitz == pytest.approx(math.sqrt(3.0))
    B = rng.normal(size=(5, 3))
    assert mlr_regularizer(B, cfg) == pytest.approx(math.sqrt(3.0) * mlr_regularizer(B, base))
    model = fit_dro(mlr_data, cfg, quick_solver)
    assert model.config.lipschitz == pytest.approx(math.sqrt(3.0))
    assert model.config.to_dict()['loss'] == 'l1'


@pytest.mark.parametrize('loss', ['huber', 'l1'])
def test_model_file_round_trip_keeps_residual_loss(tmp_path, mlr_data, quick_solver, loss):
    model = fit_dro(mlr_data, DroConfig('MLR', 'SR', epsilon=0.1, loss=loss), quick_solver)
    loaded = load_model(save_model(model, tmp_path / f'{loss}.json'))
    assert loaded.config.residual_loss is RESIDUAL_LOSSES[loss]
    assert loaded.config.lipschitz == model.config.lipschitz
    np.testing.assert_array_equal(loaded.B, model.B)
    assert dro_objective(loaded.B, mlr_data, loaded.config) == pytest.approx(dro_objective(model.B, mlr_data, model.config))


def test_save_model_rejects_unregistered_loss(tmp_path, mlr_data, quick_solver):
    scaled = ResidualLoss('scaled_l2', lambda R: 2.0 * np.linalg.norm(R, axis=1),
                          lambda R: 2.0 * np.sign(R), 2.0)
    model = fit_dro(mlr_data, DroConfig('MLR', 'SR', epsilon=0.1, loss=scaled), quick_solver)
    assert model.config.lipschitz == 2.0
    with pytest.raises(ConfigError, match='scaled_l2'):
        save_model(model, tmp_path / 'scaled.json')
    assert not (tmp_path / 'scaled.json').exists()


def test_restarts_never_worsen_the_fit(mlg_data, quick_solver):
    cfg = DroConfig('MLG', '1S', epsilon=0.05)
    single = fit_dro(mlg_data, cfg, quick_solver, seed=3)
    multi = fit_dro(mlg_data, cfg, quick_solver, seed=3, restarts=4)
    again = fit_dro(mlg_data, cfg, quick_solver, seed=3, restarts=4)
    assert multi.objective <= single.objective
    np.testing.assert_array_equal(multi.B, again.B)
    with pytest.raises(DomainError):
        fit_dro(mlg_data, cfg, quick_solver, restarts=-1)
