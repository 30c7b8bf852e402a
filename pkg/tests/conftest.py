"""Shared fixtures for the test suite"""

import logging

import numpy as np
import pytest

from lib.data import OutlierSpec, make_mlg_dataset, make_mlr_dataset
from lib.solver import SolverConfig

logger = logging.getLogger(__name__)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mlr_data():
    return make_mlr_dataset(5, 3, 100, seed=11, purpose='train')


@pytest.fixture
def mlr_test_data(mlr_data):
    return make_mlr_dataset(5, 3, 60, OutlierSpec('response', 0.3), seed=11, true_B=mlr_data.true_B, purpose='test')


@pytest.fixture
def mlg_data():
    return make_mlg_dataset(5, 3, 100, seed=11, purpose='train')


@pytest.fixture
def mlg_test_data(mlg_data):
    return make_mlg_dataset(5, 3, 60, seed=11, true_B=mlg_data.true_B, purpose='test')


@pytest.fixture
def precise_solver():
    """Normalized geometric steps, for fits that must land close to the optimum"""
    return SolverConfig(max_iters=20000, step_rule='geometric', c=1.0, decay=0.999, tol=1e-12, window=500)


@pytest.fixture
def quick_solver():
    return SolverConfig(max_iters=400, step_rule='diminishing', c=0.5, tol=1e-6, window=50)
