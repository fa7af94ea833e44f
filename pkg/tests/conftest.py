"""Shared fixtures for the lutkan test suite."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from lutkan.models import EdgeParams, KanLayerSpec, KnotGrid, OobConfig, QuantConfig  # noqa: E402
from lutkan.model_gen import gen_sanity_layer  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: timing-heavy tests (deselect with -m "not slow")')


def make_layer(in_dim, out_dim, grid, rng, coeff_std=0.1, scalars=None):
    """Random layer on ``grid``; ``scalars`` fixes (base, spline, out) for every edge."""
    edges = []
    for _ in range(in_dim * out_dim):
        coeffs = rng.normal(0.0, coeff_std, grid.num_basis).astype(np.float32).astype(np.float64)
        if scalars is None:
            base, spline, out = rng.uniform(0.5, 1.5, 3).astype(np.float32).astype(np.float64)
        else:
            base, spline, out = scalars
        edges.append(EdgeParams(tuple(coeffs), base, spline, out))
    return KanLayerSpec(in_dim, out_dim, grid, tuple(edges))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    """Uniform cubic grid on [-1, 1] with 8 segments."""
    return KnotGrid.uniform(-1.0, 1.0, 8, 3)


@pytest.fixture
def small_layer(grid, rng):
    return make_layer(3, 2, grid, rng)


@pytest.fixture(scope='session')
def sanity_layer():
    return gen_sanity_layer(0)


@pytest.fixture
def default_quant():
    return QuantConfig(L=64)


@pytest.fixture
def default_oob():
    return OobConfig()


@pytest.fixture(params=[(b, p) for b in ('half_open', 'closed') for p in ('clip_x', 'zero_spline')],
                ids=lambda c: f'{c[0]}-{c[1]}')
def oob_config(request):
    """Each of the four boundary_mode x oob_policy combinations."""
    return OobConfig(*request.param)
