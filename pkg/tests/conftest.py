"""Shared fixtures: reference models and random model generators."""

import numpy as np
import pytest

from serrin import ModelParams, boundary_data_of


@pytest.fixture(scope="session")
def model_a():
    # increasing annulus profile
    return ModelParams(L=0.0, M=4.0, r_i=1.0, r_o=1.5)


@pytest.fixture(scope="session")
def model_b():
    # decreasing, M = 0 (pure log-free profile)
    return ModelParams(L=2.0, M=0.0, r_i=1.0, r_o=2.0)


@pytest.fixture(scope="session")
def model_c():
    # decreasing with M > 0, both radii above sqrt(M)
    return ModelParams(L=0.0, M=1.0, r_i=1.2, r_o=2.0)


@pytest.fixture(scope="session")
def model_d():
    # inner slope exactly zero: r_i = sqrt(M)
    return ModelParams(L=0.0, M=1.0, r_i=1.0, r_o=2.0)


@pytest.fixture(scope="session")
def data_a(model_a):
    return boundary_data_of(model_a)


@pytest.fixture(scope="session")
def data_c(model_c):
    return boundary_data_of(model_c)


def random_increasing(rng):
    """Random model with r_i < r_o <= sqrt(M)."""
    m = float(np.exp(rng.uniform(np.log(0.05), np.log(50.0))))
    t_o = rng.uniform(0.35, 0.995)
    t_i = t_o * rng.uniform(0.15, 0.92)
    t_i = min(max(t_i, 0.02), 0.97 * t_o)
    root = np.sqrt(m)
    return ModelParams(
        L=float(rng.uniform(-2.0, 2.0)),
        M=m,
        r_i=float(t_i * root),
        r_o=float(t_o * root),
    )


def random_decreasing(rng):
    """Random model with sqrt(M) <= r_i < r_o."""
    m = float(np.exp(rng.uniform(np.log(0.05), np.log(50.0))))
    t_i = 1.0 + rng.uniform(5e-3, 1.6)
    r_i = t_i * np.sqrt(m)
    r_o = r_i * (1.0 + rng.uniform(0.03, 1.8))
    return ModelParams(
        L=float(rng.uniform(-2.0, 2.0)), M=m, r_i=float(r_i), r_o=float(r_o)
    )


def random_model(rng):
    if rng.uniform() < 0.5:
        return random_increasing(rng)
    return random_decreasing(rng)
