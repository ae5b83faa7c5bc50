"""Shared fixtures: small deterministic ensembles and densities."""

import numpy as np
import pytest

from vpme.harness import random_smooth_density
from vpme.measures import GridDensity, ParticleEnsemble


def make_ensemble(n, d=1, epsilon=1.0, seed=0, sigma=1.0):
    """Uniform-in-x Gaussian-in-v cloud with equal weights."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, size=(n, d))
    v = rng.normal(0.0, sigma, size=(n, d))
    w = np.full(n, 1.0 / n)
    return ParticleEnsemble(positions=x, velocities=v, weights=w,
                            epsilon=epsilon)


@pytest.fixture
def smooth_density_1d():
    return random_smooth_density(d=1, resolution=64, seed=3)


@pytest.fixture
def smooth_density_2d():
    return random_smooth_density(d=2, resolution=32, seed=5)


@pytest.fixture
def uniform_density_1d():
    return GridDensity(values=np.ones(64))
