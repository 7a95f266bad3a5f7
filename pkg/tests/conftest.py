import numpy as np
import pytest

from zigzag import (ExcessRate, GaussianTarget, MaxTarget, PowerLawTarget,
                    RidgeTarget, State, Velocity)


@pytest.fixture
def std1d():
    return GaussianTarget([[1.0]])


@pytest.fixture
def std2d():
    return GaussianTarget(np.eye(2))


@pytest.fixture
def coupled2d():
    """SPD but not diagonally dominant; the running 2-D worked example."""
    return GaussianTarget([[6.0, 3.0], [3.0, 2.0]])


@pytest.fixture
def ridge():
    return RidgeTarget(0.75)


@pytest.fixture
def maxpot():
    return MaxTarget()


@pytest.fixture
def powerlaw2():
    return PowerLawTarget(2.0, 2)


def random_velocity(rng, d):
    return Velocity(np.where(rng.random(d) < 0.5, -1.0, 1.0))


def random_state(rng, d, scale=3.0):
    return State(scale * rng.standard_normal(d), random_velocity(rng, d))


def random_spd(rng, d, jitter=1e-3):
    """Gramian-construction SPD matrix with a small diagonal floor."""
    G = rng.standard_normal((d + 2, d))
    return G.T @ G + jitter * np.eye(d)


@pytest.fixture
def symmetric_excess():
    """A state-dependent excess rate that ignores the component's own sign."""
    def fn(x, theta):
        base = 0.3 / (1.0 + np.sum(np.asarray(x) ** 2, axis=-1, keepdims=True))
        return np.broadcast_to(base, np.shape(x)).copy()
    return ExcessRate(fn, gamma_bar=0.3)
