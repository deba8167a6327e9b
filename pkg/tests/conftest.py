"""Shared fixtures: reference game, small-range game for grid oracles, decoupled stub."""

import numpy as np
import pytest

from engine.models import ExposureModel, GameParams, IdsGame, InfectionModel


@pytest.fixture
def reference_game() -> IdsGame:
    """tau_A=0.7, beta_IA=1, L=10, zeta=1.5, g+(z) = 30 z^1.1, A=[0, 1000]."""
    return IdsGame.default()


@pytest.fixture
def reference_game_b2() -> IdsGame:
    return IdsGame.default(b=2.0)


@pytest.fixture
def small_range_game() -> IdsGame:
    """Reference models on A=[0, 20] so the brute-force grid stays small."""
    return IdsGame(
        params=GameParams(tau_a=0.7, beta_ia=1.0, i_min=0.0, i_max=20.0),
        infection=InfectionModel.power_law(1.5, 10.0),
        exposure=ExposureModel.power(30.0, 1.1),
    )


@pytest.fixture
def decoupled_game() -> IdsGame:
    return IdsGame(
        params=GameParams(tau_a=0.7, beta_ia=1.0),
        infection=InfectionModel.power_law(1.5, 10.0),
        exposure=ExposureModel.decoupled(),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


def random_game(rng: np.random.Generator, i_max: float = 1000.0) -> IdsGame:
    """Random valid game with zeta, b and tau_A drawn over the tested ranges."""
    return IdsGame(
        params=GameParams(tau_a=float(rng.uniform(0.01, 1.0)), beta_ia=1.0, i_min=0.0, i_max=i_max),
        infection=InfectionModel.power_law(float(rng.uniform(1.1, 3.0)), 10.0),
        exposure=ExposureModel.power(30.0, float(rng.uniform(0.5, 2.5))),
    )


def golden_section(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Golden-section search for the minimizer of a unimodal f on [lo, hi].

    Only accurate to about sqrt(machine epsilon) relative to the scale of f.
    """
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv_phi * (b - a), a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)
