"""
Nash equilibrium of the population game
The profile depends on the other populations only through the neighbor
vulnerability rho, so the NE is found as a scalar fixed point rho = Phi(rho).
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from logzero import logger

from .errors import InvalidParameter, SolverDiverged
from .models import (
    EquilibriumResult,
    IdsGame,
    InfectionModel,
    PopulationVector,
    StrategyProfile,
    check_dimensions,
    normalize,
    weighted_fraction,
)
from .response import DEFAULT_SCALAR_SETTINGS, ScalarSolveSettings, optimal_investments

ExposureFn = Callable[[float], float]


@dataclass(frozen=True)
class FixedPointSettings:
    """Stopping rule for the rho fixed point (tolerance is on rho)."""

    rho_tolerance: float = 1e-12
    max_iterations: int = 400
    scalar: ScalarSolveSettings = field(default_factory=lambda: DEFAULT_SCALAR_SETTINGS)

    def __post_init__(self):
        if not self.rho_tolerance > 0:
            raise InvalidParameter(f"rho_tolerance must be positive, got {self.rho_tolerance}")
        if int(self.max_iterations) < 1:
            raise InvalidParameter(f"max_iterations must be at least 1, got {self.max_iterations}")


DEFAULT_FIXED_POINT_SETTINGS = FixedPointSettings()

# |rho - Phi(rho)| accepted once the damped step stops moving rho
DAMPED_NOISE_FLOOR = 1e-10


def _as_profile(a: Union[StrategyProfile, np.ndarray]) -> StrategyProfile:
    return a if isinstance(a, StrategyProfile) else StrategyProfile(a)


def neighbor_vulnerability(a: StrategyProfile, s: PopulationVector, infection: InfectionModel) -> float:
    """
    rho(a; s) = w(s)^T p(a): probability that a random neighbor is infected
    by a single attack.

    Raises:
        DimensionMismatch: profile and census lengths differ
    """
    a = _as_profile(a)
    check_dimensions(a, s)
    return float(np.dot(weighted_fraction(s), infection.p(a.investments)))


def gamma_avg(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> float:
    """Average one-hop indirect attacks per directed edge: tau_A * beta_IA * rho."""
    return game.params.attack_scale * neighbor_vulnerability(a, s, game.infection)


def risk_exposure(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> float:
    """e(a; s) = g+(rho(a; s))."""
    return float(game.exposure.gplus(neighbor_vulnerability(a, s, game.infection)))


def _check_degree(d: int, s: PopulationVector) -> None:
    if int(d) != d or not 1 <= d <= s.d_max:
        raise InvalidParameter(f"degree must be an integer in 1..{s.d_max}, got {d}")


def agent_costs(a: StrategyProfile, s: PopulationVector, game: IdsGame) -> np.ndarray:
    """(tau_A + d e) L p(a_d) + a_d for every degree at once."""
    a = _as_profile(a)
    exposure = risk_exposure(a, s, game)
    attacks = game.params.tau_a + s.degrees * exposure
    return attacks * game.infection.expected_loss(a.investments) + a.investments


def agent_cost(a: StrategyProfile, d: int, s: PopulationVector, game: IdsGame) -> float:
    """
    Expected cost of a degree-d agent under profile a.

    Raises:
        InvalidParameter: d outside 1..D_max
    """
    _check_degree(d, s)
    return float(agent_costs(a, s, game)[int(d) - 1])


def best_response_profile(
    rho: float,
    s: PopulationVector,
    game: IdsGame,
    exposure_fn: Optional[ExposureFn] = None,
    settings: Optional[ScalarSolveSettings] = None,
) -> np.ndarray:
    """Investments a_d = I_opt(tau_A + d * g(rho)) induced by a neighbor vulnerability."""
    exposure_fn = exposure_fn or game.exposure.gplus
    rates = game.params.tau_a + s.degrees * float(exposure_fn(rho))
    return optimal_investments(rates, game.infection, game.params, settings)


def vulnerability_map(
    rho: float,
    s: PopulationVector,
    game: IdsGame,
    exposure_fn: Optional[ExposureFn] = None,
    settings: Optional[ScalarSolveSettings] = None,
) -> float:
    """Phi(rho) = w(s)^T p(best response to rho); nonincreasing in rho."""
    investments = best_response_profile(rho, s, game, exposure_fn, settings)
    return float(np.dot(weighted_fraction(s), game.infection.p(investments)))


def _bisect_fixed_point(phi: Callable[[float], float], settings: FixedPointSettings):
    lo, hi = 0.0, 1.0
    h_lo = lo - phi(lo)
    h_hi = hi - phi(hi)
    if h_lo > 0 or h_hi < 0:
        raise SolverDiverged(
            f"rho bracket [0, 1] invalid: h(0)={h_lo:.3g}, h(1)={h_hi:.3g}; "
            "infection probabilities must stay in [0, 1]"
        )
    if h_lo == 0:
        return lo, 0, 0.0
    if h_hi == 0:
        return hi, 0, 0.0

    iterations = 0
    while hi - lo > 2.0 * settings.rho_tolerance:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket at floating-point resolution
            break
        if iterations >= settings.max_iterations:
            raise SolverDiverged(
                f"rho bisection did not reach tolerance {settings.rho_tolerance} "
                f"in {settings.max_iterations} iterations"
            )
        iterations += 1
        h_mid = mid - phi(mid)
        if h_mid == 0:
            return mid, iterations, 0.0
        if h_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), iterations, 0.5 * (hi - lo)


def _result_at(
    rho: float,
    s: PopulationVector,
    game: IdsGame,
    exposure_fn: ExposureFn,
    settings: FixedPointSettings,
    iterations: int,
    residual: float,
    game_kind: str,
) -> EquilibriumResult:
    investments = best_response_profile(rho, s, game, exposure_fn, settings.scalar)
    profile = StrategyProfile(investments)
    costs = agent_costs(profile, s, game)
    gap = abs(rho - neighbor_vulnerability(profile, s, game.infection))
    return EquilibriumResult(
        profile=profile,
        rho=float(rho),
        exposure=float(game.exposure.gplus(rho)),
        per_degree_cost=costs,
        social_cost=float(np.dot(s.masses, costs)),
        iterations=int(iterations),
        residual=float(residual),
        fixed_point_gap=float(gap),
        game_kind=game_kind,
    )


def solve_fixed_point(
    s: PopulationVector,
    game: IdsGame,
    exposure_fn: ExposureFn,
    settings: Optional[FixedPointSettings] = None,
    game_kind: str = "original",
) -> EquilibriumResult:
    """
    NE of the game whose agents perceive exposure ``exposure_fn(rho)``.

    Shared by the original game (exposure_fn = g+) and the modified game
    (exposure_fn = vartheta). exposure_fn must be nondecreasing so that
    Phi is nonincreasing and h(rho) = rho - Phi(rho) has a single root in [0, 1].

    Raises:
        SolverDiverged: bracket invalid or iteration cap hit
    """
    settings = settings or DEFAULT_FIXED_POINT_SETTINGS
    s = normalize(s)

    def phi(rho: float) -> float:
        return vulnerability_map(rho, s, game, exposure_fn, settings.scalar)

    rho, iterations, residual = _bisect_fixed_point(phi, settings)
    result = _result_at(rho, s, game, exposure_fn, settings, iterations, residual, game_kind)
    logger.info(
        f"Solved {game_kind} game (D_max={s.d_max}): rho*={result.rho:.12g}, "
        f"e={result.exposure:.6g}, social cost={result.social_cost:.6g}, iterations={iterations}"
    )
    return result


def solve_ne(
    s: PopulationVector,
    game: IdsGame,
    settings: Optional[FixedPointSettings] = None,
) -> EquilibriumResult:
    """
    Unique pure-strategy NE of the population game.

    Args:
        s: population census
        game: parameters, infection and exposure models
        settings: fixed-point tolerance and iteration cap

    Returns:
        EquilibriumResult with a*_d = I_opt(tau_A + d g+(rho*)) and rho* = w^T p(a*)

    Raises:
        InvalidParameter: model fails its shape checks
        SolverDiverged: bracket failure (a custom model broke its contract)
    """
    game.validate()
    return solve_fixed_point(s, game, game.exposure.gplus, settings, game_kind="original")


def solve_ne_damped(
    s: PopulationVector,
    game: IdsGame,
    rho0: float = 0.5,
    settings: Optional[FixedPointSettings] = None,
    damping: float = 0.5,
    max_iterations: int = 10000,
) -> EquilibriumResult:
    """
    Damped best-response iteration rho <- rho - step * (rho - Phi(rho)).

    Independent of the bisection in solve_ne; used to check uniqueness from
    arbitrary starting points. The step shrinks whenever |rho - Phi(rho)|
    fails to decrease and grows back after a success. Since Phi is
    nonincreasing, |rho - rho*| <= |rho - Phi(rho)|, which is the
    stopping quantity. When Phi is steep that gap can sit above
    rho_tolerance at the closest representable rho; once the step no longer
    moves rho, a gap within DAMPED_NOISE_FLOOR is accepted and reported as
    the residual.

    Raises:
        InvalidParameter: rho0 outside [0, 1] or damping outside (0, 1]
        SolverDiverged: no convergence within max_iterations, or stalled
            above the noise floor
    """
    if not 0.0 <= rho0 <= 1.0:
        raise InvalidParameter(f"rho0 must lie in [0, 1], got {rho0}")
    if not 0.0 < damping <= 1.0:
        raise InvalidParameter(f"damping must lie in (0, 1], got {damping}")
    settings = settings or DEFAULT_FIXED_POINT_SETTINGS
    game.validate()
    s = normalize(s)

    def h(rho: float) -> float:
        return rho - vulnerability_map(rho, s, game, settings=settings.scalar)

    rho, gap, step = float(rho0), h(float(rho0)), float(damping)
    for iteration in range(1, max_iterations + 1):
        if abs(gap) <= settings.rho_tolerance:
            break
        candidate = min(1.0, max(0.0, rho - step * gap))
        candidate_gap = h(candidate)
        if abs(candidate_gap) < abs(gap):
            rho, gap = candidate, candidate_gap
            step = min(1.0, 1.5 * step)
        else:
            step *= 0.5
            # stalled: the next move is below the spacing of floats near rho
            if step < 1e-300 or step * abs(gap) <= np.spacing(max(rho, np.finfo(float).tiny)):
                break

    if abs(gap) > max(settings.rho_tolerance, DAMPED_NOISE_FLOOR):
        raise SolverDiverged(f"damped iteration from rho0={rho0} stalled at |rho - Phi(rho)|={abs(gap):.3g}")
    logger.debug(f"Damped iteration from rho0={rho0}: rho*={rho:.12g} after {iteration} steps")
    return _result_at(rho, s, game, game.exposure.gplus, settings, iteration, abs(gap), "original")


def verify_ne(
    result: Union[EquilibriumResult, StrategyProfile],
    s: PopulationVector,
    game: IdsGame,
    exposure_fn: Optional[ExposureFn] = None,
    settings: Optional[ScalarSolveSettings] = None,
) -> float:
    """
    NE certificate: max_d |a_d - I_opt(tau_A + d * e(a; s))|.

    A residual <= 1e-8 certifies a pure-strategy NE. Pass exposure_fn to
    verify against the modified game instead.
    """
    profile = result.profile if isinstance(result, EquilibriumResult) else _as_profile(result)
    s = normalize(s)
    rho = neighbor_vulnerability(profile, s, game.infection)
    exposure_fn = exposure_fn or game.exposure.gplus
    rates = game.params.tau_a + s.degrees * float(exposure_fn(rho))
    best = optimal_investments(rates, game.infection, game.params, settings)
    return float(np.max(np.abs(profile.investments - best)))
