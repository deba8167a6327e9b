"""
Best response of a single agent
Minimizes r * L * p(a) + a over the investment interval for a given attack rate r
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from logzero import logger
from scipy.optimize import bisect

from .errors import InvalidParameter, SolverDiverged
from .models import POWER_LAW, ArrayLike, GameParams, InfectionModel


@dataclass(frozen=True)
class ScalarSolveSettings:
    """Stopping rule for the derivative bisection (tolerance is on the argument)."""

    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidParameter(f"tolerance must be positive, got {self.tolerance}")
        if int(self.max_iterations) < 1:
            raise InvalidParameter(f"max_iterations must be at least 1, got {self.max_iterations}")


DEFAULT_SCALAR_SETTINGS = ScalarSolveSettings()


def minimize_scalar_convex(
    objective: Optional[Callable[[float], float]],
    derivative: Callable[[float], float],
    lo: float,
    hi: float,
    settings: Optional[ScalarSolveSettings] = None,
) -> float:
    """
    Minimize a strictly convex function on [lo, hi] by bisection on the
    sign of its derivative.

    Args:
        objective: the function itself; only used for debug logging, may be None
        derivative: its derivative
        lo: lower end of the interval
        hi: upper end of the interval
        settings: tolerance on the argument and iteration cap

    Returns:
        The minimizer, clamped to the interval when the derivative keeps
        one sign throughout

    Raises:
        InvalidParameter: lo >= hi
        SolverDiverged: bracket not resolved within max_iterations
    """
    settings = settings or DEFAULT_SCALAR_SETTINGS
    if not lo < hi:
        raise InvalidParameter(f"need lo < hi, got [{lo}, {hi}]")

    slope_lo = float(derivative(lo))
    if slope_lo >= 0:
        return float(lo)
    slope_hi = float(derivative(hi))
    if slope_hi <= 0:
        return float(hi)

    root, status = bisect(
        derivative, lo, hi,
        xtol=settings.tolerance,
        maxiter=int(settings.max_iterations),
        full_output=True,
        disp=False,
    )
    if not status.converged:
        raise SolverDiverged(
            f"derivative bisection on [{lo}, {hi}] did not converge in {settings.max_iterations} iterations"
        )
    if objective is not None:
        logger.debug(f"minimize_scalar_convex: argmin={root:.12g}, value={float(objective(root)):.12g}, "
                     f"iterations={status.iterations}")
    return float(root)


def _check_rate(r: float) -> None:
    if not (np.isfinite(r) and r >= 0):
        raise InvalidParameter(f"attack rate r must be nonnegative, got {r}")


def optimal_investment(
    r: float,
    infection: InfectionModel,
    params: GameParams,
    settings: Optional[ScalarSolveSettings] = None,
) -> float:
    """
    Unique minimizer of a -> r * L * p(a) + a over [i_min, i_max].

    Args:
        r: expected number of attacks seen by the agent (tau_A + d * e)
        infection: infection model (p, p', L)
        params: investment bounds
        settings: used only by the generic bisection path

    Returns:
        Optimal investment

    Raises:
        InvalidParameter: negative r
    """
    _check_rate(r)
    if infection.kind == POWER_LAW:
        return float(_power_law_investment(np.asarray(r, dtype=float), infection, params))

    scale = r * infection.loss
    return minimize_scalar_convex(
        lambda a: scale * float(infection.p(a)) + a,
        lambda a: scale * float(infection.dp(a)) + 1.0,
        params.i_min,
        params.i_max,
        settings,
    )


def _power_law_investment(r: np.ndarray, infection: InfectionModel, params: GameParams) -> np.ndarray:
    # stationarity (1 + a)^(zeta + 1) = r * L * zeta
    zeta = infection.zeta
    with np.errstate(divide="ignore"):
        interior = np.power(r * infection.loss * zeta, 1.0 / (zeta + 1.0)) - 1.0
    return params.clamp(interior)


def optimal_investments(
    rates: ArrayLike,
    infection: InfectionModel,
    params: GameParams,
    settings: Optional[ScalarSolveSettings] = None,
) -> np.ndarray:
    """Vectorised optimal_investment over an array of attack rates."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise InvalidParameter("attack rates must be finite and nonnegative")
    if infection.kind == POWER_LAW:
        return _power_law_investment(rates, infection, params)
    return np.array([optimal_investment(float(r), infection, params, settings) for r in rates.ravel()]).reshape(
        rates.shape
    )


def p_star(
    r: float,
    infection: InfectionModel,
    params: GameParams,
    settings: Optional[ScalarSolveSettings] = None,
) -> float:
    """Infection probability under the best response to attack rate r."""
    return float(infection.p(optimal_investment(r, infection, params, settings)))
