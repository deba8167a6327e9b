"""
Domain types for the interdependent-security population game
Degree distributions, infection / exposure models, strategy profiles and results
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd
from logzero import logger

from .errors import ConfigError, DegenerateCensus, DimensionMismatch, InvalidParameter

NORMALIZATION_TOLERANCE = 1e-12
SHAPE_CHECK_POINTS = 100
EXPOSURE_CHECK_POINTS = 1000
# g+ may be non-differentiable at 0 (power with b < 1)
DERIVATIVE_FLOOR = 1e-300

POWER_LAW = "power_law"
POWER = "power"
LOG = "log"
CUSTOM = "custom"
DECOUPLED = "decoupled"

ArrayLike = Union[float, np.ndarray]
CensusLike = Union["PopulationVector", Sequence[float], np.ndarray]


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PopulationVector:
    """
    Mass of each degree population, indexed by degree 1..D_max.

    Masses are renormalized on construction so they sum to one; the total
    of the raw input is kept in ``raw_total``. Degrees with no nodes carry
    zero mass.
    """

    masses: np.ndarray
    raw_total: float = field(init=False)

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float).ravel()
        if masses.size == 0:
            raise DegenerateCensus("population vector is empty")
        if not np.all(np.isfinite(masses)):
            raise InvalidParameter("population masses must be finite")
        if np.any(masses < 0):
            raise InvalidParameter(f"population masses must be nonnegative, got min {masses.min()}")
        total = float(masses.sum())
        if not total > 0:
            raise DegenerateCensus("population vector has no positive mass")
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            masses = masses / total
        object.__setattr__(self, "masses", _readonly(masses))
        object.__setattr__(self, "raw_total", total)

    @property
    def d_max(self) -> int:
        return int(self.masses.size)

    @property
    def degrees(self) -> np.ndarray:
        """Degree index 1..D_max as floats (ready for arithmetic)."""
        return np.arange(1, self.d_max + 1, dtype=float)

    def scaled(self, factor: float) -> "PopulationVector":
        if not factor > 0:
            raise InvalidParameter(f"scale factor must be positive, got {factor}")
        return PopulationVector(self.masses * factor)

    def __len__(self) -> int:
        return self.d_max


@dataclass(frozen=True)
class GameParams:
    """Attack probabilities and the investment interval [i_min, i_max]."""

    tau_a: float
    beta_ia: float
    i_min: float = 0.0
    i_max: float = 1000.0

    def __post_init__(self):
        for name in ("tau_a", "beta_ia", "i_min", "i_max"):
            if not np.isfinite(getattr(self, name)):
                raise InvalidParameter(f"{name} must be finite")
        if not 0.0 <= self.tau_a <= 1.0:
            raise InvalidParameter(f"tau_a must lie in [0, 1], got {self.tau_a}")
        if not 0.0 < self.beta_ia <= 1.0:
            raise InvalidParameter(f"beta_ia must lie in (0, 1], got {self.beta_ia}")
        if not 0.0 <= self.i_min < self.i_max:
            raise InvalidParameter(
                f"investment bounds must satisfy 0 <= i_min < i_max, got [{self.i_min}, {self.i_max}]"
            )

    @property
    def attack_scale(self) -> float:
        """tau_A * beta_IA, the factor between rho and gamma_avg."""
        return self.tau_a * self.beta_ia

    def clamp(self, a: ArrayLike) -> ArrayLike:
        return np.clip(a, self.i_min, self.i_max)


@dataclass(frozen=True)
class InfectionModel:
    """
    Infection probability p(a) for a node investing a, and its derivative.

    Callables must accept floats and numpy arrays. ``loss`` is the
    expected loss L per infection.
    """

    kind: str
    loss: float
    zeta: Optional[float] = None
    p_fn: Optional[Callable[[ArrayLike], ArrayLike]] = field(default=None, repr=False, compare=False)
    dp_fn: Optional[Callable[[ArrayLike], ArrayLike]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.loss) and self.loss > 0):
            raise InvalidParameter(f"expected loss L must be positive, got {self.loss}")
        if self.kind == POWER_LAW:
            if self.zeta is None or not self.zeta > 0:
                raise InvalidParameter(f"power-law infection needs zeta > 0, got {self.zeta}")
        elif self.kind == CUSTOM:
            if self.p_fn is None or self.dp_fn is None:
                raise InvalidParameter("custom infection model needs both p and dp")
        else:
            raise InvalidParameter(f"unknown infection model kind: {self.kind}")

    @classmethod
    def power_law(cls, zeta: float, loss: float = 10.0) -> "InfectionModel":
        """p(a) = (1 + a)^(-zeta)."""
        return cls(kind=POWER_LAW, loss=float(loss), zeta=float(zeta))

    @classmethod
    def custom(cls, p: Callable, dp: Callable, loss: float) -> "InfectionModel":
        return cls(kind=CUSTOM, loss=float(loss), p_fn=p, dp_fn=dp)

    def p(self, a: ArrayLike) -> ArrayLike:
        if self.kind == POWER_LAW:
            return np.power(1.0 + np.asarray(a, dtype=float), -self.zeta)
        return self.p_fn(a)

    def dp(self, a: ArrayLike) -> ArrayLike:
        if self.kind == POWER_LAW:
            return -self.zeta * np.power(1.0 + np.asarray(a, dtype=float), -self.zeta - 1.0)
        return self.dp_fn(a)

    def expected_loss(self, a: ArrayLike) -> ArrayLike:
        return self.loss * self.p(a)


@dataclass(frozen=True)
class ExposureModel:
    """
    Risk-exposure map g+(rho): indirect attacks seen per neighbor when a
    random neighbor is infected by a single attack with probability rho.

    ``strict`` is False only for test stubs built with ``custom(check=False)``.
    """

    kind: str
    coef: Optional[float] = None
    b: Optional[float] = None
    g_fn: Optional[Callable[[ArrayLike], ArrayLike]] = field(default=None, repr=False, compare=False)
    dg_fn: Optional[Callable[[ArrayLike], ArrayLike]] = field(default=None, repr=False, compare=False)
    strict: bool = True

    def __post_init__(self):
        if self.kind in (POWER, LOG):
            if self.coef is None or not (np.isfinite(self.coef) and self.coef > 0):
                raise InvalidParameter(f"{self.kind} exposure needs coef > 0, got {self.coef}")
            if self.kind == POWER and (self.b is None or not (np.isfinite(self.b) and self.b > 0)):
                raise InvalidParameter(f"power exposure needs exponent b > 0, got {self.b}")
        elif self.kind == CUSTOM:
            if self.g_fn is None or self.dg_fn is None:
                raise InvalidParameter("custom exposure model needs both g and dg")
        elif self.kind != DECOUPLED:
            raise InvalidParameter(f"unknown exposure model kind: {self.kind}")

    @classmethod
    def power(cls, coef: float, b: float) -> "ExposureModel":
        """g+(z) = coef * z^b."""
        return cls(kind=POWER, coef=float(coef), b=float(b))

    @classmethod
    def power_from_kappa(cls, kappa: float, b: float, params: GameParams) -> "ExposureModel":
        """
        Power exposure written on gamma_avg: e = kappa * gamma_avg^b.

        Since gamma_avg = tau_A * beta_IA * rho, the coefficient on rho is
        kappa * (tau_A * beta_IA)^b.
        """
        return cls.power(kappa * params.attack_scale ** b, b)

    @classmethod
    def log(cls, coef: float) -> "ExposureModel":
        """g+(z) = coef * log(1 + z)."""
        return cls(kind=LOG, coef=float(coef))

    @classmethod
    def custom(cls, g: Callable, dg: Callable, check: bool = True) -> "ExposureModel":
        return cls(kind=CUSTOM, g_fn=g, dg_fn=dg, strict=check)

    @classmethod
    def from_gamma(cls, g: Callable, dg: Callable, params: GameParams) -> "ExposureModel":
        """Build g+(z) = g(tau_A * beta_IA * z) from a map g defined on gamma_avg."""
        scale = params.attack_scale
        return cls.custom(lambda z: g(scale * np.asarray(z, dtype=float)),
                          lambda z: scale * dg(scale * np.asarray(z, dtype=float)))

    @classmethod
    def decoupled(cls) -> "ExposureModel":
        """g+ identically zero: no interdependence between populations."""
        return cls(kind=DECOUPLED, strict=False)

    @property
    def is_decoupled(self) -> bool:
        return self.kind == DECOUPLED

    def gplus(self, z: ArrayLike) -> ArrayLike:
        z = np.asarray(z, dtype=float)
        if self.kind == POWER:
            return self.coef * np.power(z, self.b)
        if self.kind == LOG:
            return self.coef * np.log1p(z)
        if self.kind == DECOUPLED:
            return np.zeros_like(z)
        return self.g_fn(z)

    def dgplus(self, z: ArrayLike) -> ArrayLike:
        z = np.maximum(np.asarray(z, dtype=float), DERIVATIVE_FLOOR)
        if self.kind == POWER:
            return self.coef * self.b * np.power(z, self.b - 1.0)
        if self.kind == LOG:
            return self.coef / (1.0 + z)
        if self.kind == DECOUPLED:
            return np.zeros_like(z)
        return self.dg_fn(z)


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """Pure strategy profile: one investment per degree population."""

    investments: np.ndarray

    def __post_init__(self):
        investments = np.array(self.investments, dtype=float).ravel()
        if investments.size == 0 or not np.all(np.isfinite(investments)):
            raise InvalidParameter("strategy profile must be a nonempty vector of finite investments")
        object.__setattr__(self, "investments", _readonly(investments))

    @property
    def d_max(self) -> int:
        return int(self.investments.size)

    def check_bounds(self, params: GameParams) -> "StrategyProfile":
        if np.any(self.investments < params.i_min) or np.any(self.investments > params.i_max):
            raise InvalidParameter(
                f"investments must lie in [{params.i_min}, {params.i_max}]"
            )
        return self

    def is_interior(self, params: GameParams) -> bool:
        return bool(np.all((self.investments > params.i_min) & (self.investments < params.i_max)))

    def __len__(self) -> int:
        return self.d_max


@dataclass(frozen=True)
class IdsGame:
    """Everything besides the census that defines a game instance."""

    params: GameParams
    infection: InfectionModel
    exposure: ExposureModel

    @classmethod
    def default(cls, zeta: float = 1.5, b: float = 1.1, coef: float = 30.0,
                loss: float = 10.0) -> "IdsGame":
        """Reference setting of the default sweep: tau_A=0.7, beta_IA=1, A=[0, 1000]."""
        return cls(
            params=GameParams(tau_a=0.7, beta_ia=1.0, i_min=0.0, i_max=1000.0),
            infection=InfectionModel.power_law(zeta, loss),
            exposure=ExposureModel.power(coef, b),
        )

    def validate(self) -> "IdsGame":
        check_infection_model(self.infection, self.params)
        if self.exposure.strict:
            check_exposure_model(self.exposure)
        return self


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    """Pure profile at a solution together with the scalars that certify it."""

    profile: StrategyProfile
    rho: float
    exposure: float
    per_degree_cost: np.ndarray
    social_cost: float
    iterations: int
    residual: float
    fixed_point_gap: float = 0.0
    game_kind: str = "original"

    def to_dict(self) -> Dict:
        return {
            "game": self.game_kind,
            "rho": self.rho,
            "exposure": self.exposure,
            "social_cost": self.social_cost,
            "iterations": self.iterations,
            "residual": self.residual,
            "fixed_point_gap": self.fixed_point_gap,
            "investments": [float(x) for x in self.profile.investments],
            "per_degree_cost": [float(x) for x in self.per_degree_cost],
        }


def check_infection_model(infection: InfectionModel, params: GameParams) -> None:
    """
    Grid check of the infection model over [i_min, i_max]: values in
    [0, 1], strictly decreasing and strictly midpoint-convex.

    Raises:
        InvalidParameter: if any check fails
    """
    grid = np.linspace(params.i_min, params.i_max, SHAPE_CHECK_POINTS)
    values = np.asarray(infection.p(grid), dtype=float)
    slopes = np.asarray(infection.dp(grid), dtype=float)
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
        raise InvalidParameter("infection model returned non-finite values on the investment grid")
    if np.any(values < 0) or np.any(values > 1):
        raise InvalidParameter("infection probability must lie in [0, 1]")
    if not np.all(np.diff(values) < 0):
        raise InvalidParameter("infection probability must be strictly decreasing")
    midpoints = np.asarray(infection.p(0.5 * (grid[:-1] + grid[1:])), dtype=float)
    if not np.all(midpoints < 0.5 * (values[:-1] + values[1:])):
        raise InvalidParameter("infection probability must be strictly convex")


def check_exposure_model(exposure: ExposureModel, z_max: float = 1.0) -> None:
    """
    g+(0) = 0 and g+ nonnegative, strictly increasing on (0, z_max].

    Raises:
        InvalidParameter: if any check fails
    """
    if abs(float(exposure.gplus(0.0))) > NORMALIZATION_TOLERANCE:
        raise InvalidParameter("exposure map must satisfy g+(0) = 0")
    grid = np.linspace(z_max / EXPOSURE_CHECK_POINTS, z_max, EXPOSURE_CHECK_POINTS)
    values = np.asarray(exposure.gplus(grid), dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise InvalidParameter("exposure map must be finite and nonnegative")
    if not np.all(np.diff(values) > 0):
        raise InvalidParameter("exposure map must be strictly increasing")


def _as_census(s: CensusLike) -> PopulationVector:
    return s if isinstance(s, PopulationVector) else PopulationVector(np.asarray(s, dtype=float))


def normalize(s: CensusLike) -> PopulationVector:
    """
    Rescale masses to sum to one, preserving proportions.

    Raises:
        DegenerateCensus: all masses are zero
    """
    census = _as_census(s)
    return PopulationVector(census.masses / census.masses.sum())


def degree_fraction(s: CensusLike) -> np.ndarray:
    """f_d = s_d / sum(s): fraction of nodes with degree d."""
    masses = _as_census(s).masses
    return masses / masses.sum()


def weighted_fraction(s: CensusLike) -> np.ndarray:
    """w_d = d s_d / sum(d' s_d'): degree distribution of a random neighbor."""
    census = _as_census(s)
    weighted = census.degrees * census.masses
    return weighted / weighted.sum()


def avg_degree(s: CensusLike) -> float:
    census = _as_census(s)
    return float(np.dot(census.degrees, degree_fraction(census)))


def power_law_census(alpha: float, d_max: int) -> PopulationVector:
    """
    Truncated power law: s_d proportional to d^(-alpha), d = 1..d_max.

    Raises:
        InvalidParameter: d_max < 1 or alpha negative
    """
    if int(d_max) != d_max or d_max < 1:
        raise InvalidParameter(f"d_max must be a positive integer, got {d_max}")
    if not (np.isfinite(alpha) and alpha >= 0):
        raise InvalidParameter(f"alpha must be nonnegative, got {alpha}")
    degrees = np.arange(1, int(d_max) + 1, dtype=float)
    masses = np.power(degrees, -float(alpha))
    return PopulationVector(masses / masses.sum())


def check_dimensions(profile: StrategyProfile, s: PopulationVector) -> None:
    if profile.d_max != s.d_max:
        raise DimensionMismatch(
            f"profile has {profile.d_max} degrees but census has {s.d_max}"
        )


def read_census_csv(path: Union[str, Path]) -> PopulationVector:
    """
    Load a census from CSV with header ``degree,mass``.

    Degrees absent from the file get zero mass.

    Raises:
        ConfigError: unreadable file or malformed columns
        InvalidParameter: degree below 1 or repeated
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"census file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot parse census file {path}: {e}") from e

    frame.columns = [str(c).strip().lower() for c in frame.columns]
    if list(frame.columns[:2]) != ["degree", "mass"]:
        raise ConfigError(f"census file {path} must have header 'degree,mass'")
    try:
        raw_degrees = frame["degree"].astype(float).to_numpy()
        masses = frame["mass"].astype(float).to_numpy()
    except (TypeError, ValueError) as e:
        raise ConfigError(f"census file {path} has non-numeric entries: {e}") from e
    if not np.all(np.isfinite(raw_degrees)) or np.any(raw_degrees % 1 != 0):
        raise InvalidParameter(f"census file {path} has non-integral degrees")
    degrees = raw_degrees.astype(int)

    if degrees.size == 0:
        raise DegenerateCensus(f"census file {path} has no rows")
    if np.any(degrees < 1):
        raise InvalidParameter("census degrees start at 1")
    if len(set(degrees.tolist())) != degrees.size:
        raise InvalidParameter(f"census file {path} repeats a degree")

    dense = np.zeros(int(degrees.max()))
    dense[degrees - 1] = masses
    logger.debug(f"Loaded census from {path} (D_max={dense.size}, total mass={masses.sum():.6g})")
    return PopulationVector(dense)
