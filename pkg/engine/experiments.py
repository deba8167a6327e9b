"""
Degree-distribution sweep runner
Solves the NE and the social optimum along a truncated power-law family and
writes the exposure / cost / PoA curves as CSV or JSON.
"""

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from logzero import logger

from .equilibrium import FixedPointSettings
from .errors import ConfigError, IdsGameError, InvalidParameter, InvariantViolation, OutputError, SweepError
from .models import ExposureModel, GameParams, IdsGame, InfectionModel, power_law_census
from .social import efficiency_report

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

SWEEP_COLUMNS = ["alpha", "e_ne", "e_so", "cost_ne", "cost_so", "poa", "rho_ne", "rho_so"]
DEFAULT_ALPHA_GRID = tuple(0.5 + 0.25 * k for k in range(11))
OUTPUT_FORMATS = ("csv", "json")
ROW_TOLERANCE = 1e-9

# flat keys accepted in experiment files and the YAML ``experiment`` section
EXPERIMENT_KEYS = {
    "alpha_grid", "zeta", "exposure_coef", "exposure_b", "tau_a", "beta_ia",
    "loss", "i_min", "i_max", "d_max", "output_path", "format",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: alpha grid plus every model parameter."""

    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    zeta: float = 1.5
    exposure_coef: float = 30.0
    exposure_b: float = 1.1
    params: GameParams = field(default_factory=lambda: GameParams(tau_a=0.7, beta_ia=1.0, i_min=0.0, i_max=1000.0))
    d_max: int = 20
    output_path: str = "results/sweep.csv"
    loss: float = 10.0
    output_format: str = "csv"

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        if not grid:
            raise InvalidParameter("alpha_grid must not be empty")
        if any(not (np.isfinite(a) and a >= 0) for a in grid):
            raise InvalidParameter(f"alpha_grid entries must be nonnegative, got {grid}")
        object.__setattr__(self, "alpha_grid", grid)
        if int(self.d_max) != self.d_max or self.d_max < 1:
            raise InvalidParameter(f"d_max must be a positive integer, got {self.d_max}")
        if not self.exposure_coef >= 0:
            raise InvalidParameter(f"exposure_coef must be nonnegative, got {self.exposure_coef}")
        if self.output_format not in OUTPUT_FORMATS:
            raise InvalidParameter(f"format must be one of {OUTPUT_FORMATS}, got {self.output_format}")
        # builds and validates the model objects
        self.game()

    def game(self) -> IdsGame:
        """Models for this config; a zero coefficient selects the decoupled exposure."""
        if self.exposure_coef == 0:
            exposure = ExposureModel.decoupled()
        else:
            exposure = ExposureModel.power(self.exposure_coef, self.exposure_b)
        return IdsGame(
            params=self.params,
            infection=InfectionModel.power_law(self.zeta, self.loss),
            exposure=exposure,
        )

    @classmethod
    def from_mapping(cls, mapping: Mapping, base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """
        Build from flat keys, falling back to ``base`` (or the defaults) for
        anything missing.

        Raises:
            ConfigError: unknown key or value of the wrong type
        """
        unknown = set(mapping) - EXPERIMENT_KEYS
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        base = base or cls()
        try:
            params = GameParams(
                tau_a=float(mapping.get("tau_a", base.params.tau_a)),
                beta_ia=float(mapping.get("beta_ia", base.params.beta_ia)),
                i_min=float(mapping.get("i_min", base.params.i_min)),
                i_max=float(mapping.get("i_max", base.params.i_max)),
            )
            grid = mapping.get("alpha_grid", base.alpha_grid)
            if isinstance(grid, (int, float)):
                grid = [grid]
            return cls(
                alpha_grid=tuple(float(a) for a in grid),
                zeta=float(mapping.get("zeta", base.zeta)),
                exposure_coef=float(mapping.get("exposure_coef", base.exposure_coef)),
                exposure_b=float(mapping.get("exposure_b", base.exposure_b)),
                params=params,
                d_max=int(mapping.get("d_max", base.d_max)),
                output_path=str(mapping.get("output_path", base.output_path)),
                loss=float(mapping.get("loss", base.loss)),
                output_format=str(mapping.get("format", base.output_format)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid experiment configuration: {e}") from e

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Apply flat-key overrides (None values are ignored)."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if not overrides:
            return self
        return ExperimentConfig.from_mapping(overrides, base=self)

    def to_mapping(self) -> Dict:
        return {
            "alpha_grid": list(self.alpha_grid),
            "zeta": self.zeta,
            "exposure_coef": self.exposure_coef,
            "exposure_b": self.exposure_b,
            "tau_a": self.params.tau_a,
            "beta_ia": self.params.beta_ia,
            "loss": self.loss,
            "i_min": self.params.i_min,
            "i_max": self.params.i_max,
            "d_max": self.d_max,
            "output_path": self.output_path,
            "format": self.output_format,
        }


def load_experiment_config(
    path: Union[str, Path],
    base: Optional[ExperimentConfig] = None,
) -> ExperimentConfig:
    """
    Parse a ``key = value`` experiment file (``#`` comments, quoted strings,
    ``[a, b]`` lists).

    Raises:
        ConfigError: missing file, syntax error or unknown key
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"experiment config not found: {path}")
    try:
        with open(path, "rb") as f:
            mapping = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    nested = [k for k, v in mapping.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path} must use flat keys, found sections {nested}")
    logger.info(f"Loaded experiment config from {path}")
    return ExperimentConfig.from_mapping(mapping, base=base)


@dataclass(frozen=True, eq=False)
class SweepRow:
    alpha: float
    e_ne: float
    e_so: float
    cost_ne: float
    cost_so: float
    poa: float
    rho_ne: float
    rho_so: float
    avg_degree: float = float("nan")
    ne_profile: Optional[np.ndarray] = field(default=None, repr=False)
    so_profile: Optional[np.ndarray] = field(default=None, repr=False)

    def as_record(self) -> Dict[str, float]:
        return {column: float(getattr(self, column)) for column in SWEEP_COLUMNS}


def check_row(row: SweepRow) -> SweepRow:
    """
    Raises:
        InvariantViolation: PoA below one or SO exposure above NE exposure
    """
    if not row.poa >= 1.0 - ROW_TOLERANCE:
        raise InvariantViolation(f"alpha={row.alpha}: PoA {row.poa!r} < 1")
    if not row.e_so <= row.e_ne + ROW_TOLERANCE:
        raise InvariantViolation(f"alpha={row.alpha}: SO exposure {row.e_so!r} exceeds NE exposure {row.e_ne!r}")
    return row


def _sweep_point(alpha: float, config: ExperimentConfig, game: IdsGame,
                 settings: Optional[FixedPointSettings]) -> SweepRow:
    try:
        census = power_law_census(alpha, config.d_max)
        report = efficiency_report(census, game, settings)
    except IdsGameError as e:
        raise SweepError(alpha, e) from e
    ne, so = report["ne"], report["so"]
    return SweepRow(
        alpha=float(alpha),
        e_ne=ne.exposure,
        e_so=so.exposure,
        cost_ne=ne.social_cost,
        cost_so=so.social_cost,
        poa=report["poa"],
        rho_ne=ne.rho,
        rho_so=so.rho,
        avg_degree=report["avg_degree"],
        ne_profile=np.array(ne.profile.investments),
        so_profile=np.array(so.profile.investments),
    )


def run_sweep(
    config: ExperimentConfig,
    settings: Optional[FixedPointSettings] = None,
    workers: int = 1,
) -> List[SweepRow]:
    """
    Solve NE and social optimum for every alpha in the grid.

    Args:
        config: sweep definition
        settings: fixed-point tolerances
        workers: thread count; rows come back ordered by alpha regardless

    Returns:
        One SweepRow per alpha, sorted by alpha

    Raises:
        SweepError: a solver failed; carries the offending alpha
    """
    game = config.game().validate()
    alphas = sorted(config.alpha_grid)
    logger.info(f"Running sweep over {len(alphas)} alpha values (D_max={config.d_max}, "
                f"zeta={config.zeta}, b={config.exposure_b}, coef={config.exposure_coef})")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda a: _sweep_point(a, config, game, settings), alphas))
    else:
        rows = [_sweep_point(a, config, game, settings) for a in alphas]

    logger.info(f"Sweep complete: PoA range [{min(r.poa for r in rows):.6g}, {max(r.poa for r in rows):.6g}]")
    return rows


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    """Rows as a DataFrame with the fixed column order (invariants checked)."""
    records = [check_row(row).as_record() for row in rows]
    return pd.DataFrame.from_records(records, columns=SWEEP_COLUMNS)


def format_csv(rows: Sequence[SweepRow]) -> str:
    return sweep_frame(rows).to_csv(index=False, float_format="%.17g", lineterminator="\n")


def format_json(rows: Sequence[SweepRow]) -> str:
    records = [check_row(row).as_record() for row in rows]
    return json.dumps(records, indent=2) + "\n"


def _write_text(text: str, path: Union[str, Path]) -> None:
    if str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        directory = path.parent
        if str(directory) and not directory.exists():
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(str(path), e.strerror or str(e)) from e
    logger.info(f"Wrote {path}")


def write_csv(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    """
    Header ``alpha,e_ne,e_so,cost_ne,cost_so,poa,rho_ne,rho_so``, one row
    per alpha, 17 significant digits, LF line endings. ``-`` writes to stdout.

    Raises:
        InvariantViolation: a row breaks PoA >= 1 or e_SO <= e_NE
        OutputError: the file cannot be written
    """
    _write_text(format_csv(rows), path)


def write_json(rows: Sequence[SweepRow], path: Union[str, Path]) -> None:
    """Same fields as write_csv, as a JSON list of objects."""
    _write_text(format_json(rows), path)
