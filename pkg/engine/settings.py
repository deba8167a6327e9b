"""
Application configuration loader (config/config.yaml)
"""

from pathlib import Path
from typing import Dict, Optional, Union

import yaml
from logzero import logger

from .errors import ConfigError
from .equilibrium import FixedPointSettings
from .response import ScalarSolveSettings

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_PATH = PROJECT_ROOT / "config" / "config.yaml"


def load_settings(path: Optional[Union[str, Path]] = None) -> Dict:
    """
    Read the YAML configuration.

    Args:
        path: YAML file; defaults to config/config.yaml in the project root

    Returns:
        Nested dict with ``experiment``, ``solver`` and ``logging`` sections
        (missing sections come back empty)

    Raises:
        ConfigError: file missing or not valid YAML
    """
    path = Path(path) if path else DEFAULT_CONFIG_PATH
    if not path.exists():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            config = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}") from e
    if not isinstance(config, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")

    for section in ("experiment", "solver", "logging"):
        config.setdefault(section, {})
        if not isinstance(config[section], dict):
            raise ConfigError(f"section '{section}' in {path} must be a mapping")
    logger.debug(f"Loaded settings from {path}")
    return config


def fixed_point_settings(config: Dict, rho_tolerance: Optional[float] = None) -> FixedPointSettings:
    """Solver section -> FixedPointSettings (``rho_tolerance`` overrides the file)."""
    solver = config.get("solver", {}) or {}
    try:
        return FixedPointSettings(
            rho_tolerance=float(rho_tolerance if rho_tolerance is not None
                                else solver.get("rho_tolerance", 1e-12)),
            max_iterations=int(solver.get("max_iterations", 400)),
            scalar=ScalarSolveSettings(
                tolerance=float(solver.get("scalar_tolerance", 1e-10)),
                max_iterations=int(solver.get("scalar_max_iterations", 200)),
            ),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid solver settings: {e}") from e
