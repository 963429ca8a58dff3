"""
Run Configuration
=================

Loads run parameters from a sectioned ``key = value`` file and merges
command-line overrides on top. The environment supplies only OUTPUT_DIR,
read from ``.env`` (in the working directory or the repository root).
"""

import configparser
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from constants import (
    DEFAULT_FIBER_POINT,
    DEFAULT_WORD_CAP,
    DELTA_TOL,
    SECTION_TOL,
    ConfigError,
    parse_complex,
    parse_potential_spec,
    parse_rep_spec,
    parse_window,
)

# Load environment variables
load_dotenv()
if not os.getenv('OUTPUT_DIR'):
    parent_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    env_path = os.path.join(parent_dir, '.env')
    load_dotenv(env_path)

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config" / "default.cfg"


def output_root() -> Path:
    """Root directory for run outputs (OUTPUT_DIR, default ``runs``)."""
    return Path(os.getenv('OUTPUT_DIR') or "runs")


@dataclass
class RunConfig:
    """Every parameter a subcommand may read; all seeds explicit."""

    R: float = 10.0
    cap: int = DEFAULT_WORD_CAP
    potential: str = "zero"
    rep: str = "fuchsian"
    x: str = str(DEFAULT_FIBER_POINT.real)
    seed: int = 0
    window: str = "8:11"
    radii: str = "8,9,10,11"
    threads: int = os.cpu_count() or 1
    n_samples: int = 10_000
    T: float = 25.0
    matrices: str = "demo2"
    steps: int = 10_000
    points: int = 100
    delta_tol: float = DELTA_TOL
    section_tol: float = SECTION_TOL

    def __post_init__(self):
        self.validate()

    def validate(self):
        """
        Check every field, raising ConfigError on the first bad one.
        """
        if self.R <= 0:
            raise ConfigError(f"R must be positive, got {self.R}")
        if self.cap < 1:
            raise ConfigError(f"cap must be at least 1, got {self.cap}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        for name in ("n_samples", "steps", "points"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.T <= 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        for name in ("delta_tol", "section_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        parse_potential_spec(self.potential)
        parse_rep_spec(self.rep)
        parse_window(self.window)
        self.fiber_point()
        self.radius_list()

    def fiber_point(self) -> complex:
        if self.x.strip().lower() in ("inf", "oo", "infinity"):
            return complex("inf")
        return parse_complex(self.x)

    def window_bounds(self) -> Tuple[float, float]:
        return parse_window(self.window)

    def radius_list(self) -> List[float]:
        try:
            radii = [float(r) for r in self.radii.split(",") if r.strip()]
        except ValueError:
            raise ConfigError(f"Bad radius list: {self.radii!r}")
        if not radii or any(b <= a for a, b in zip(radii, radii[1:])):
            raise ConfigError(f"Radii must be a strictly increasing list: {self.radii!r}")
        return radii

    def snapshot(self) -> Dict[str, Any]:
        data = asdict(self)
        data["tolerances"] = {"delta": data.pop("delta_tol"), "section": data.pop("section_tol")}
        return data


# Config file section for each field
_SECTIONS = {
    "ball": ("R", "cap"),
    "potential": ("potential",),
    "representation": ("rep", "x"),
    "tolerances": ("delta_tol", "section_tol"),
    "run": ("seed", "window", "radii", "threads", "n_samples", "T", "matrices", "steps", "points"),
}


def _coerce(name: str, text: str) -> Any:
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if kind is str:
        return text.strip()
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"Config value {name} = {text!r} is not a {kind.__name__}")


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a sectioned config file into field values.

    Raises:
        ConfigError: On a missing file, syntax error or unknown key
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file {path}: {e}")

    values: Dict[str, Any] = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"Unknown config section [{section}] in {path}")
        for key, text in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"Unknown key {key!r} in section [{section}] of {path}")
            values[key] = _coerce(key, text)
    return values


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from defaults, the config file, then overrides.

    Args:
        path: Config file; the bundled default.cfg when None and it exists
        overrides (dict): Field values from the command line (None values ignored)

    Returns:
        RunConfig: Validated configuration
    """
    values: Dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    elif DEFAULT_CONFIG.exists():
        values.update(read_config_file(DEFAULT_CONFIG))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return RunConfig(**values)
    except TypeError as e:
        raise ConfigError(f"Bad configuration: {e}")
