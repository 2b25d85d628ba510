"""
Photoacoustic Toolkit - Run Configuration

Flat ``key = value`` experiment files merged over nondimensional defaults,
with command-line overrides and a reproducibility echo.
"""

import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Iterable, List, Optional

from assembly import Material

__version__ = "0.1.0"

THREADS_ENV = "PAT_NUM_THREADS"


class ConfigError(ValueError):
    """Unknown key, unparsable value or missing config file."""


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

_CONFIG_DEFAULTS = {
    # Mesh: a PATMESH path, or a generated disk of this radius and edge length
    "mesh": "", "radius": 1.0, "h": 0.1,
    "data_mesh": "", "data_h": 0.0,
    # Medium, film and backing
    "c": 1.0, "c_file": "", "rho": 1.0, "rho_b": 2.0, "c_b": 1.0,
    "rho_p": 1.5, "c_p": 1.0, "kappa": 0.9,
    # Time grid; dt = 0 means cfl * h_min / c_max
    "T": 2.0, "dt": 0.0, "cfl": 0.5,
    # Reconstruction
    "gamma": 5e-2, "mu": 0.0, "iterations": 50, "normalize": True,
    "divergence_factor": 100.0,
    # "film" iterates in the film-weighted data norm, "plain" in the boundary L2 norm
    "data_weighting": "film", "step_bound": True, "step_safety": 0.9,
    # Noise and spectra
    "noise_color": "white", "noise_level": 0.1, "noise_seeds": 5, "n_probes": 8, "nperseg": 0,
    "seed": 0,
    # Files
    "phantom": "", "f_true": "", "data": "", "output": "", "html": False,
    # Plane-wave directivity study (SI units)
    "dir_c": 1500.0, "dir_c_p": 2000.0, "dir_rho": 1000.0,
    "dir_rho_b": 2000.0, "dir_c_b": 1000.0,
    "kappa_min": 0.3, "kappa_max": 1.5, "kappa_steps": 5, "n_angles": 181,
}


@dataclass(frozen=True)
class RunConfig:
    mesh: str
    radius: float
    h: float
    data_mesh: str
    data_h: float
    c: float
    c_file: str
    rho: float
    rho_b: float
    c_b: float
    rho_p: float
    c_p: float
    kappa: float
    T: float
    dt: float
    cfl: float
    gamma: float
    mu: float
    iterations: int
    normalize: bool
    divergence_factor: float
    data_weighting: str
    step_bound: bool
    step_safety: float
    noise_color: str
    noise_level: float
    noise_seeds: int
    n_probes: int
    nperseg: int
    seed: int
    phantom: str
    f_true: str
    data: str
    output: str
    html: bool
    dir_c: float
    dir_c_p: float
    dir_rho: float
    dir_rho_b: float
    dir_c_b: float
    kappa_min: float
    kappa_max: float
    kappa_steps: int
    n_angles: int

    def __post_init__(self):
        for key in ("radius", "h", "T", "cfl", "c", "rho", "rho_b", "c_b", "rho_p", "c_p"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        if self.h >= self.radius:
            raise ConfigError(f"h={self.h} must be smaller than radius={self.radius}")
        if self.dt < 0 or self.data_h < 0:
            raise ConfigError("dt and data_h must be non-negative (0 selects the default)")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be non-negative, got {self.kappa}")
        if self.data_weighting not in ("film", "plain"):
            raise ConfigError(f"data_weighting must be 'film' or 'plain', got '{self.data_weighting}'")
        if not 0 < self.step_safety <= 1:
            raise ConfigError(f"step_safety must lie in (0, 1], got {self.step_safety}")
        if self.noise_seeds < 1:
            raise ConfigError(f"noise_seeds must be at least 1, got {self.noise_seeds}")

    def material(self, c=None) -> Material:
        """Material of the configured medium; ``c`` may be a nodal speed array."""
        return Material(
            c=self.c if c is None else c,
            rho=self.rho, rho_b=self.rho_b, c_b=self.c_b,
            rho_p=self.rho_p, c_p=self.c_p, kappa=self.kappa,
        )

    def echo(self) -> List[str]:
        """Sorted ``key=value`` lines plus the toolkit version."""
        lines = [f"{key}={_format(value)}" for key, value in sorted(asdict(self).items())]
        lines.append(f"version={__version__}")
        return lines


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str, where: str):
    if key not in _CONFIG_DEFAULTS:
        raise ConfigError(f"{where}: unknown key '{key}'")
    default = _CONFIG_DEFAULTS[key]
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read '{raw}' as {type(default).__name__} for '{key}'") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {number}: expected 'key = value', got '{line}'")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = _convert(key, raw, f"{source} line {number}")
    return values


def load_config(path: Optional[Path] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Load a config file merged over the defaults, then apply overrides

    Args:
        path: Optional ``key = value`` file
        overrides: ``key=value`` strings, applied last

    Returns:
        RunConfig

    Raises:
        ConfigError: missing file, unknown key or bad value
    """
    saved = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        saved = parse_config_text(path.read_text(encoding="utf-8"), str(path))
    config = RunConfig(**{**_CONFIG_DEFAULTS, **saved})
    return apply_overrides(config, overrides)


def apply_overrides(config: RunConfig, overrides: Iterable[str]) -> RunConfig:
    changes = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        changes[key] = _convert(key, raw, f"override '{item}'")
    return replace(config, **changes) if changes else config


def num_threads() -> int:
    """Worker threads from PAT_NUM_THREADS (default 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {value}")
    return value
