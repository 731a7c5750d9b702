"""Experiment configuration: defaults, flat key = value files and command-line overrides."""

import logging
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .errors import ConfigError, GapLabError
from .exact_queues import CostParams
from .expansions import ExponentialPatience, HyperexponentialPatience, PatienceDist, RhoConvention

logger = logging.getLogger(__name__)

MODELS = ("mmn-hw", "mmna-diffusion", "mmng-fluid")
COMMANDS = ("prescribe", "evaluate", "gap-table", "approx-check", "constrained")

# Pattern to match "key = value" lines
CONFIG_LINE_PATTERN = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_-]*)\s*=\s*(.*?)\s*$")
PATIENCE_PATTERN = re.compile(r"^\s*(exp|hyperexp)\s*:\s*(.+?)\s*$", re.IGNORECASE)

_DECADES_2_6 = (1e2, 1e3, 1e4, 1e5, 1e6)
_DECADES_2_5 = (1e2, 1e3, 1e4, 1e5)
_DECADES_2_4 = (1e2, 1e3, 1e4)

DEFAULT_GRIDS: Dict[Tuple[str, str], Tuple[float, ...]] = {
    ("mmn-hw", "*"): _DECADES_2_6,
    ("mmna-diffusion", "approx-check"): _DECADES_2_5,
    ("mmna-diffusion", "*"): _DECADES_2_4,
    ("mmng-fluid", "*"): _DECADES_2_4,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated settings of one experiment run.

    An empty ``n_grid`` selects the model's default grid for the command.
    """
    model: str = "mmn-hw"
    n_grid: Tuple[float, ...] = ()
    mu: float = 1.0
    gamma: Optional[float] = None
    h: float = 1.0
    c: float = 1.0
    patience: Optional[str] = None
    rho_convention: RhoConvention = RhoConvention.UTILIZATION
    x: Tuple[float, ...] = (0.5, 1.0, 2.0)
    refined: bool = False
    alpha: Optional[float] = None
    delta: float = 0.05
    window: Optional[int] = None
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError("model", f"expected one of {', '.join(MODELS)}, got {self.model!r}")
        grid = self.n_grid
        if any(not (math.isfinite(n) and n > 0) for n in grid):
            raise ConfigError("n_grid", "values must be finite and > 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid", "values must be strictly increasing")
        _require(self.mu > 0 and math.isfinite(self.mu), "mu", "must be finite and > 0")
        if self.gamma is not None:
            _require(self.gamma > 0 and math.isfinite(self.gamma), "gamma", "must be finite and > 0")
        _require(self.h >= 0 and math.isfinite(self.h), "h", "must be finite and >= 0")
        _require(self.c > 0 and math.isfinite(self.c), "c", "must be finite and > 0")
        _require(all(math.isfinite(v) for v in self.x), "x", "probe points must be finite")
        if self.alpha is not None:
            _require(0.0 < self.alpha < 1.0, "alpha", "must lie in (0, 1)")
        _require(self.delta > 0 and math.isfinite(self.delta), "delta", "must be finite and > 0")
        if self.window is not None:
            _require(self.window >= 1, "window", "must be an integer >= 1")
        _require(self.workers >= 1, "workers", "must be an integer >= 1")
        if self.patience is not None:
            self.patience_dist()

    def grid_for(self, command: str) -> Tuple[float, ...]:
        """The configured n-grid, else the model's default for ``command``."""
        if self.n_grid:
            return self.n_grid
        return DEFAULT_GRIDS.get((self.model, command), DEFAULT_GRIDS[(self.model, "*")])

    def cost_params(self) -> CostParams:
        return CostParams(h=self.h, c=self.c)

    def patience_dist(self) -> PatienceDist:
        """The configured patience law; exponential with rate gamma by default."""
        if self.patience is not None:
            return parse_patience(self.patience)
        if self.gamma is None:
            raise ConfigError("gamma", f"model {self.model} needs gamma or patience")
        return ExponentialPatience(self.gamma)

    def require_gamma(self) -> float:
        """Abandonment rate of exponential patience, from gamma or an exp: patience."""
        if self.gamma is not None:
            return self.gamma
        dist = self.patience_dist()
        if isinstance(dist, ExponentialPatience):
            return dist.gamma
        raise ConfigError("patience", "exact evaluation needs exponential patience")


def _require(ok: bool, key: str, reason: str) -> None:
    if not ok:
        raise ConfigError(key, reason)


def parse_float_list(raw: str, key: str = "n_grid") -> Tuple[float, ...]:
    """Parse a comma separated list of reals."""
    try:
        values = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(key, f"expected a comma separated list of numbers, got {raw!r}")
    if not values:
        raise ConfigError(key, "empty list")
    return values


def parse_patience(raw: str) -> PatienceDist:
    """Parse ``exp:gamma`` or ``hyperexp:p,a,b``."""
    match = PATIENCE_PATTERN.match(raw)
    if not match:
        raise ConfigError("patience", f"expected exp:GAMMA or hyperexp:P,A,B, got {raw!r}")
    family, params = match.group(1).lower(), parse_float_list(match.group(2), "patience")
    try:
        if family == "exp" and len(params) == 1:
            return ExponentialPatience(params[0])
        if family == "hyperexp" and len(params) == 3:
            return HyperexponentialPatience(*params)
    except GapLabError as e:
        raise ConfigError("patience", str(e)) from e
    raise ConfigError("patience", f"wrong number of parameters for {family}: {raw!r}")


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {raw!r}")


def _parse_int(raw: str, key: str) -> int:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {raw!r}")
    if not value.is_integer():
        raise ConfigError(key, f"expected an integer, got {raw!r}")
    return int(value)


def _parse_float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {raw!r}")


def _parse_rho(raw: str, key: str) -> RhoConvention:
    try:
        return RhoConvention(raw.strip().lower())
    except ValueError:
        raise ConfigError(key, f"expected utilization or unit, got {raw!r}")


_PARSERS = {
    "model": lambda raw, key: raw.strip(),
    "n_grid": parse_float_list,
    "mu": _parse_float,
    "gamma": _parse_float,
    "h": _parse_float,
    "c": _parse_float,
    "patience": lambda raw, key: raw.strip(),
    "rho_convention": _parse_rho,
    "x": parse_float_list,
    "refined": _parse_bool,
    "alpha": _parse_float,
    "delta": _parse_float,
    "window": _parse_int,
    "workers": _parse_int,
    "out": lambda raw, key: raw.strip(),
}


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def coerce_value(key: str, raw: str) -> Any:
    """Convert the text of one setting to its typed value."""
    key = normalize_key(key)
    if key not in _PARSERS:
        raise ConfigError(key, "unknown setting")
    return _PARSERS[key](raw, key)


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse a flat key = value document.

    Args:
        text: File contents. ``#`` starts a comment; blank lines are ignored.

    Returns:
        Mapping of normalized keys to typed values.
    """
    settings: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        match = CONFIG_LINE_PATTERN.match(stripped)
        if not match:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line.strip()!r}")
        key = normalize_key(match.group(1))
        settings[key] = coerce_value(key, match.group(2))
    return settings


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Build a configuration from defaults, an optional file and explicit overrides.

    Later sources win; ``None`` values in ``overrides`` are ignored.

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values.
    """
    settings: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError("config", f"cannot read {path}: {e}") from e
        settings.update(parse_config_text(text))
        logger.info("Loaded %d settings from %s", len(settings), path)
    for key, value in (overrides or {}).items():
        if value is not None:
            key = normalize_key(key)
            if key not in _PARSERS:
                raise ConfigError(key, "unknown setting")
            settings[key] = value
    known = {f.name for f in fields(ExperimentConfig)}
    return replace(ExperimentConfig(), **{k: v for k, v in settings.items() if k in known})
