"""Simulation configuration and its flat ``key=value`` file format."""

import dataclasses
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Union

from multicell_tools.utils import format_capacity, parse_capacity

logger = logging.getLogger(__name__)

CAMPAIGN_SCHEMES = ("baseline", "wz", "nowz")
ALLOCATION_MODES = ("uniform", "optimized")
MULTIPATH_PROFILES = ("peda", "flat")

_TRUE = ("true", "yes", "1", "on")
_FALSE = ("false", "no", "0", "off")


class ConfigError(ValueError):
    """Raised for unknown keys or invalid values in a configuration file."""


@dataclass
class SimConfig:
    """Parameters of the sectorized OFDMA uplink campaign."""

    cells: int = 19
    sectors_per_cell: int = 3
    users_per_sector: int = 10
    bandwidth_hz: float = 10e6
    tones: int = 64
    bs_distance_m: float = 600.0
    tx_psd_dbm_hz: float = -27.0
    antenna_gain_dbi: float = 15.0
    beamwidth_deg: float = 70.0
    front_to_back_db: float = 20.0
    noise_psd_dbm_hz: float = -169.0
    noise_figure_db: float = 7.0
    pathloss_intercept_db: float = 128.1
    pathloss_slope_db: float = 37.6
    multipath: str = "peda"
    min_distance_m: float = 35.0
    wrap_around: bool = True
    seed: int = 1
    drops: int = 10
    scheme: str = "wz"
    backhaul_per_bs_mbps: float = 180.0
    allocation: str = "uniform"
    workers: int = 1

    @property
    def rings(self) -> int:
        """Number of hexagonal rings around the center cell."""
        rings = 0
        while 3 * rings * rings + 3 * rings + 1 < self.cells:
            rings += 1
        return rings

    @property
    def sectors(self) -> int:
        """Total number of sectors, i.e. users scheduled on each tone."""
        return self.cells * self.sectors_per_cell

    @property
    def users(self) -> int:
        """Total number of users per drop."""
        return self.sectors * self.users_per_sector

    @property
    def tone_spacing_hz(self) -> float:
        """Bandwidth of one tone, also its symbol rate."""
        return self.bandwidth_hz / self.tones

    def validate(self) -> None:
        """
        Check value ranges and enumerations.

        Raises:
            ConfigError: On the first invalid field
        """
        counts = ("cells", "sectors_per_cell", "users_per_sector", "tones", "drops", "workers")
        for name in counts:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if 3 * self.rings * self.rings + 3 * self.rings + 1 != self.cells:
            raise ConfigError(f"cells must be 1, 7, 19, 37, ... (hexagonal), got {self.cells}")
        if self.sectors_per_cell != 3:
            raise ConfigError("Only three sectors per cell are supported")
        positive = ("bandwidth_hz", "bs_distance_m", "beamwidth_deg")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.min_distance_m < 0 or self.min_distance_m >= self.bs_distance_m / math.sqrt(3):
            raise ConfigError(f"min_distance_m out of range: {self.min_distance_m}")
        if self.backhaul_per_bs_mbps < 0:
            raise ConfigError("backhaul_per_bs_mbps cannot be negative")
        if self.scheme not in CAMPAIGN_SCHEMES:
            raise ConfigError(f"scheme must be one of {CAMPAIGN_SCHEMES}, got {self.scheme!r}")
        if self.allocation not in ALLOCATION_MODES:
            raise ConfigError(
                f"allocation must be one of {ALLOCATION_MODES}, got {self.allocation!r}"
            )
        if self.multipath not in MULTIPATH_PROFILES:
            raise ConfigError(
                f"multipath must be one of {MULTIPATH_PROFILES}, got {self.multipath!r}"
            )

    def replace(self, **changes: Any) -> "SimConfig":
        """Copy with some fields changed, validated."""
        updated = dataclasses.replace(self, **changes)
        updated.validate()
        return updated

    def to_text(self) -> str:
        """Render every field as ``key=value`` lines."""
        lines = []
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, float):
                value = format_capacity(value)
            lines.append(f"{item.name}={value}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, kind: type, text: str) -> Any:
    if kind is bool:
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        if name == "backhaul_per_bs_mbps":
            return parse_capacity(text)
        return float(text)
    return text.lower()


def parse_config(text: str) -> SimConfig:
    """
    Parse ``key=value`` lines into a validated SimConfig.

    Blank lines and ``#`` comments are ignored; keys not given keep their defaults.

    Raises:
        ConfigError: On malformed lines, unknown keys or invalid values
    """
    kinds = {item.name: _resolve_type(item.type) for item in fields(SimConfig)}
    values: dict[str, Any] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {line_no}: expected key=value, got {raw.strip()!r}")

        key, value = (part.strip() for part in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"Line {line_no}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, kinds[key], value)
        except ValueError as e:
            raise ConfigError(f"Line {line_no}: invalid value for {key}: {e}") from e

    config = SimConfig(**values)
    config.validate()
    return config


def _resolve_type(kind: Union[type, str]) -> type:
    # annotations are plain builtins, possibly stringified
    if isinstance(kind, str):
        return {"int": int, "float": float, "str": str, "bool": bool}[kind]
    return kind


def load_config(path: Union[str, Path]) -> SimConfig:
    """
    Load a configuration file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ConfigError: If the content is invalid
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise FileNotFoundError(f"Config file does not exist: {file_path}")
    config = parse_config(file_path.read_text())
    logger.debug("Loaded configuration from %s", file_path)
    return config
