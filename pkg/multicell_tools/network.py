"""Network instances for the uplink multicell model and their derived SNR/INR quantities."""

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from multicell_tools.utils import db_to_linear, parse_capacity

logger = logging.getLogger(__name__)


class InstanceFormatError(ValueError):
    """Raised when a network instance text file cannot be parsed."""


def _as_vector(values: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    vector = np.array(values, dtype=float).reshape(-1)
    vector.setflags(write=False)
    return vector


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """
    An L-user uplink with one base-station per user.

    ``gains[i, j]`` is the real amplitude gain from user i to base-station j.
    Backhaul capacities are in bits per real channel use and may be infinite.
    """

    gains: np.ndarray
    powers: np.ndarray
    noise: float
    backhaul: np.ndarray

    def __post_init__(self) -> None:
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 2 or gains.shape[0] != gains.shape[1] or gains.shape[0] < 1:
            raise ValueError(f"Gain matrix must be square with L >= 1, got shape {gains.shape}")
        if not np.all(np.isfinite(gains)):
            raise ValueError("All gains must be finite")
        gains.setflags(write=False)

        size = gains.shape[0]
        powers = _as_vector(self.powers)
        backhaul = _as_vector(self.backhaul)
        if powers.shape[0] != size or backhaul.shape[0] != size:
            raise ValueError(
                f"Expected {size} powers and backhaul capacities, "
                f"got {powers.shape[0]} and {backhaul.shape[0]}"
            )
        if np.any(~np.isfinite(powers)) or np.any(powers < 0):
            raise ValueError("Powers must be finite and non-negative")
        if np.any(np.isnan(backhaul)) or np.any(backhaul < 0):
            raise ValueError("Backhaul capacities must be non-negative")
        noise = float(self.noise)
        if not math.isfinite(noise) or noise <= 0:
            raise ValueError(f"Noise level must be positive, got {self.noise}")

        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "backhaul", backhaul)
        object.__setattr__(self, "noise", noise)

    @property
    def L(self) -> int:
        """Number of user/base-station pairs."""
        return int(self.gains.shape[0])

    def with_backhaul(self, backhaul: Union[Sequence[float], np.ndarray]) -> "NetworkInstance":
        """Return a copy of this instance with different backhaul capacities."""
        return replace(self, backhaul=np.array(backhaul, dtype=float))

    def is_wyner_pattern(self) -> bool:
        """Check that only h_ii and h_{i+1,i} are non-zero."""
        mask = np.eye(self.L, dtype=bool) | np.eye(self.L, k=-1, dtype=bool)
        return bool(np.all(self.gains[~mask] == 0.0))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NetworkInstance):
            return NotImplemented
        return (
            np.array_equal(self.gains, other.gains)
            and np.array_equal(self.powers, other.powers)
            and self.noise == other.noise
            and np.array_equal(self.backhaul, other.backhaul)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class DerivedRatios:
    """SNR vector and INR matrix of a network instance (INR diagonal set to 0)."""

    snr: np.ndarray
    inr: np.ndarray


@dataclass(frozen=True, eq=False)
class WynerInstance:
    """A soft-handoff Wyner network: user i+1 interferes only at base-station i."""

    network: NetworkInstance
    weak_interference: bool

    @property
    def L(self) -> int:
        """Number of user/base-station pairs."""
        return self.network.L

    @property
    def snr(self) -> np.ndarray:
        """SNR_i for i = 1..L."""
        return derive_ratios(self.network).snr

    @property
    def inr(self) -> np.ndarray:
        """INR_{i+1,i} for i = 1..L-1."""
        ratios = derive_ratios(self.network)
        return np.array([ratios.inr[i + 1, i] for i in range(self.L - 1)])

    @property
    def backhaul(self) -> np.ndarray:
        """Backhaul capacities C_i."""
        return self.network.backhaul


def derive_ratios(net: NetworkInstance) -> DerivedRatios:
    """
    Compute SNR_i = h_ii^2 P_i / N0 and INR_{i,j} = h_ij^2 P_i / N0.

    Args:
        net: Network instance

    Returns:
        DerivedRatios with the INR diagonal set to zero
    """
    received = np.square(net.gains) * net.powers[:, None] / net.noise
    snr = np.diag(received).copy()
    inr = received.copy()
    np.fill_diagonal(inr, 0.0)
    snr.setflags(write=False)
    inr.setflags(write=False)
    return DerivedRatios(snr=snr, inr=inr)


def make_symmetric_two_user(snr: float, inr: float, c: float) -> NetworkInstance:
    """
    Build the symmetric two-user instance with P1 = P2 = N0 = 1.

    Args:
        snr: Linear direct-link SNR
        inr: Linear cross-link INR
        c: Backhaul capacity of both base-stations, in bits

    Returns:
        NetworkInstance with gains sqrt(snr) on the diagonal and sqrt(inr) off it

    Raises:
        ValueError: If any input is negative
    """
    if snr < 0 or inr < 0 or c < 0:
        raise ValueError(f"snr, inr and c must be non-negative, got {snr}, {inr}, {c}")

    direct, cross = math.sqrt(snr), math.sqrt(inr)
    return NetworkInstance(
        gains=np.array([[direct, cross], [cross, direct]]),
        powers=np.ones(2),
        noise=1.0,
        backhaul=np.array([c, c], dtype=float),
    )


def make_wyner(
    snr: Union[Sequence[float], np.ndarray],
    inr: Union[Sequence[float], np.ndarray],
    backhaul: Union[Sequence[float], np.ndarray],
) -> WynerInstance:
    """
    Build a Wyner soft-handoff instance with unit powers and noise.

    Args:
        snr: Length-L vector of SNR_i
        inr: Length-(L-1) vector of INR_{i+1,i}
        backhaul: Length-L vector of C_i

    Returns:
        WynerInstance with the weak-interference flag set

    Raises:
        ValueError: If the vector lengths are inconsistent or values are negative
    """
    snr_vec = np.asarray(snr, dtype=float).reshape(-1)
    inr_vec = np.asarray(inr, dtype=float).reshape(-1)
    size = snr_vec.shape[0]
    if size < 1 or inr_vec.shape[0] != size - 1 or len(backhaul) != size:
        raise ValueError(
            f"Length mismatch: {size} SNRs need {max(size - 1, 0)} INRs and {size} "
            f"backhaul values, got {inr_vec.shape[0]} and {len(backhaul)}"
        )
    if np.any(snr_vec < 0) or np.any(inr_vec < 0):
        raise ValueError("SNR and INR values must be non-negative")

    gains = np.diag(np.sqrt(snr_vec))
    for i, value in enumerate(inr_vec):
        gains[i + 1, i] = math.sqrt(value)

    network = NetworkInstance(gains=gains, powers=np.ones(size), noise=1.0, backhaul=backhaul)
    return WynerInstance(network=network, weak_interference=bool(np.all(inr_vec <= snr_vec[:-1])))


def as_wyner(net: NetworkInstance) -> WynerInstance:
    """
    Interpret a general instance as a Wyner instance.

    Raises:
        ValueError: If the gain matrix is not bidiagonal in the Wyner pattern
    """
    if not net.is_wyner_pattern():
        raise ValueError("Instance does not have the Wyner sparsity pattern")
    ratios = derive_ratios(net)
    weak = all(ratios.inr[i + 1, i] <= ratios.snr[i] for i in range(net.L - 1))
    return WynerInstance(network=net, weak_interference=weak)


def random_instance(
    seed: Union[int, np.random.SeedSequence],
    L: int,
    snr_range_db: tuple[float, float] = (0.0, 30.0),
    inr_range_db: tuple[float, float] = (-10.0, 20.0),
    backhaul_range: tuple[float, float] = (0.0, 8.0),
    wyner: bool = False,
) -> NetworkInstance:
    """
    Draw a reproducible random instance with unit powers and noise.

    SNRs are uniform in dB over ``snr_range_db``. In Wyner mode INR_{i+1,i} is drawn
    uniformly in [0, SNR_i] so the weak-interference condition always holds; otherwise
    every cross link gets an INR uniform in dB over ``inr_range_db``.

    Args:
        seed: Seed for numpy's default generator
        L: Number of users
        snr_range_db: SNR interval in dB
        inr_range_db: INR interval in dB (ignored in Wyner mode)
        backhaul_range: Backhaul interval in bits
        wyner: Whether to draw a Wyner soft-handoff instance

    Returns:
        NetworkInstance
    """
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L}")
    for low, high in (snr_range_db, inr_range_db, backhaul_range):
        if low > high:
            raise ValueError(f"Invalid range ({low}, {high})")
    if backhaul_range[0] < 0:
        raise ValueError("Backhaul range must be non-negative")

    rng = np.random.default_rng(seed)
    snr = db_to_linear(rng.uniform(*snr_range_db, size=L))
    backhaul = rng.uniform(*backhaul_range, size=L)

    if wyner:
        inr = rng.uniform(0.0, 1.0, size=L - 1) * snr[:-1]
        return make_wyner(snr, inr, backhaul).network

    inr = db_to_linear(rng.uniform(*inr_range_db, size=(L, L)))
    gains = np.sqrt(inr)
    np.fill_diagonal(gains, np.sqrt(snr))
    return NetworkInstance(gains=gains, powers=np.ones(L), noise=1.0, backhaul=backhaul)


def parse_instance(text: str) -> NetworkInstance:
    """
    Parse the flat text instance format.

    One entry per line: ``L=<n>``, ``N0=<v>``, ``h <i> <j> <value>``, ``P <i> <value>``,
    ``C <i> <value|inf>``. Indices are 1-based, ``#`` starts a comment, and missing
    gains default to zero.

    Raises:
        InstanceFormatError: On malformed lines, out-of-range indices or missing entries
    """
    size: Optional[int] = None
    noise: Optional[float] = None
    gains: dict[tuple[int, int], float] = {}
    powers: dict[int, float] = {}
    backhaul: dict[int, float] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue

        try:
            if "=" in line:
                key, value = (part.strip() for part in line.split("=", 1))
                if key == "L":
                    size = int(value)
                elif key == "N0":
                    noise = float(value)
                else:
                    raise InstanceFormatError(f"Line {line_no}: unknown key {key!r}")
                continue

            fields = line.split()
            kind = fields[0]
            if kind == "h" and len(fields) == 4:
                gains[(int(fields[1]), int(fields[2]))] = float(fields[3])
            elif kind == "P" and len(fields) == 3:
                powers[int(fields[1])] = float(fields[2])
            elif kind == "C" and len(fields) == 3:
                backhaul[int(fields[1])] = parse_capacity(fields[2])
            else:
                raise InstanceFormatError(f"Line {line_no}: cannot parse {raw.strip()!r}")
        except InstanceFormatError:
            raise
        except ValueError as e:
            raise InstanceFormatError(f"Line {line_no}: {e}") from e

    if size is None or noise is None:
        raise InstanceFormatError("Instance must define both L and N0")
    if size < 1:
        raise InstanceFormatError(f"L must be at least 1, got {size}")

    indices = range(1, size + 1)
    for i, j in list(gains) + [(k, k) for k in list(powers) + list(backhaul)]:
        if i not in indices or j not in indices:
            raise InstanceFormatError(f"Index ({i}, {j}) out of range for L={size}")
    missing = [k for k in indices if k not in powers or k not in backhaul]
    if missing:
        raise InstanceFormatError(f"Missing P or C entries for users {missing}")

    matrix = np.zeros((size, size))
    for (i, j), value in gains.items():
        matrix[i - 1, j - 1] = value

    try:
        return NetworkInstance(
            gains=matrix,
            powers=[powers[k] for k in indices],
            noise=noise,
            backhaul=[backhaul[k] for k in indices],
        )
    except ValueError as e:
        raise InstanceFormatError(str(e)) from e


def _format_exact(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


def dump_instance(net: NetworkInstance) -> str:
    """Render an instance in the flat text format (zero gains are omitted)."""
    lines = [f"L={net.L}", f"N0={net.noise!r}"]
    for i in range(net.L):
        for j in range(net.L):
            if net.gains[i, j] != 0.0:
                lines.append(f"h {i + 1} {j + 1} {float(net.gains[i, j])!r}")
    lines.extend(f"P {i + 1} {float(net.powers[i])!r}" for i in range(net.L))
    lines.extend(f"C {i + 1} {_format_exact(net.backhaul[i])}" for i in range(net.L))
    return "\n".join(lines) + "\n"


def load_instance(path: Union[str, Path]) -> NetworkInstance:
    """
    Load an instance file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        InstanceFormatError: If the content is malformed
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise FileNotFoundError(f"Instance file does not exist: {file_path}")
    net = parse_instance(file_path.read_text())
    logger.debug("Loaded %d-user instance from %s", net.L, file_path)
    return net
