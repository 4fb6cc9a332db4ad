"""Utility functions shared by the rate, bound and simulation modules."""

import math
import re
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

ArrayLike = Union[float, np.ndarray]

CSV_FLOAT_FORMAT = "%.10g"


class EnumerationLimitError(ValueError):
    """Raised when an exhaustive enumeration is requested beyond its size guard."""


def db_to_linear(value_db: ArrayLike) -> ArrayLike:
    """
    Convert a power ratio in dB to a linear ratio.

    Examples:
        >>> db_to_linear(30.0)
        1000.0
        >>> db_to_linear(0.0)
        1.0
    """
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)[()]


def linear_to_db(value: ArrayLike) -> ArrayLike:
    """
    Convert a linear power ratio to dB. Zero maps to -inf.

    Examples:
        >>> linear_to_db(100.0)
        20.0
    """
    with np.errstate(divide="ignore"):
        return (10.0 * np.log10(np.asarray(value, dtype=float)))[()]


def dbm_to_watts(value_dbm: ArrayLike) -> ArrayLike:
    """Convert dBm to watts."""
    return np.power(10.0, (np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)[()]


def half_log2(value: ArrayLike) -> ArrayLike:
    """
    Compute the real-channel capacity term 0.5 * log2(value).

    Args:
        value: Ratio(s), must be positive

    Returns:
        Bits per real channel use
    """
    return (0.5 * np.log2(np.asarray(value, dtype=float)))[()]


def exp2_minus_one(exponent: ArrayLike) -> ArrayLike:
    """
    Compute 2**exponent - 1 accurately for small exponents.

    Infinite exponents give infinity, which callers rely on for unlimited backhaul.
    """
    return np.expm1(np.asarray(exponent, dtype=float) * math.log(2.0))[()]


def parse_capacity(text: str) -> float:
    """
    Parse a non-negative capacity value, accepting "inf" for an unlimited link.

    Args:
        text: Number or "inf"/"infinity" (case-insensitive)

    Returns:
        Capacity as float

    Raises:
        ValueError: If the text is not a number or the value is negative

    Examples:
        >>> parse_capacity("5")
        5.0
        >>> parse_capacity("inf")
        inf
    """
    cleaned = text.strip().lower()
    if cleaned in ("inf", "+inf", "infinity"):
        return math.inf

    if not re.match(r"^[+]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$", cleaned):
        raise ValueError(f"Invalid capacity: {text!r}")

    value = float(cleaned)
    if value < 0:
        raise ValueError(f"Capacity cannot be negative: {text!r}")
    return value


def parse_float_list(text: str) -> list[float]:
    """
    Parse a comma-separated list of capacities such as "60,120,inf".

    Raises:
        ValueError: If any entry is invalid or the list is empty
    """
    items = [item for item in text.split(",") if item.strip()]
    if not items:
        raise ValueError("Expected a comma-separated list of values")
    return [parse_capacity(item) for item in items]


def format_capacity(value: float) -> str:
    """Render a capacity for text formats, using "inf" for unlimited links."""
    if math.isinf(value):
        return "inf"
    return f"{value:.12g}"


def format_bits(bits: float, decimal_places: int = 4) -> str:
    """
    Format a rate in bits for display.

    Examples:
        >>> format_bits(1.71642)
        '1.7164 bits'
        >>> format_bits(float("inf"))
        'inf bits'
    """
    if math.isinf(bits):
        return "inf bits"
    return f"{bits:.{decimal_places}f} bits"


def format_mbps(rate_mbps: float, decimal_places: int = 2) -> str:
    """Format a throughput in Mbps for display."""
    return f"{rate_mbps:.{decimal_places}f} Mbps"


def write_frame(frame: pd.DataFrame, path: Optional[Union[str, Path]] = None) -> str:
    """
    Serialize a table to CSV text, optionally writing it to a file as well.

    The float format is fixed so identical inputs always give byte-identical output.

    Args:
        frame: Table to serialize
        path: Optional output file path; parent directories are created

    Returns:
        CSV text
    """
    text: str = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        out_path = Path(path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(text)
    return text
