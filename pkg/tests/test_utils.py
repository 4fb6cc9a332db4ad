"""Tests for utility functions."""

import math

import numpy as np
import pandas as pd
import pytest

from multicell_tools.utils import (
    db_to_linear,
    exp2_minus_one,
    format_bits,
    format_capacity,
    format_mbps,
    half_log2,
    linear_to_db,
    parse_capacity,
    parse_float_list,
    write_frame,
)


class TestDecibels:
    """Tests for dB conversions."""

    def test_db_to_linear(self) -> None:
        """Test converting dB to a linear ratio."""
        assert db_to_linear(30.0) == pytest.approx(1000.0)
        assert db_to_linear(0.0) == pytest.approx(1.0)
        assert db_to_linear(-10.0) == pytest.approx(0.1)

    def test_db_to_linear_array(self) -> None:
        """Test that arrays are converted elementwise."""
        values = db_to_linear(np.array([0.0, 10.0, 20.0]))
        assert values == pytest.approx([1.0, 10.0, 100.0])

    def test_linear_to_db(self) -> None:
        """Test converting a linear ratio to dB."""
        assert linear_to_db(100.0) == pytest.approx(20.0)
        assert linear_to_db(0.0) == -math.inf

    def test_round_trip(self) -> None:
        """Test that the conversions invert each other."""
        assert linear_to_db(db_to_linear(17.3)) == pytest.approx(17.3)


class TestCapacityTerms:
    """Tests for the log2 helpers."""

    def test_half_log2(self) -> None:
        """Test the half-log2 term."""
        assert half_log2(4.0) == pytest.approx(1.0)
        assert half_log2(1.0) == 0.0

    def test_exp2_minus_one(self) -> None:
        """Test 2**x - 1 for small, regular and infinite exponents."""
        assert exp2_minus_one(0.5) == pytest.approx(math.sqrt(2.0) - 1.0)
        assert exp2_minus_one(1e-12) == pytest.approx(1e-12 * math.log(2.0), rel=1e-9)
        assert exp2_minus_one(math.inf) == math.inf
        assert exp2_minus_one(0.0) == 0.0


class TestParseCapacity:
    """Tests for parse_capacity function."""

    def test_numbers(self) -> None:
        """Test parsing plain numbers."""
        assert parse_capacity("5") == 5.0
        assert parse_capacity(" 2.5 ") == 2.5
        assert parse_capacity("1e2") == 100.0
        assert parse_capacity(".5") == 0.5

    def test_infinity(self) -> None:
        """Test parsing unlimited capacities."""
        assert parse_capacity("inf") == math.inf
        assert parse_capacity("INF") == math.inf
        assert parse_capacity("infinity") == math.inf

    def test_invalid(self) -> None:
        """Test that invalid or negative values are rejected."""
        with pytest.raises(ValueError, match="Invalid capacity"):
            parse_capacity("abc")
        with pytest.raises(ValueError, match="Invalid capacity"):
            parse_capacity("-1")
        with pytest.raises(ValueError, match="Invalid capacity"):
            parse_capacity("")

    def test_float_list(self) -> None:
        """Test parsing comma-separated backhaul levels."""
        assert parse_float_list("60,120,inf") == [60.0, 120.0, math.inf]
        assert parse_float_list("5,") == [5.0]

    def test_float_list_invalid(self) -> None:
        """Test that empty or malformed lists are rejected."""
        with pytest.raises(ValueError, match="comma-separated"):
            parse_float_list(" , ")
        with pytest.raises(ValueError, match="Invalid capacity"):
            parse_float_list("60,x")


class TestFormatting:
    """Tests for display helpers."""

    def test_format_bits(self) -> None:
        """Test formatting rates in bits."""
        assert format_bits(1.71642) == "1.7164 bits"
        assert format_bits(2.0, 1) == "2.0 bits"
        assert format_bits(math.inf) == "inf bits"

    def test_format_mbps(self) -> None:
        """Test formatting throughput."""
        assert format_mbps(55.456) == "55.46 Mbps"

    def test_format_capacity(self) -> None:
        """Test formatting capacities for text files."""
        assert format_capacity(math.inf) == "inf"
        assert format_capacity(180.0) == "180"
        assert format_capacity(0.25) == "0.25"


class TestWriteFrame:
    """Tests for write_frame function."""

    def test_text(self) -> None:
        """Test CSV text without a file."""
        frame = pd.DataFrame({"a": [1.5, 2.0], "b": ["x", "y"]})
        assert write_frame(frame) == "a,b\n1.5,x\n2,y\n"

    def test_writes_file(self, tmp_path) -> None:
        """Test that the parent directory is created and the file matches the text."""
        frame = pd.DataFrame({"value": [1.0 / 3.0]})
        target = tmp_path / "nested" / "out.csv"
        text = write_frame(frame, target)
        assert target.read_text() == text
        assert text == "value\n0.3333333333\n"
