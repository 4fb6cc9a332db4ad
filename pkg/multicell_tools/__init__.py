"""Multicell Tools - uplink rates for multicell joint processing over finite backhaul."""

__version__ = "0.1.0"
