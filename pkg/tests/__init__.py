"""Tests for Multicell Tools."""
