"""Tests for the gaplab package."""
