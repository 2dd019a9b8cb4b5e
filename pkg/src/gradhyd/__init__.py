"""Gradient-based calibration of conceptual rainfall-runoff models."""

__version__ = "0.1.0"
