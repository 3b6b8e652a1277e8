"""Calibration of ensemble wind-speed forecasts."""

__version__ = "0.1.0"
