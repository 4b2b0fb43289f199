"""Gait pressure time-series value prediction at desk scale."""

__version__ = "0.1.0"
