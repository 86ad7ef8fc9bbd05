"""Descriptive and predictive analytics over long-term surveillance trajectories."""

__version__ = "0.1.0"
