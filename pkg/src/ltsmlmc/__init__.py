"""Multilevel Monte Carlo for random wave equations with leapfrog local time-stepping."""

__version__ = "0.1.0"
