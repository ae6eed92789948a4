"""Spacetime states for continuous-variable quantum systems."""

__version__ = "0.1.0"
