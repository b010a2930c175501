"""Trajectory planning with diffusion models steered by finite-trace LTL."""

__version__ = "0.1.0"
