"""Radial numerical laboratory for a quasilinear chemotaxis system with indirect signal production."""

__version__ = "0.1.0"
