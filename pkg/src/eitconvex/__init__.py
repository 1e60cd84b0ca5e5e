"""Convex semidefinite recovery of layered conductivities on the unit disk."""

__version__ = "0.1.0"
