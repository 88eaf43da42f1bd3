"""Simulation and verification tools for subordinated long-memory Gaussian sequences."""

__version__ = "0.1.0"
