"""Numerical toolkit for stabilized PDE-ML coupling and memory-kernel ROMs."""

__version__ = "0.1.0"
