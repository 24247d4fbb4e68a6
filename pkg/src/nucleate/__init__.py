"""Nucleation gap statistics: limiting splitting density, particle simulation, interval splitting and gap law."""

__version__ = "0.1.0"
