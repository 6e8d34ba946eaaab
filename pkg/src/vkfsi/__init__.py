"""Spectral-Galerkin simulator for a viscous fluid coupled to a full von Karman shell."""

__version__ = "0.1.0"
