"""Macroscopic and microscopic traffic models from kinetic closures."""
__version__ = "0.1.0"
