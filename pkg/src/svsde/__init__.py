"""Spatially-varying SDE movement model."""
__version__ = "0.1.0"
