"""Palette-aware color recommendation and recoloring for layered documents."""

__version__ = "0.1.0"
