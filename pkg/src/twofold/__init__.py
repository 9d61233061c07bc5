"""Cyclicity analysis of sliding cycles through a visible-invisible two-fold."""
__version__ = "0.1.0"
