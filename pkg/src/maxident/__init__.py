"""Identifiability toolkit for maxima of independent or max-independent components."""

__version__ = "1.0.0"
