"""Concept bottleneck workbench for context-aware ARDS identification."""

__version__ = "0.1.0"
