"""Graphette priors, structure-aware coupling and rectified graph flows."""

__version__ = "0.1.0"
