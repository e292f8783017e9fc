"""Mutation analysis for feature-mapped state-machine product lines."""

__version__ = "0.1.0"
