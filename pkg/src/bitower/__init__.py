"""Bi-differential calculi, conserved-current towers and their integrable-model instances."""

__version__ = "0.1.0"
