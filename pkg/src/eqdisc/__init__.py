"""Bayesian equation discovery for single-degree-of-freedom oscillators."""

__version__ = "0.1.0"
