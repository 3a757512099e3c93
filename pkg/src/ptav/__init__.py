"""Correlation-filter tracking with an asynchronous verifier."""

__version__ = "0.1.0"
