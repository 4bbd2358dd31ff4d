"""Aggregation and disaggregation of random-coefficient AR(1) processes."""

__version__ = "0.1.0"
