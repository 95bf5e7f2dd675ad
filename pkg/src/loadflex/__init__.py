"""Household load-profile clustering and cluster validity indexes."""

__version__ = "0.1.0"
