"""Counting, enumerating and sampling classes of random and/or trees."""

__version__ = "0.1.0"
