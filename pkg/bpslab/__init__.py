"""Bounded pragmatic speakers over finite communication games."""

__version__ = "0.1.0"
