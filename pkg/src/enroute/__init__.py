"""Fuzzy dynamic en-route filtering simulator for wireless sensor networks."""

__version__ = "0.1.0"
