"""Nonstationary bulk-and-tails (BATs) distributions for daily temperature."""

__version__ = "0.1.0"
