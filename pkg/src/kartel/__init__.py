"""Collusion screening for open descending-price procurement auctions."""

__version__ = "0.1.0"
