"""Delay-range stability and dissipativity certificates for coupled differential-difference systems."""

__version__ = "0.1.0"
