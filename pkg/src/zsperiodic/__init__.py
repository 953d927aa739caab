"""Periodic Zakharov-Shabat spectral toolkit."""
