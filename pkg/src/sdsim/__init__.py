"""Pseudo-spectral Schrödinger–Debye simulator and verification harness."""

__version__ = "0.1.0"
