"""Punctured DFT-s-OFDM with frequency-domain reference symbols: link-level simulation."""

__version__ = "0.1.0"
