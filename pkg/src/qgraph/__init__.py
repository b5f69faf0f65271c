"""Resonances, cut-off spectra and bound states of quantum graphs with semi-infinite leads."""

__version__ = "0.1.0"
