"""Interleaver design checks and Monte Carlo simulation for bit-interleaved coded multiple beamforming."""

__version__ = "0.1.0"
