"""Simulation and fitting tools for a multimode left-handed ring resonator
coupled to two flux-tunable transmons."""

__version__ = "0.1.0"
