"""Simulation toolkit for prethermal strong zero modes in a dimerized cluster chain."""

__version__ = "0.1.0"
