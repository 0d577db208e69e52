"""Cut-balanced consensus dynamics: simulation, verification, and cluster prediction."""

__version__ = "0.1.0"
