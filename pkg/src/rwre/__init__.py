"""Random walks in random environment with bounded jumps: matrix products,
exit probabilities and slowdown experiments."""

__version__ = "0.1.0"
