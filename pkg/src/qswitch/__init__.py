"""Memory-constrained quantum entanglement switch: scheduling, capacity and simulation."""

__version__ = "0.1.0"
