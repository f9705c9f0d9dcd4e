"""Quantum hypernetworks for binary neural networks, simulated classically."""

__version__ = "0.1.0"
