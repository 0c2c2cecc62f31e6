"""Multimodal operator learning on a synthetic ODE/PDE corpus."""

__version__ = "0.1.0"
