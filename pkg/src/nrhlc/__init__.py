"""Controllable noise reduction and hearing-loss compensation through a differentiable auditory model."""
__version__ = "0.1.0"
