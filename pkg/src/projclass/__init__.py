"""Render-and-compare image classification with an adversarial test bench."""

__version__ = "0.1.0"
