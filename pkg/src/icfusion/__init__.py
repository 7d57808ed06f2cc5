"""Infrared-centric RGB/IR feature fusion in numpy."""

__version__ = "0.1.0"
