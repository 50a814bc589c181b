"""Detect mutual influences between learning agents and adapt their state spaces."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
