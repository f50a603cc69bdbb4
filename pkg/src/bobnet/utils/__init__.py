"""Utility modules for bobnet."""

from .config import RunConfig

__all__ = ["RunConfig"]
