"""Presets, sweeps, report emission and the command-line interface."""
from .presets import GATES, PhysicalParams, build_preset

__all__ = ["GATES", "PhysicalParams", "build_preset"]
