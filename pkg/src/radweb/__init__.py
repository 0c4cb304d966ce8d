"""Radial Poisson webs, their planar transforms and Monte Carlo checks."""
from __future__ import annotations

__version__ = "0.1.0"

from .geometry import GeometryError, ModelParams  # noqa: E402
from .paths import PathPolyline, WebEnsemble  # noqa: E402

__all__ = ["GeometryError", "ModelParams", "PathPolyline", "WebEnsemble", "__version__"]
