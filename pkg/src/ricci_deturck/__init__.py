"""Ricci-DeTurck (h-flow) numerics near flat metrics: solver, diagnostics, gauge recovery."""
from . import kernels
from .errors import (
    Blowup,
    ClosenessCeilingExceeded,
    ConfigError,
    ConvergenceError,
    DegenerateJacobian,
    InsufficientData,
    MarkerEscaped,
    NonPositiveDefinite,
    OutsideDomain,
)
from .grid import Boundary, Grid, make_grid

__version__ = "0.1.0"

__all__ = [
    "Blowup",
    "Boundary",
    "ClosenessCeilingExceeded",
    "ConfigError",
    "ConvergenceError",
    "DegenerateJacobian",
    "Grid",
    "InsufficientData",
    "MarkerEscaped",
    "NonPositiveDefinite",
    "OutsideDomain",
    "kernels",
    "make_grid",
]
