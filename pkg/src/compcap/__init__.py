"""Compressible isothermal capillary surfaces via the density transform ``v = exp(-u)``."""

from .domain import Ball, BoundaryData, DomainSpec, Grid, build_grid, interior_ball
from .energy import EnergyBreakdown, energy_gradient, to_density, to_height, total_energy
from .minimize import MinimizeResult, SolverConfig, minimize

__all__ = [
    "Ball",
    "BoundaryData",
    "DomainSpec",
    "EnergyBreakdown",
    "Grid",
    "MinimizeResult",
    "SolverConfig",
    "build_grid",
    "energy_gradient",
    "interior_ball",
    "minimize",
    "to_density",
    "to_height",
    "total_energy",
]
