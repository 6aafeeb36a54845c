"""Dirac-mass approximation of single-layer sources on Q1 grids."""
from .grid2d import CartesianGrid, FeField, QuadRule, SparseSystem, build_grid
from .harness import ConvergenceReport, ExperimentConfig, fit_order
from .layer import Circle, CurvePartition, DiracLayer, LayerDensity, partition_circle
from .manufactured import ManufacturedPoisson, RadialSaddleCase
from .solver import SolverError, cg_solve, saddle_solve

__all__ = [
    "CartesianGrid", "FeField", "QuadRule", "SparseSystem", "build_grid",
    "ConvergenceReport", "ExperimentConfig", "fit_order",
    "Circle", "CurvePartition", "DiracLayer", "LayerDensity", "partition_circle",
    "ManufacturedPoisson", "RadialSaddleCase",
    "SolverError", "cg_solve", "saddle_solve",
]
