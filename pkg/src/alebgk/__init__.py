"""Meshfree arbitrary Lagrangian-Eulerian solver for the BGK kinetic equation.

Hot loops live in a compiled extension; a numpy implementation with the same
signatures is used when it is missing (see :mod:`alebgk.kernels`).
"""
from .kernels import BACKEND
from .phase_space import GasProperties, build_velocity_grid, seed_cavity_cloud
from .solver import RunConfig, Solver, run

__all__ = ["BACKEND", "GasProperties", "RunConfig", "Solver", "build_velocity_grid", "run",
           "seed_cavity_cloud"]
__version__ = "0.1.0"
