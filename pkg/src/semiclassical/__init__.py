"""Semiclassical laboratory: Hamilton-Jacobi baselines, Madelung fields, Bohm trajectories and hbar -> 0 sweeps."""

from .domain import (BohmSample, CoherentPrep, Free, GaussianPrep, Grid, Harmonic, Linear, LocalAction,
                     MadelungFields, Sampled, SystemParams, Trajectory, WaveField, make_grid,
                     prepare_wavefunction)
from .errors import CausticError, GridError, NumericalError, SemiclassicalError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "BohmSample", "CoherentPrep", "Free", "GaussianPrep", "Grid", "Harmonic", "Linear", "LocalAction",
    "MadelungFields", "Sampled", "SystemParams", "Trajectory", "WaveField", "make_grid", "prepare_wavefunction",
    "CausticError", "GridError", "NumericalError", "SemiclassicalError", "ValidationError",
]
