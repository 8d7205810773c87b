"""Windowed Green function solver for planewave scattering by periodic arrays
of penetrable obstacles, with a finite-rank correction that stays accurate at
and around Rayleigh-Wood anomalies."""

from .assembly import (CORRECTED, NAIVE, BlockSystem, Discretization, WindowConfig,
                       assemble_naive_system, window_value)
from .correction import assemble_corrected, correction_terms
from .geometry import (Curve, GeometryError, UnitCell, bump_wall, circle_curve, circle_lattice,
                       graded_wall, kite_curve, vertical_wall)
from .modes import ModeTable, ProblemConfig, build_mode_table
from .postprocess import (Solution, field_grid, qp_mismatch, radiation_errors, rayleigh_coefficients,
                          scattered_field, transmitted_field)
from .scenario import BUILTIN, ConfigError, Scenario, resolve, run, sweep
from .solver import SolverError, solve_direct, solve_gmres

__version__ = "0.1.0"

__all__ = [
    "BUILTIN", "CORRECTED", "NAIVE", "BlockSystem", "ConfigError", "Curve", "Discretization",
    "GeometryError", "ModeTable", "ProblemConfig", "Scenario", "Solution", "SolverError",
    "UnitCell", "WindowConfig", "assemble_corrected", "assemble_naive_system", "build_mode_table",
    "bump_wall", "circle_curve", "circle_lattice", "correction_terms", "field_grid",
    "graded_wall", "kite_curve", "qp_mismatch", "radiation_errors", "rayleigh_coefficients",
    "resolve", "run", "scattered_field", "solve_direct", "solve_gmres", "sweep",
    "transmitted_field", "vertical_wall", "window_value",
]
