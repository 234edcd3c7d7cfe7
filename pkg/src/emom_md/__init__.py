"""Solver kit for two-dimensional (size x composition) population balance
equations: characteristics-based fixed-point scheme, post-hoc density
reconstruction, radial composition profiles, and a finite-volume TVD
baseline with a convergence benchmark harness."""

from .exceptions import ConfigError, EmomError, NumericsError
from .model import (Box, ConcentrationPath, DisperseState, GrowthLaw,
                    InitialDensity, ProcessConfig, Quadrature,
                    build_quadrature, component_volume, growth_field,
                    growth_velocities)
from .characteristics import (CharacteristicField, DensityFactor,
                              jacobian_factor, ode_oracle, step_composition,
                              step_radius, xi_multi_step)
from .solver import EmomGridSpec, SolveResult, SolverState, initialize, solve, step
from .reconstruction import (Moments, PsdSnapshot, RadialProfile,
                             evaluate_q_backward, evaluate_q_forward,
                             moments, radial_composition, snapshot_backward,
                             snapshot_forward)
from .fvm import FvmGrid, FvmGridSpec, FvmResult, cfl_dt, fvm_solve, fvm_step
from .bench import (ErrorNorms, SlopeFit, dof_comparison_study, error_norms,
                    fit_slope, time_refinement_study)
from .config import RunOptions, RunSpec, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "Box", "CharacteristicField", "ConcentrationPath", "ConfigError",
    "DensityFactor", "DisperseState", "EmomError", "EmomGridSpec",
    "ErrorNorms", "FvmGrid", "FvmGridSpec", "FvmResult", "GrowthLaw",
    "InitialDensity", "Moments", "NumericsError", "ProcessConfig",
    "PsdSnapshot", "Quadrature", "RadialProfile", "RunOptions", "RunSpec",
    "SlopeFit", "SolveResult", "SolverState", "build_quadrature", "cfl_dt",
    "component_volume", "dof_comparison_study", "error_norms",
    "evaluate_q_backward", "evaluate_q_forward", "fit_slope", "fvm_solve",
    "fvm_step", "growth_field", "growth_velocities", "initialize",
    "jacobian_factor", "load_config", "moments", "ode_oracle",
    "parse_config", "radial_composition", "snapshot_backward",
    "snapshot_forward", "solve", "step", "step_composition", "step_radius",
    "time_refinement_study", "xi_multi_step",
]
