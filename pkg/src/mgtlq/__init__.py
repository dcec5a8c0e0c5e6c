"""Boundary-controlled third-order acoustic wave workbench.

P1 finite-element discretization of the third-order-in-time linear acoustic
equation with Neumann boundary control and an absorbing boundary, plus the
associated singular linear-quadratic machinery: open-loop optimization,
a non-standard differential Riccati equation and closed-loop synthesis.
"""

from .feedback import ClosedLoopRun, G0Optimum, closed_loop, match_g0, optimize_g0, value_at
from .lq_oracle import LQProblem, OpenLoopSolution, cost, nonexistence_demo, solve_open_loop
from .mesh_fem import FemOperators, Mesh, MeshError, assemble_fem, build_mesh, neumann_map
from .propagate import (AnalyticControl, ControlSignal, IntegrationError, Trajectory,
                        propagate_free, propagate_L2_control, propagate_smooth_control,
                        propagate_z_system, spectral_radius, spectrum, stable_dt)
from .riccati import RiccatiError, RiccatiSolution, G_operator, gain, riccati_residual, solve_dre
from .state_space import (PhysicalParams, StateSystem, adjoint, assemble_system,
                          structural_report, u_inner, y_inner)
from .validation import run_full_validation

__version__ = "0.1.0"

__all__ = [
    "AnalyticControl", "ClosedLoopRun", "ControlSignal", "FemOperators",
    "G0Optimum", "G_operator", "IntegrationError", "LQProblem", "Mesh",
    "MeshError", "OpenLoopSolution", "PhysicalParams", "RiccatiError",
    "RiccatiSolution", "StateSystem", "Trajectory", "adjoint", "assemble_fem",
    "assemble_system", "build_mesh", "closed_loop", "cost", "gain",
    "match_g0", "neumann_map", "nonexistence_demo", "optimize_g0",
    "propagate_L2_control", "propagate_free", "propagate_smooth_control",
    "propagate_z_system", "riccati_residual", "run_full_validation",
    "solve_dre", "solve_open_loop", "spectral_radius", "spectrum",
    "stable_dt", "structural_report", "u_inner", "value_at", "y_inner",
]
