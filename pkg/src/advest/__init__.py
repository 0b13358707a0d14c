"""Guaranteed L2 a posteriori error estimates for 1D linear advection.

Solvers (PG1, PG2, upwind dG), the patchwise conforming reconstruction, the
estimator, dual-norm checks and the experiment drivers behind ``advest``.
"""
from .basis import BrokenPoly, gauss_rule, project_l2
from .errors import OrthogonalityError, SolverError, UnsupportedDegreeError
from .estimators import (EfficiencyReport, EstimateReport, efficiency_report, estimate,
                         exact_error)
from .mesh import Mesh1D, Patch, VertexClass, build_graded, build_uniform, hat_function, patches
from .problem import AdvectionProblem, Arctan, CallableSource, PiecewisePolynomial, Polynomial, parse_source, piecewise_quadratic
from .reconstruction import Reconstruction, assemble_global, check_structure, solve_patch
from .residual import (DualNormReport, apply_residual, check_hat_orthogonality, dual_norm_global,
                       dual_norms_local)
from .solvers import solve, solve_dg, solve_pg1, solve_pg2

__version__ = "0.1.0"
