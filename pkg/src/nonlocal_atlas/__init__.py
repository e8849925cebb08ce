"""Fixed-point analysis of -a(g(u))Δu = λ f(u) on boxes with zero boundary values.

The nonlocal problem is reduced to the scalar map α -> Q(λ/a(α)), where
Q(s) = g(w_s) and w_s solves the local problem -Δw = s f(w).
"""
__version__ = "0.1.0"

from .errors import (
    AtlasError,
    ConfigError,
    ConvergenceError,
    DomainError,
    GMismatchError,
    NotMonotoneError,
    ParameterError,
    UniquenessError,
    VerificationError,
)
from .mesh import Mesh, build_mesh, integrate, principal_eigenpair, solve_poisson
from .model import (
    eval_functional,
    make_coefficient,
    make_functional,
    make_nonlinearity,
    psi_inverse,
)
from .aux_solver import AuxSolution, admissible_s_range, solve_auxiliary
from .qmap import QTable, certify_monotone, q_eval, q_eval_extended, q_inverse, tabulate_q
from .analyzer import (
    admissible_set,
    analyze_window,
    build_context,
    c_of_lambda,
    find_fixed_points,
    oscillation_analysis,
    reconstruct_solution,
    thresholds,
)
from .powerlike import build_powerlike, enumerate_scaled_solutions, lambda_of_alpha, mu0_limit, powerlike_threshold
from .bounds import build_bounds_context, lambda0_bounds, q_lower_bound, q_upper_bound
