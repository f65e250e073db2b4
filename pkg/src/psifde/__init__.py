"""Numerical solution and stability certification for impulsive implicit
psi-Hilfer fractional differential equations with time delay.

The package solves problems of the form

    D^{alpha,beta;psi} u(t) = f(t, u(t), u(h(t)), D^{alpha,beta;psi} u(t)),
    jump of I^{1-rho;psi} u at t_k equal to J_k(u(t_k-)),
    I^{1-rho;psi} u(0+) = u0,    u = phi on [-r, 0],

via the equivalent weakly singular integral equation and Picard
iteration, checks the Lipschitz hypotheses behind existence and
uniqueness, and produces and empirically verifies
Ulam-Hyers-Mittag-Leffler stability envelopes.
"""

from .analysis import (PerturbationSpec, StabilityCertificate, UhmlReport,
                       contraction_constant, gronwall_bound,
                       gronwall_worst_case, stability_constants, uhml_verify)
from .errors import (ConfigurationError, ConvergenceError, DomainError,
                     PsifdeError, SingularityError)
from .frac_integral import (ProductQuadrature, QuadratureScheme,
                            frac_integral_at, frac_integral_profile)
from .picard_solver import (GridSolution, GridSpec, apply_T, export_solution,
                            load_solution, make_grid, picard_solve,
                            solution_at)
from .problem import (CATALOG_NAMES, ImpulsiveDelayIVP, LipschitzData,
                      build_problem, catalog_config, history_eval,
                      lipschitz_from_config, load_config, solve_implicit_g)
from .psi_core import (FractionalOrder, PsiSpec, WeightedGridFunction,
                       custom_psi, identity_psi, kernel, log_shifted_psi,
                       power_psi, psi_increment, rho_weight, tabulated_psi,
                       validate_psi, weighted_norm)
from .special_functions import (DEFAULT_ML_CONFIG, MLEvalConfig, gamma,
                                mittag_leffler)

__version__ = "0.1.0"

__all__ = [
    "PerturbationSpec", "StabilityCertificate", "UhmlReport",
    "contraction_constant", "gronwall_bound", "gronwall_worst_case",
    "stability_constants", "uhml_verify",
    "ConfigurationError", "ConvergenceError", "DomainError", "PsifdeError",
    "SingularityError",
    "ProductQuadrature", "QuadratureScheme", "frac_integral_at",
    "frac_integral_profile",
    "GridSolution", "GridSpec", "apply_T", "export_solution", "load_solution",
    "make_grid", "picard_solve", "solution_at",
    "CATALOG_NAMES", "ImpulsiveDelayIVP", "LipschitzData", "build_problem",
    "catalog_config", "history_eval", "lipschitz_from_config", "load_config",
    "solve_implicit_g",
    "FractionalOrder", "PsiSpec", "WeightedGridFunction", "custom_psi",
    "identity_psi", "kernel", "log_shifted_psi", "power_psi", "psi_increment",
    "rho_weight", "tabulated_psi", "validate_psi", "weighted_norm",
    "DEFAULT_ML_CONFIG", "MLEvalConfig", "gamma", "mittag_leffler",
    "__version__",
]
