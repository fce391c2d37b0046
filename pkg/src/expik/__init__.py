"""Infinite Arnoldi exponential integrator for ``u' = A u + g(t)``."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0+unknown"

from .basis import (BasisFamily, ChebyshevCoeffTable, ExpansionCoefficients, basis_residual,
                    basis_residual_quadrature, chebyshev_coeffs, coefficient_map, eval_basis,
                    expansion_coeffs, hessenberg, krylov_matrix)
from .bench import (BenchmarkProblem, StudyResult, reference_solution, run_convergence_study,
                    run_timing_study, schrodinger_1d, schrodinger_2d)
from .bounds import (BoundReport, bound_report, conditioning_check, convergence_indicator,
                     eps_elementwise_bound, phi_norm_bound, tail_bound, truncation_bound_bessel,
                     wk_growth_bounds)
from .errors import (ContractViolation, DerivativeOrderUnavailable, EstimateFailed, ExpikError,
                     NumericFailure, NumericOverflow, OracleUncertified)
from .gsource import (ExplicitDerivatives, GSource, PowerSeriesProgram, ProfileViaJordanTrick,
                      SeparableProfile, g_derivatives)
from .integrator import (ArnoldiState, InfiniteArnoldiIntegrator, IntegratorResult,
                         apply_augmented, infinite_arnoldi, integrate_steps, truncated_arnoldi)
from .linalg import (SparseOperator, dense_expm, log_norm, phi_matrix, phi_scalar,
                     read_matrix_market, spectral_radius_estimate, spmv, write_matrix_market)

__all__ = [
    "BasisFamily", "ChebyshevCoeffTable", "ExpansionCoefficients", "basis_residual",
    "basis_residual_quadrature", "chebyshev_coeffs", "coefficient_map", "eval_basis",
    "expansion_coeffs", "hessenberg", "krylov_matrix",
    "BenchmarkProblem", "StudyResult", "reference_solution", "run_convergence_study",
    "run_timing_study", "schrodinger_1d", "schrodinger_2d",
    "BoundReport", "bound_report", "conditioning_check", "convergence_indicator",
    "eps_elementwise_bound", "phi_norm_bound", "tail_bound", "truncation_bound_bessel",
    "wk_growth_bounds",
    "ContractViolation", "DerivativeOrderUnavailable", "EstimateFailed", "ExpikError",
    "NumericFailure", "NumericOverflow", "OracleUncertified",
    "ExplicitDerivatives", "GSource", "PowerSeriesProgram", "ProfileViaJordanTrick",
    "SeparableProfile", "g_derivatives",
    "ArnoldiState", "InfiniteArnoldiIntegrator", "IntegratorResult", "apply_augmented",
    "infinite_arnoldi", "integrate_steps", "truncated_arnoldi",
    "SparseOperator", "dense_expm", "log_norm", "phi_matrix", "phi_scalar",
    "read_matrix_market", "spectral_radius_estimate", "spmv", "write_matrix_market",
]
