"""Regularized inversion of Fredholm equations with exponential kernels.

The discretization ``(n, t_min, t_max)`` of the unknown and the Tikhonov
parameter ``alpha`` are chosen together by minimizing generalized
cross-validation.
"""
from .diagnostics import DisagreementReport, disagreement, find_peaks, residual_stats
from .discretization import (Grid, KernelKind, KernelMatrix, Stabilizer, StabilizerKind,
                             assemble_kernel, build_grid, build_l2)
from .errors import (DataFormatError, DisjointIntervalError, DomainError, FredholmError,
                     InfeasibleSearchError, NumericalError)
from .linalg import SvdFactors, svd, tikhonov_solve, to_standard_form, tsvd_solve
from .optimizer import SearchResult, SearchSpace, search
from .problems import (MixtureSpec, SampledData, add_noise, forward_transform, levy_pair,
                       log_s_grid, mixture_density)
from .regularization import RegularizedSolution, gcv_score, minimize_alpha, solve_at

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "DisagreementReport",
    "DisjointIntervalError",
    "DomainError",
    "FredholmError",
    "Grid",
    "InfeasibleSearchError",
    "KernelKind",
    "KernelMatrix",
    "MixtureSpec",
    "NumericalError",
    "RegularizedSolution",
    "SampledData",
    "SearchResult",
    "SearchSpace",
    "Stabilizer",
    "StabilizerKind",
    "SvdFactors",
    "add_noise",
    "assemble_kernel",
    "build_grid",
    "build_l2",
    "disagreement",
    "find_peaks",
    "forward_transform",
    "gcv_score",
    "levy_pair",
    "log_s_grid",
    "minimize_alpha",
    "mixture_density",
    "residual_stats",
    "search",
    "solve_at",
    "svd",
    "tikhonov_solve",
    "to_standard_form",
    "tsvd_solve",
]
