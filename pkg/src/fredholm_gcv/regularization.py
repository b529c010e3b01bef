"""GCV objective, the one-dimensional alpha search, and full regularized solves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .discretization import (Grid, KernelKind, KernelMatrix, Stabilizer, StabilizerKind,
                             assemble_kernel, build_grid, build_l2)
from .errors import DomainError, GcvDenominatorError
from .linalg import (StandardFormMap, SvdFactors, _check_alpha, svd, tikhonov_filter,
                     tikhonov_solve, to_standard_form)
from .problems import SampledData

__all__ = [
    "AlphaChoice",
    "Discretized",
    "RegularizedSolution",
    "alpha_bracket",
    "discretize",
    "gcv_curve",
    "gcv_score",
    "minimize_alpha",
    "solve_at",
]

SCAN_POINTS = 40
ALPHA_LOG_TOL = 1e-3
TIE_RTOL = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def gcv_curve(factors: SvdFactors, g, alphas) -> np.ndarray:
    """GCV score at each alpha of ``alphas`` (vectorized :func:`gcv_score`)."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    s2 = factors.sigma ** 2
    beta2 = factors.project(g) ** 2
    perp2 = factors.out_of_range_norm2(g)
    # 1 - filter factor, written so the small-alpha limit does not cancel
    comp = alphas[:, None] / (s2[None, :] + alphas[:, None])
    num = (comp ** 2) @ beta2 + perp2
    den = (factors.m - factors.p) + comp.sum(axis=1)
    if np.any(den <= 0):
        raise GcvDenominatorError("GCV trace denominator is not positive")
    return num / den ** 2


def gcv_score(factors: SvdFactors, g, alpha: float) -> float:
    """Generalized cross-validation ``||(I - K K#) g||^2 / trace(I - K K#)^2``.

    ``K#`` is the Tikhonov (identity stabilizer) inverse at ``alpha``; the
    score is computed from the singular values and ``beta = U^T g``.
    """
    alpha = _check_alpha(alpha)
    return float(gcv_curve(factors, g, [alpha])[0])


def effective_dof(factors: SvdFactors, alpha: float) -> float:
    """``trace(K K#) = sum s^2 / (s^2 + alpha)``."""
    return float(tikhonov_filter(factors.sigma, alpha).sum())


class AlphaChoice(NamedTuple):
    alpha: float
    score: float
    status: str  # "ok", "edge" or "flat"


def alpha_bracket(factors: SvdFactors) -> tuple[float, float]:
    """Search interval ``[1e-6 s_min'^2, 1e2 s_1^2]`` for alpha.

    ``s_min'`` is the smallest singular value above ``1e-14 s_1``.
    """
    s = factors.sigma
    if s.size == 0 or not s[0] > 0:
        raise DomainError("alpha search needs at least one positive singular value")
    s_low = s[s > 1e-14 * s[0]][-1]
    return 1e-6 * s_low ** 2, 1e2 * s[0] ** 2


def _argmin_prefer_last(scores) -> int:
    scores = np.asarray(scores)
    best = scores.min()
    ties = np.flatnonzero(scores <= best + TIE_RTOL * abs(best))
    return int(ties[-1])


def minimize_alpha(factors: SvdFactors, g) -> AlphaChoice:
    """Minimize the GCV score over alpha.

    A 40-point log-uniform scan of :func:`alpha_bracket` locates the best
    point; golden-section search on ``log alpha`` then refines inside the
    neighbouring scan cell to width 1e-3.  If the scan minimum sits on an end
    of the bracket, that end is returned with status ``"edge"``; if the
    scores vary by less than 1e-12 relative, the geometric midpoint of the
    bracket is returned with status ``"flat"``.  Ties go to the larger alpha.
    """
    lo, hi = alpha_bracket(factors)
    x = np.linspace(math.log(lo), math.log(hi), SCAN_POINTS)
    scores = gcv_curve(factors, g, np.exp(x))

    spread = scores.max() - scores.min()
    if spread <= 1e-12 * np.abs(scores).max():
        mid = math.exp(0.5 * (x[0] + x[-1]))
        return AlphaChoice(mid, float(gcv_curve(factors, g, [mid])[0]), "flat")

    i = _argmin_prefer_last(scores)
    if i == 0 or i == SCAN_POINTS - 1:
        return AlphaChoice(float(np.exp(x[i])), float(scores[i]), "edge")

    def f(xx):
        return float(gcv_curve(factors, g, [math.exp(xx)])[0])

    a, b = x[i - 1], x[i + 1]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    seen = [(x[i], float(scores[i])), (c, fc), (d, fd)]
    while b - a > ALPHA_LOG_TOL:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
            seen.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
            seen.append((d, fd))
    seen.sort()
    k = _argmin_prefer_last([sc for _, sc in seen])
    return AlphaChoice(float(math.exp(seen[k][0])), float(seen[k][1]), "ok")


@dataclass(frozen=True)
class Discretized:
    """One candidate discretization, factored and ready for alpha solves.

    For the identity stabilizer the factors are those of the (row-weighted)
    kernel; for L2 they are those of the standard-form matrix and ``rhs`` is
    the transformed data.
    """

    grid: Grid
    kernel: KernelMatrix
    stabilizer: Stabilizer
    weighted_matrix: np.ndarray = field(repr=False)
    weighted_data: np.ndarray = field(repr=False)
    factors: SvdFactors
    rhs: np.ndarray = field(repr=False)
    smap: StandardFormMap | None = None

    def solve(self, alpha: float) -> np.ndarray:
        fbar = tikhonov_solve(self.factors, self.rhs, alpha)
        if self.smap is None:
            return fbar
        return self.smap.back_map(fbar, self.weighted_data)

    def gcv(self, alpha: float) -> float:
        return gcv_score(self.factors, self.rhs, alpha)

    def effective_dof(self, alpha: float) -> float:
        dof = effective_dof(self.factors, alpha)
        # the two null-space directions of L2 are always fitted exactly
        return dof + (2.0 if self.smap is not None else 0.0)

    def choose_alpha(self) -> AlphaChoice:
        return minimize_alpha(self.factors, self.rhs)


def numerical_rank_factors(factors: SvdFactors, rtol: float | None = None) -> SvdFactors:
    """Drop singular triplets below the numerical-rank cutoff.

    The default cutoff ``max(m, n) * eps * sigma_1`` is the usual round-off
    level of a dense SVD.  Triplets below it carry no information, and
    keeping them lets GCV reward fitting noise through directions the kernel
    does not resolve.
    """
    s = factors.sigma
    if s.size == 0 or not s[0] > 0:
        return factors
    if rtol is None:
        rtol = max(factors.m, factors.n) * np.finfo(float).eps
    r = int(np.count_nonzero(s > rtol * s[0]))
    if r == s.size:
        return factors
    return SvdFactors(factors.u[:, :r], s[:r], factors.v[:, :r])


def discretize(data: SampledData, kind, stab, n: int, t_min: float, t_max: float) -> Discretized:
    """Grid, kernel, optional standard form and one SVD for a candidate."""
    kind = KernelKind.parse(kind)
    stab_kind = StabilizerKind.parse(stab.kind if isinstance(stab, Stabilizer) else stab)
    grid = build_grid(n, t_min, t_max)
    kernel = assemble_kernel(grid, kind, data.s_points)
    A, g = kernel.entries, data.g
    w = data.row_weights
    if w is not None:
        A, g = A * w[:, None], g * w
    if stab_kind is StabilizerKind.IDENTITY:
        stabilizer = Stabilizer.identity()
        return Discretized(grid, kernel, stabilizer, A, g, numerical_rank_factors(svd(A)), g)
    stabilizer = build_l2(grid)
    smap = to_standard_form(A, stabilizer)
    factors = numerical_rank_factors(svd(smap.transformed_matrix))
    return Discretized(grid, kernel, stabilizer, A, g, factors, smap.data_map(g), smap)


@dataclass(frozen=True)
class RegularizedSolution:
    """A regularized solution on its grid with the fit diagnostics."""

    grid: Grid
    f: np.ndarray = field(repr=False)
    alpha: float
    stabilizer: StabilizerKind
    residual_norm: float
    seminorm: float
    gcv: float
    effective_dof: float
    kind: KernelKind
    kernel: KernelMatrix = field(repr=False)
    alpha_status: str = "fixed"

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def fit(self) -> np.ndarray:
        """Model data ``K f`` (unweighted)."""
        return self.kernel.entries @ self.f


def _package(d: Discretized, alpha: float, status: str) -> RegularizedSolution:
    f = d.solve(alpha)
    f.setflags(write=False)
    resid = d.weighted_matrix @ f - d.weighted_data
    return RegularizedSolution(
        grid=d.grid,
        f=f,
        alpha=float(alpha),
        stabilizer=d.stabilizer.kind,
        residual_norm=float(np.linalg.norm(resid)),
        seminorm=float(np.linalg.norm(d.stabilizer.apply(f))),
        gcv=d.gcv(alpha),
        effective_dof=d.effective_dof(alpha),
        kind=d.kernel.kind,
        kernel=d.kernel,
        alpha_status=status,
    )


def solve_at(data: SampledData, kind, stab, n: int, t_min: float, t_max: float,
             alpha="auto") -> RegularizedSolution:
    """Regularized solution for one discretization.

    ``alpha="auto"`` picks alpha with :func:`minimize_alpha`.
    """
    d = discretize(data, kind, stab, n, t_min, t_max)
    if isinstance(alpha, str):
        if alpha != "auto":
            raise DomainError(f"alpha must be positive or 'auto', got {alpha!r}")
        choice = d.choose_alpha()
        return _package(d, choice.alpha, choice.status)
    return _package(d, _check_alpha(alpha), "fixed")
