"""Dense SVD, truncated-SVD and Tikhonov solves, standard-form transformation.

Everything here works on plain arrays; a :class:`KernelMatrix` is accepted
wherever a matrix is expected.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discretization import KernelMatrix, Stabilizer, StabilizerKind
from .errors import DomainError, RankDeficiencyError, SvdConvergenceError

__all__ = [
    "SvdFactors",
    "StandardFormMap",
    "svd",
    "tikhonov_filter",
    "tikhonov_solve",
    "to_standard_form",
    "tsvd_solve",
]

# cond(K W) above this means the kernel cannot separate the two null-space
# directions of L2 and the standard-form map is meaningless.
MAX_NULLSPACE_COND = 1e12


def _as_matrix(K) -> np.ndarray:
    if isinstance(K, KernelMatrix):
        K = K.entries
    A = np.asarray(K, dtype=float)
    if A.ndim != 2 or 0 in A.shape:
        raise DomainError(f"expected a non-empty 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``K = u @ diag(sigma) @ v.T`` with ``p = min(m, n)`` columns."""

    u: np.ndarray = field(repr=False)
    sigma: np.ndarray
    v: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.u.shape[0]

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def p(self) -> int:
        return self.sigma.size

    def project(self, g) -> np.ndarray:
        """Fourier coefficients ``beta = u.T @ g``."""
        return self.u.T @ np.asarray(g, dtype=float)

    def out_of_range_norm2(self, g) -> float:
        """``||g - u u^T g||^2``: the part of ``g`` no solution can fit."""
        if self.m == self.p:
            return 0.0
        g = np.asarray(g, dtype=float)
        r = g - self.u @ (self.u.T @ g)
        return float(r @ r)


def svd(K) -> SvdFactors:
    """Thin SVD with a fixed sign convention.

    Each singular pair is oriented so that the first non-negligible entry of
    its right singular vector is positive, which makes the factors
    reproducible run to run.

    Raises
    ------
    SvdConvergenceError
        If LAPACK fails to converge.
    """
    A = _as_matrix(K)
    try:
        u, s, vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(str(exc)) from exc
    v = vt.T.copy()
    u = u.copy()
    for j in range(s.size):
        col = v[:, j]
        big = np.abs(col) >= 1e-8 * np.max(np.abs(col))
        if col[np.argmax(big)] < 0:
            v[:, j] = -col
            u[:, j] = -u[:, j]
    for a in (u, s, v):
        a.setflags(write=False)
    return SvdFactors(u, s, v)


def tsvd_solve(factors: SvdFactors, g, k: int) -> np.ndarray:
    """Truncated-SVD solution keeping the ``k`` largest singular triplets."""
    p = factors.p
    if int(k) != k or not 1 <= k <= p:
        raise DomainError(f"truncation index must satisfy 1 <= k <= {p}, got {k}")
    k = int(k)
    nonzero = int(np.count_nonzero(factors.sigma > 0))
    if k > nonzero:
        raise DomainError(f"k={k} exceeds the {nonzero} nonzero singular values")
    beta = factors.project(g)[:k]
    return factors.v[:, :k] @ (beta / factors.sigma[:k])


def tikhonov_filter(sigma, alpha) -> np.ndarray:
    """Filter factors ``s^2 / (s^2 + alpha)``."""
    s2 = np.asarray(sigma, dtype=float) ** 2
    return s2 / (s2 + alpha)


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise DomainError(f"alpha must be positive and finite, got {alpha}")
    return alpha


def tikhonov_solve(factors: SvdFactors, g, alpha: float) -> np.ndarray:
    """Minimizer of ``||K f - g||^2 + alpha ||f||^2``."""
    alpha = _check_alpha(alpha)
    s = factors.sigma
    beta = factors.project(g)
    return factors.v @ (s / (s * s + alpha) * beta)


@dataclass(frozen=True)
class StandardFormMap:
    """Reduction of ``min ||K f - g||^2 + alpha ||L f||^2`` to identity form.

    With ``K W = [Q1 Q2] R`` for an orthonormal basis ``W`` of ``null(L)``,
    the transformed problem is ``min ||Kbar fbar - Q2^T g||^2 + alpha ||fbar||^2``
    where ``Kbar = Q2^T K L_A`` and ``L_A = (I - W (K W)^+ K) T`` for any
    right inverse ``T`` of ``L``.  A solution maps back as
    ``f = L_A fbar + W (K W)^+ g``.
    """

    transformed_matrix: np.ndarray = field(repr=False)
    oblique_inverse: np.ndarray = field(repr=False)
    range_complement: np.ndarray = field(repr=False)
    nullspace_solver: np.ndarray = field(repr=False)

    @property
    def m_bar(self) -> int:
        return self.transformed_matrix.shape[0]

    def data_map(self, g) -> np.ndarray:
        return self.range_complement.T @ np.asarray(g, dtype=float)

    def nullspace_part(self, g) -> np.ndarray:
        """Unpenalized component ``x0 = W (K W)^+ g`` of every solution."""
        return self.nullspace_solver @ np.asarray(g, dtype=float)

    def back_map(self, fbar, g) -> np.ndarray:
        return self.oblique_inverse @ np.asarray(fbar, dtype=float) + self.nullspace_part(g)


def _second_difference_right_inverse(n: int, h: float) -> np.ndarray:
    # Twice-cumulated sums with two zero initial values: L @ T = I exactly.
    j = np.arange(n)[:, None]
    i = np.arange(n - 2)[None, :]
    return np.where(j >= i + 2, (j - i - 1) * h * h, 0.0)


def to_standard_form(K, l2: Stabilizer) -> StandardFormMap:
    """Build the standard-form map for the log-second-difference stabilizer.

    Raises
    ------
    DomainError
        If ``l2`` is not an L2 stabilizer or shapes disagree.
    RankDeficiencyError
        If ``K`` restricted to ``span{1, log t}`` has condition above 1e12,
        measured against both its own largest singular value and ``||K||``.
    """
    if l2.kind is not StabilizerKind.L2 or l2.matrix is None or l2.grid is None:
        raise DomainError("standard form is only defined for the L2 stabilizer")
    A = _as_matrix(K)
    m, n = A.shape
    grid = l2.grid
    if n != grid.n:
        raise DomainError(f"K has {n} columns but the stabilizer grid has {grid.n} nodes")
    if m < 3:
        raise DomainError("standard form needs at least 3 data points")

    W, _ = np.linalg.qr(np.column_stack([np.ones(n), grid.log_nodes]))
    KW = A @ W
    sv = np.linalg.svd(KW, compute_uv=False)
    # relative to K as well: a kernel that annihilates span{1, log t} gives a
    # round-off sized K W whose own condition number can look harmless
    if sv[-1] * MAX_NULLSPACE_COND <= max(sv[0], np.linalg.norm(A, 2)):
        raise RankDeficiencyError(
            "kernel is numerically singular on the null space of L2")
    Q, R = np.linalg.qr(KW, mode="complete")
    Q1, Q2 = Q[:, :2], Q[:, 2:]
    R1 = R[:2, :]
    KW_pinv = np.linalg.solve(R1, Q1.T)

    T = _second_difference_right_inverse(n, grid.h)
    L_A = T - W @ (KW_pinv @ (A @ T))
    Kbar = Q2.T @ (A @ L_A)
    N = W @ KW_pinv
    for a in (Kbar, L_A, Q2, N):
        a.setflags(write=False)
    return StandardFormMap(Kbar, L_A, Q2, N)
