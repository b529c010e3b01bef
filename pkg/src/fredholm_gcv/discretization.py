"""Log-spaced quadrature grids, kernel matrices and the second-difference stabilizer.

The unknown distribution is sampled at ``n`` nodes spread uniformly in
``u = log t`` over ``[t_min, t_max]``.  Integrals ``int k(s, t) f(t) dt`` are
approximated with the composite trapezoid rule in ``u``; the Jacobian
``dt = t du`` is folded into the weights, so that ``K @ f`` approximates the
integral when ``f`` holds the values of the distribution at the nodes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "Grid",
    "KernelKind",
    "KernelMatrix",
    "Stabilizer",
    "StabilizerKind",
    "assemble_kernel",
    "build_grid",
    "build_l2",
    "kernel_values",
]

MIN_NODES = 4


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes uniform in ``log t`` together with trapezoid weights."""

    n: int
    t_min: float
    t_max: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        """Uniform spacing in ``log t``."""
        return (np.log(self.t_max) - np.log(self.t_min)) / (self.n - 1)

    @property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.nodes)

    def integrate(self, values) -> float:
        """Quadrature of sampled values ``f(nodes)`` over ``[t_min, t_max]``."""
        return float(np.dot(self.weights, values))


def build_grid(n: int, t_min: float, t_max: float) -> Grid:
    """Build an ``n``-point log-uniform grid on ``[t_min, t_max]``.

    Weights are ``c_i * h * t_i`` with ``c_i = 1/2`` at the two endpoints and
    ``1`` elsewhere (trapezoid rule in ``log t``).

    Raises
    ------
    DomainError
        If ``n < 4``, ``t_min <= 0`` or ``t_min >= t_max``.
    """
    if int(n) != n or n < MIN_NODES:
        raise DomainError(f"grid needs an integer n >= {MIN_NODES}, got {n!r}")
    n = int(n)
    t_min = float(t_min)
    t_max = float(t_max)
    if not (np.isfinite(t_min) and np.isfinite(t_max)):
        raise DomainError("grid bounds must be finite")
    if t_min <= 0.0:
        raise DomainError(f"t_min must be positive, got {t_min}")
    if t_min >= t_max:
        raise DomainError(f"need t_min < t_max, got {t_min} >= {t_max}")

    nodes = np.geomspace(t_min, t_max, n)
    nodes[0], nodes[-1] = t_min, t_max
    h = (np.log(t_max) - np.log(t_min)) / (n - 1)
    c = np.ones(n)
    c[0] = c[-1] = 0.5
    return Grid(n, t_min, t_max, _frozen(nodes), _frozen(c * h * nodes))


class KernelKind(enum.Enum):
    """The two exponential kernel families.

    ``LAPLACE`` is ``exp(-s t)`` (real Laplace transform); ``NMR`` is
    ``exp(-s / t)`` (relaxometry, ``t`` being a relaxation time).
    """

    LAPLACE = "laplace"
    NMR = "nmr"

    @classmethod
    def parse(cls, value) -> "KernelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(
                f"unknown kernel {value!r}; expected one of "
                f"{[k.value for k in cls]}") from None


def kernel_values(kind: KernelKind, s, t) -> np.ndarray:
    """Evaluate ``k(s, t)`` on the outer product of ``s`` and ``t``."""
    s = np.asarray(s, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[None, :]
    if kind is KernelKind.LAPLACE:
        return np.exp(-s * t)
    if kind is KernelKind.NMR:
        return np.exp(-s / t)
    raise DomainError(f"unknown kernel {kind!r}")


@dataclass(frozen=True)
class KernelMatrix:
    """Discretized operator: ``entries[j, i] = k(s_j, t_i) * w_i``."""

    entries: np.ndarray = field(repr=False)
    grid: Grid
    kind: KernelKind
    s_points: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def __matmul__(self, f):
        return self.entries @ f


def _check_s_points(s_points) -> np.ndarray:
    s = np.asarray(s_points, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DomainError("s_points must be a non-empty 1-d vector")
    if not np.all(np.isfinite(s)):
        raise DomainError("s_points must be finite")
    if np.any(s < 0):
        raise DomainError("s_points must be nonnegative")
    if np.any(np.diff(s) < 0):
        raise DomainError("s_points must be sorted non-decreasing")
    return s


def assemble_kernel(grid: Grid, kind: KernelKind, s_points) -> KernelMatrix:
    """Assemble the ``m x n`` kernel matrix of ``kind`` on ``grid``."""
    kind = KernelKind.parse(kind)
    s = _check_s_points(s_points)
    entries = kernel_values(kind, s, grid.nodes) * grid.weights[None, :]
    return KernelMatrix(_frozen(entries), grid, kind, _frozen(s))


class StabilizerKind(enum.Enum):
    IDENTITY = "identity"
    L2 = "l2"

    @classmethod
    def parse(cls, value) -> "StabilizerKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(
                f"unknown stabilizer {value!r}; expected one of "
                f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class Stabilizer:
    """Penalty operator ``Omega`` of the Tikhonov functional.

    ``matrix`` is ``None`` for the identity; for ``L2`` it is the
    ``(n-2) x n`` second-difference matrix in ``log t``.
    """

    kind: StabilizerKind
    matrix: np.ndarray | None = field(default=None, repr=False)
    grid: Grid | None = None

    @classmethod
    def identity(cls) -> "Stabilizer":
        return cls(StabilizerKind.IDENTITY)

    def apply(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if self.matrix is None:
            return f
        return self.matrix @ f


def build_l2(grid: Grid) -> Stabilizer:
    """Second-difference matrix with rows ``[1, -2, 1] / h**2`` in ``log t``.

    Only interior rows are kept, so the null space is spanned by ``1`` and
    ``log t``.
    """
    n = grid.n
    if n < MIN_NODES:
        raise DomainError(f"L2 needs n >= {MIN_NODES}")
    h = grid.h
    L = np.zeros((n - 2, n))
    rows = np.arange(n - 2)
    L[rows, rows] = 1.0
    L[rows, rows + 1] = -2.0
    L[rows, rows + 2] = 1.0
    L /= h * h
    return Stabilizer(StabilizerKind.L2, _frozen(L), grid)
