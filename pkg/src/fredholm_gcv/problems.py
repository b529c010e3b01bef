"""Synthetic test problems: log-normal mixtures, their transforms, and noise."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .discretization import KernelKind, build_grid, kernel_values
from .errors import DomainError, QuadratureConvergenceError

__all__ = [
    "NOISE_ALGORITHM",
    "MixtureSpec",
    "SampledData",
    "add_noise",
    "levy_pair",
    "levy_transform",
    "forward_transform",
    "log_s_grid",
    "mixture_density",
    "transform_function",
]

NOISE_ALGORITHM = "numpy-philox4x64-standard-normal-v1"

ORACLE_RTOL = 1e-8
ORACLE_MAX_N = 2 ** 16
ORACLE_START_N = 2 ** 6


@dataclass(frozen=True)
class MixtureSpec:
    """Weighted sum of log-normal peaks.

    Each component is ``(a, theta, S)``: amplitude, location and sharpness.
    ``log t`` of a component is normal with mean ``log theta`` and variance
    ``1 / S``, so large ``S`` gives a narrow peak.
    """

    components: tuple

    def __post_init__(self):
        comps = tuple(tuple(float(x) for x in c) for c in self.components)
        if not comps:
            raise DomainError("mixture needs at least one component")
        for c in comps:
            if len(c) != 3:
                raise DomainError(f"component must be (a, theta, S), got {c}")
            if not all(np.isfinite(x) and x > 0 for x in c):
                raise DomainError(f"component parameters must be positive and finite, got {c}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_lists(cls, a: Sequence[float], theta: Sequence[float], S: Sequence[float]):
        if not len(a) == len(theta) == len(S):
            raise DomainError("a, theta and S must have equal lengths")
        return cls(tuple(zip(a, theta, S)))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def thetas(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def sharpness(self) -> np.ndarray:
        return np.array([c[2] for c in self.components])

    @property
    def total_mass(self) -> float:
        return float(self.amplitudes.sum())

    def support(self, width: float = 8.0) -> tuple[float, float]:
        """Interval holding all components out to ``width`` standard deviations."""
        theta, S = self.thetas, self.sharpness
        return (float(theta.min() * np.exp(-width / np.sqrt(S.min()))),
                float(theta.max() * np.exp(width / np.sqrt(S.min()))))

    def __call__(self, t):
        return mixture_density(self, t)


def mixture_density(spec: MixtureSpec, t):
    """Evaluate the mixture at ``t > 0`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise DomainError("mixture density is defined for t > 0 only")
    logt = np.log(t_arr)[..., None]
    a, theta, S = spec.amplitudes, spec.thetas, spec.sharpness
    z = logt - np.log(theta)
    vals = a * np.sqrt(S / (2 * np.pi)) * np.exp(-0.5 * S * z * z)
    out = vals.sum(axis=-1) / t_arr
    return float(out) if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class SampledData:
    """Measured or simulated right-hand side ``g(s_j)``.

    ``sigma`` is ``None``, a scalar noise level or a per-point vector; only a
    vector changes the fit (rows are weighted by ``1 / sigma``).
    """

    s_points: np.ndarray
    g: np.ndarray
    sigma: float | np.ndarray | None = None
    seed: int | None = None
    noise_algorithm: str | None = field(default=None, compare=False)

    def __post_init__(self):
        s = np.array(self.s_points, dtype=float)
        g = np.array(self.g, dtype=float)
        if s.ndim != 1 or g.ndim != 1 or s.size == 0:
            raise DomainError("s_points and g must be non-empty vectors")
        if s.size != g.size:
            raise DomainError(f"length mismatch: {s.size} s-values, {g.size} g-values")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(g))):
            raise DomainError("data must be finite")
        if np.any(s < 0):
            raise DomainError("s-values must be nonnegative")
        if np.any(np.diff(s) <= 0):
            raise DomainError("s-values must be strictly increasing")
        sigma = self.sigma
        if sigma is not None:
            if np.ndim(sigma) == 0:
                sigma = float(sigma)
                if not (np.isfinite(sigma) and sigma >= 0):
                    raise DomainError("sigma must be nonnegative and finite")
            else:
                sigma = np.array(sigma, dtype=float)
                if sigma.shape != s.shape:
                    raise DomainError("per-point sigma must match the data length")
                if not np.all(np.isfinite(sigma) & (sigma > 0)):
                    raise DomainError("per-point sigma must be positive and finite")
                sigma.setflags(write=False)
        s.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "s_points", s)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sigma", sigma)

    @property
    def m(self) -> int:
        return self.s_points.size

    @property
    def row_weights(self) -> np.ndarray | None:
        if isinstance(self.sigma, np.ndarray):
            return 1.0 / self.sigma
        return None

    def scaled(self, c: float) -> "SampledData":
        return SampledData(self.s_points, c * self.g, self.sigma, self.seed, self.noise_algorithm)


def log_s_grid(m: int = 64, s_min: float = 1e-2, s_max: float = 1e2) -> np.ndarray:
    """``m`` log-uniform sample points on ``[s_min, s_max]``."""
    if m < 1 or not 0 < s_min < s_max:
        raise DomainError("need m >= 1 and 0 < s_min < s_max")
    return np.geomspace(s_min, s_max, int(m))


def transform_function(f: Callable, kind: KernelKind, s_points, t_lo: float, t_hi: float,
                       rtol: float = ORACLE_RTOL, max_n: int = ORACLE_MAX_N) -> np.ndarray:
    """``int k(s, t) f(t) dt`` over ``[t_lo, t_hi]`` by log-trapezoid doubling.

    The step in ``log t`` is halved until two successive results agree to
    ``rtol`` relative in every entry.

    Raises
    ------
    QuadratureConvergenceError
        If the node count would exceed ``max_n``.
    """
    kind = KernelKind.parse(kind)
    s = np.atleast_1d(np.asarray(s_points, dtype=float))
    n = ORACLE_START_N + 1
    prev = None
    while True:
        grid = build_grid(n, t_lo, t_hi)
        vals = kernel_values(kind, s, grid.nodes) @ (grid.weights * f(grid.nodes))
        if prev is not None:
            # tiny absolute floor so exactly-zero entries do not block convergence
            if np.all(np.abs(vals - prev) <= rtol * np.abs(vals) + 1e-300):
                return vals
        if n - 1 >= max_n:
            raise QuadratureConvergenceError(
                f"forward transform not converged at n = {n} nodes")
        prev = vals
        n = 2 * (n - 1) + 1


def forward_transform(spec: MixtureSpec, kind: KernelKind, s_points) -> np.ndarray:
    """Transform of a mixture, computed on its own fine oracle grid."""
    lo, hi = spec.support()
    return transform_function(spec, kind, s_points, lo, hi)


# Heavy t^{-3/2} tail: the upper cut is chosen per s so that exp(-s t)
# has decayed below double precision relative to the tail mass.
_LEVY_T_LO = 1e-4


def levy_pair():
    """Levy density with scale 1/4 and its closed-form Laplace transform.

    ``f(t) = exp(-1/(8t)) / (2 t sqrt(2 pi t))`` and ``g(s) = exp(-sqrt(s/2))``.
    """

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.exp(-1.0 / (8.0 * t)) / (2.0 * t * np.sqrt(2.0 * np.pi * t))

    def g(s):
        return np.exp(-np.sqrt(np.asarray(s, dtype=float) / 2.0))

    return f, g


def levy_transform(s_points, kind: KernelKind = KernelKind.LAPLACE) -> np.ndarray:
    """Numerical Laplace transform of the analytic ``f`` of :func:`levy_pair`."""
    f, _ = levy_pair()
    s = np.atleast_1d(np.asarray(s_points, dtype=float))
    if np.any(s <= 0):
        raise DomainError("Levy-pair oracle needs s > 0 (the tail of f is not integrable fast enough)")
    out = np.empty_like(s)
    for j, sj in enumerate(s):
        out[j] = transform_function(f, kind, [sj], _LEVY_T_LO, 60.0 / sj)[0]
    return out


def add_noise(g, sigma: float, seed: int) -> np.ndarray:
    """Add ``sigma`` times standard normal noise from a seeded Philox stream."""
    g = np.asarray(g, dtype=float)
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return g + sigma * rng.standard_normal(g.shape)
