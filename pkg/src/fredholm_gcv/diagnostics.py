"""Reliability indicators for regularized solutions.

Two solutions of the same data with different stabilizers should agree
where the data determine the distribution; where they drift apart, neither
can be trusted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.signal import peak_prominences

from .discretization import Grid, KernelMatrix
from .errors import DisjointIntervalError, DomainError

__all__ = [
    "DisagreementReport",
    "ResidualStats",
    "disagreement",
    "find_peaks",
    "interp_log",
    "residual_stats",
]

REFERENCE_POINTS = 200
DEFAULT_THRESHOLD_FRAC = 0.1
DEFAULT_PROMINENCE_FRAC = 0.05


def interp_log(t_new, t, f) -> np.ndarray:
    """Piecewise-linear interpolation in ``log t``."""
    return np.interp(np.log(t_new), np.log(t), f)


@dataclass(frozen=True)
class DisagreementReport:
    reference_grid: np.ndarray = field(repr=False)
    f_identity: np.ndarray = field(repr=False)
    f_l2: np.ndarray = field(repr=False)
    sum_sq: float
    pointwise_gap: np.ndarray = field(repr=False)
    flagged_regions: list
    threshold: float


def _flag_runs(t, mask) -> list[tuple[float, float]]:
    regions = []
    i, n = 0, len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            regions.append((float(t[i]), float(t[j])))
            i = j + 1
        else:
            i += 1
    return regions


def disagreement(sol_i, sol_l, threshold_frac: float = DEFAULT_THRESHOLD_FRAC,
                 points: int = REFERENCE_POINTS) -> DisagreementReport:
    """Compare two regularized solutions on their common ``t`` interval.

    Both are interpolated (linearly in ``log t``) onto ``points`` log-uniform
    abscissas.  A point is flagged where the gap exceeds ``threshold_frac``
    times the largest absolute value of either solution there.
    """
    if not 0 < threshold_frac < 1:
        raise DomainError("threshold_frac must lie in (0, 1)")
    lo = max(sol_i.grid.t_min, sol_l.grid.t_min)
    hi = min(sol_i.grid.t_max, sol_l.grid.t_max)
    if not lo < hi:
        raise DisjointIntervalError(
            f"solution intervals do not overlap: [{sol_i.grid.t_min}, {sol_i.grid.t_max}] "
            f"and [{sol_l.grid.t_min}, {sol_l.grid.t_max}]")
    ref = np.geomspace(lo, hi, points)
    ref[0], ref[-1] = lo, hi
    fi = interp_log(ref, sol_i.grid.nodes, sol_i.f)
    fl = interp_log(ref, sol_l.grid.nodes, sol_l.f)
    diff = fi - fl
    gap = np.abs(diff)
    scale = max(np.abs(fi).max(), np.abs(fl).max())
    threshold = threshold_frac * scale
    return DisagreementReport(
        reference_grid=ref,
        f_identity=fi,
        f_l2=fl,
        sum_sq=float(diff @ diff),
        pointwise_gap=gap,
        flagged_regions=_flag_runs(ref, gap > threshold),
        threshold=float(threshold),
    )


class ResidualStats(NamedTuple):
    residuals: np.ndarray
    mean: float
    std: float
    lag1_autocorr: float


def residual_stats(K, f, g) -> ResidualStats:
    """Residuals ``K f - g`` with mean, standard deviation and lag-1 autocorrelation."""
    A = K.entries if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    r = A @ np.asarray(f, dtype=float) - np.asarray(g, dtype=float)
    mean = float(r.mean())
    c = r - mean
    denom = float(c @ c)
    lag1 = float(c[:-1] @ c[1:] / denom) if denom > 0 and r.size > 1 else 0.0
    return ResidualStats(r, mean, float(r.std()), lag1)


def find_peaks(f, grid: Grid | np.ndarray,
               min_prominence_frac: float = DEFAULT_PROMINENCE_FRAC) -> list[tuple[float, float]]:
    """Strict interior local maxima with prominence ``>= min_prominence_frac * max(f)``.

    ``grid`` may be a :class:`Grid` or the abscissa array itself.  Returns
    ``(t, height)`` pairs sorted by ``t``.
    """
    f = np.asarray(f, dtype=float)
    t = grid.nodes if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    if not np.all(np.isfinite(f)):
        raise DomainError("find_peaks needs finite values")
    if f.size < 3 or not f.max() > 0:
        return []
    idx = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])) + 1
    if idx.size == 0:
        return []
    prominence = peak_prominences(f, idx)[0]
    keep = prominence >= min_prominence_frac * f.max()
    return [(float(t[i]), float(f[i])) for i in idx[keep]]
