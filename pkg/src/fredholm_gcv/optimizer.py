"""Joint search over the discretization ``(n, t_min, t_max)`` and ``alpha``.

Every candidate discretization is scored by the GCV value at its own
GCV-optimal alpha, so the search minimizes a single objective over all four
parameters.  The search runs in three stages:

1. a product scan over the ``n`` ladder and a 6 x 6 log-uniform grid of
   ``(t_min, t_max)`` pairs of sufficient width;
2. Nelder-Mead in ``(log t_min, log t_max)`` at the best ``n``;
3. the refined interval re-scored at the two neighbouring ladder values.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .discretization import KernelKind, StabilizerKind
from .errors import DomainError, FredholmError, InfeasibleSearchError
from .problems import SampledData
from .regularization import RegularizedSolution, discretize, solve_at

__all__ = [
    "Candidate",
    "SearchResult",
    "SearchSpace",
    "evaluate_candidate",
    "scan_pairs",
    "search",
]

DEFAULT_N_LADDER = (20, 40, 60, 80, 120, 160, 200)
SCAN_SIZE = 6
NM_MAX_EVALS = 60
NM_XATOL = 1e-3
NM_INITIAL_STEP = 0.25
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SearchSpace:
    """Feasible region of the outer search.

    Ranges are given in ``t`` (not log).  A pair is feasible when ``t_min``
    and ``t_max`` lie in their ranges and ``log10(t_max / t_min) >= min_decades``.
    """

    n_ladder: tuple = DEFAULT_N_LADDER
    tmin_range: tuple = (1e-3, 1e-2)
    tmax_range: tuple = (1e2, 1e3)
    min_decades: float = 1.0

    def __post_init__(self):
        ladder = tuple(int(n) for n in self.n_ladder)
        if not ladder:
            raise DomainError("n ladder must not be empty")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise DomainError("n ladder must be strictly increasing")
        if ladder[0] < 4:
            raise DomainError("n ladder values must be >= 4")
        object.__setattr__(self, "n_ladder", ladder)
        for name in ("tmin_range", "tmax_range"):
            lo, hi = (float(x) for x in getattr(self, name))
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise DomainError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        if not self.min_decades > 0:
            raise DomainError("min_decades must be positive")
        object.__setattr__(self, "min_decades", float(self.min_decades))

    def feasible(self, t_min: float, t_max: float) -> bool:
        """Inside both ranges and at least ``min_decades`` wide."""
        eps = 1e-12
        (a0, a1), (b0, b1) = self.tmin_range, self.tmax_range
        return (a0 * (1 - eps) <= t_min <= a1 * (1 + eps)
                and b0 * (1 - eps) <= t_max <= b1 * (1 + eps)
                and math.log10(t_max / t_min) >= self.min_decades * (1 - eps))

    @classmethod
    def for_data(cls, s_points, kind, margin_decades: float = 1.0, **kwargs) -> "SearchSpace":
        """Ranges that bracket the ``t`` window resolved by the data.

        The kernel ``exp(-s t)`` sees ``t`` in ``[1/s_max, 1/s_min]`` and
        ``exp(-s/t)`` sees ``[s_min, s_max]``; ``t_min`` may move up to
        ``margin_decades`` below the window's lower end and ``t_max`` as far
        above its upper end.
        """
        kind = KernelKind.parse(kind)
        s = np.asarray(s_points, dtype=float)
        s = s[s > 0]
        if s.size < 2:
            raise DomainError("need at least two positive s-values to infer a t window")
        if kind is KernelKind.LAPLACE:
            lo, hi = 1.0 / s.max(), 1.0 / s.min()
        else:
            lo, hi = s.min(), s.max()
        k = 10.0 ** margin_decades
        return cls(tmin_range=(lo / k, lo), tmax_range=(hi, hi * k), **kwargs)

    def to_dict(self) -> dict:
        return {
            "n_ladder": list(self.n_ladder),
            "tmin_range": list(self.tmin_range),
            "tmax_range": list(self.tmax_range),
            "min_decades": self.min_decades,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


class Candidate(NamedTuple):
    n: int
    t_min: float
    t_max: float
    alpha: float
    score: float
    stage: int

    def key(self):
        # smaller n, then narrower interval, break near-ties
        return (self.n, self.t_max / self.t_min)


def _better(a: Candidate, b: Candidate) -> bool:
    """Whether ``a`` beats ``b`` (score, then the tie-break keys)."""
    if not math.isfinite(a.score):
        return False
    if not math.isfinite(b.score):
        return True
    if abs(a.score - b.score) <= TIE_RTOL * max(abs(a.score), abs(b.score)):
        return a.key() < b.key()
    return a.score < b.score


def _best_of(cands: Sequence[Candidate]) -> Candidate | None:
    best = None
    for c in sorted(cands, key=lambda c: (c.n, c.t_min, c.t_max, c.stage)):
        if best is None or _better(c, best):
            best = c
    return best


def evaluate_candidate(data: SampledData, kind, stab, n: int, t_min: float, t_max: float,
                       space: SearchSpace | None = None) -> tuple[float, float]:
    """GCV-optimal ``(alpha, score)`` of one discretization.

    Infeasible intervals and numerical failures score ``+inf``.
    """
    if space is not None and not space.feasible(t_min, t_max):
        return math.nan, math.inf
    try:
        choice = discretize(data, kind, stab, n, t_min, t_max).choose_alpha()
    except FredholmError:
        return math.nan, math.inf
    return choice.alpha, choice.score


def scan_pairs(space: SearchSpace, size: int = SCAN_SIZE) -> list[tuple[float, float]]:
    """Feasible ``(t_min, t_max)`` pairs of the ``size x size`` log-uniform scan."""
    tmins = np.geomspace(*space.tmin_range, size)
    tmaxs = np.geomspace(*space.tmax_range, size)
    return [(float(a), float(b)) for a in tmins for b in tmaxs if space.feasible(a, b)]


@dataclass(frozen=True)
class SearchResult:
    """Outcome of :func:`search`; ``trace`` lists every evaluation in order."""

    best: Candidate
    solution: RegularizedSolution
    trace: tuple = field(repr=False)
    stage_best: tuple = ()

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def search(data: SampledData, kind, stab, space: SearchSpace | None = None,
           workers: int = 1) -> SearchResult:
    """Quasi-optimal ``(n, t_min, t_max, alpha)`` by minimizing GCV.

    Without ``space`` the ranges come from :meth:`SearchSpace.for_data`.
    ``workers > 1`` evaluates the stage-1 scan on a thread pool; the result
    does not depend on it.

    Raises
    ------
    InfeasibleSearchError
        If no stage-1 candidate is feasible or all of them fail.
    """
    kind = KernelKind.parse(kind)
    space = space or SearchSpace.for_data(data.s_points, kind)
    stab = StabilizerKind.parse(stab)
    trace: list[Candidate] = []

    def evaluate(n, t_min, t_max, stage):
        alpha, score = evaluate_candidate(data, kind, stab, n, t_min, t_max, space)
        return Candidate(n, t_min, t_max, alpha, score, stage)

    pairs = scan_pairs(space)
    if not pairs:
        raise InfeasibleSearchError("no (t_min, t_max) pair of the scan meets min_decades")
    jobs = [(n, a, b) for n in space.n_ladder for a, b in pairs]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trace.extend(pool.map(lambda j: evaluate(*j, 1), jobs))
    else:
        trace.extend(evaluate(*j, 1) for j in jobs)
    best1 = _best_of(trace)
    if best1 is None:
        raise InfeasibleSearchError("every stage-1 candidate failed")

    # stage 2: Nelder-Mead on (log t_min, log t_max) at the winning n
    n_best = best1.n
    nm_budget = [NM_MAX_EVALS]
    stage2: list[Candidate] = []

    def objective(x):
        if nm_budget[0] <= 0:
            return math.inf
        nm_budget[0] -= 1
        c = evaluate(n_best, float(math.exp(x[0])), float(math.exp(x[1])), 2)
        stage2.append(c)
        return c.score

    x0 = np.array([math.log(best1.t_min), math.log(best1.t_max)])
    simplex = np.array([x0, x0 + [NM_INITIAL_STEP, 0.0], x0 + [0.0, NM_INITIAL_STEP]])
    minimize(objective, x0, method="Nelder-Mead",
             options={"initial_simplex": simplex, "xatol": NM_XATOL, "fatol": math.inf,
                      "maxfev": NM_MAX_EVALS})
    trace.extend(stage2)
    best2 = _best_of([best1] + stage2)

    # stage 3: neighbouring ladder values at the refined interval
    i = space.n_ladder.index(n_best)
    stage3 = [evaluate(space.n_ladder[j], best2.t_min, best2.t_max, 3)
              for j in (i - 1, i + 1) if 0 <= j < len(space.n_ladder)]
    trace.extend(stage3)
    best3 = _best_of([best2] + stage3)

    solution = solve_at(data, kind, stab, best3.n, best3.t_min, best3.t_max, "auto")
    return SearchResult(best3, solution, tuple(trace), (best1, best2, best3))
