import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fredholm_gcv.diagnostics import (REFERENCE_POINTS, disagreement, find_peaks, interp_log,
                                      residual_stats)
from fredholm_gcv.discretization import KernelKind, assemble_kernel, build_grid
from fredholm_gcv.errors import DisjointIntervalError, DomainError
from fredholm_gcv.optimizer import SearchSpace, search
from fredholm_gcv.problems import (MixtureSpec, SampledData, add_noise, forward_transform,
                                   levy_pair, log_s_grid)
from fredholm_gcv.regularization import solve_at

THREE_PEAKS = MixtureSpec.from_lists([1, 2, 6], [0.1, 1, 10], [10, 13, 15])


@pytest.fixture(scope="module")
def levy_solutions():
    s = log_s_grid(64)
    _, g = levy_pair()
    data = SampledData(s, add_noise(g(s), 1e-3, 0), 1e-3, 0)
    return (solve_at(data, "laplace", "identity", 60, 1e-3, 1e2),
            solve_at(data, "laplace", "l2", 80, 1e-3, 3e2), data)


class TestDisagreement:
    def test_identical(self, levy_solutions):
        sol = levy_solutions[0]
        rep = disagreement(sol, sol)
        assert rep.sum_sq == 0.0 and rep.flagged_regions == []
        assert rep.reference_grid.size == REFERENCE_POINTS

    def test_constant_offset(self, levy_solutions):
        sol = levy_solutions[0]
        delta = 0.125
        shifted = dataclasses.replace(sol, f=sol.f + delta)
        rep = disagreement(sol, shifted)
        assert rep.sum_sq == pytest.approx(200 * delta ** 2, rel=1e-12)
        np.testing.assert_allclose(rep.pointwise_gap, delta, rtol=1e-12)

    def test_sum_sq_recomputable_and_symmetric(self, levy_solutions):
        a, b, _ = levy_solutions
        ab, ba = disagreement(a, b), disagreement(b, a)
        assert ab.sum_sq == pytest.approx(np.sum((ab.f_identity - ab.f_l2) ** 2), rel=1e-12)
        assert ab.sum_sq == pytest.approx(ba.sum_sq, rel=1e-12)
        assert ab.flagged_regions == ba.flagged_regions
        assert ab.reference_grid[0] == 1e-3 and ab.reference_grid[-1] == 1e2

    def test_flag_threshold(self, levy_solutions):
        sol = levy_solutions[0]
        bump = np.zeros(sol.grid.n)
        bump[20:25] = 10 * np.abs(sol.f).max()
        rep = disagreement(sol, dataclasses.replace(sol, f=sol.f + bump), threshold_frac=0.1)
        assert len(rep.flagged_regions) == 1
        lo, hi = rep.flagged_regions[0]
        assert sol.t[19] < lo <= hi < sol.t[25]

    def test_disjoint(self, levy_solutions):
        sol = levy_solutions[2]
        a = solve_at(sol, "laplace", "l2", 20, 1e-3, 1e-1, 1e-6)
        b = solve_at(sol, "laplace", "l2", 20, 1.0, 1e2, 1e-6)
        with pytest.raises(DisjointIntervalError):
            disagreement(a, b)

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
    def test_bad_threshold(self, levy_solutions, frac):
        with pytest.raises(DomainError):
            disagreement(levy_solutions[0], levy_solutions[0], threshold_frac=frac)

    def test_missing_small_s_data_flags_small_t(self):
        # the kernel exp(-s/t) sees small t only through small s
        spec = MixtureSpec.from_lists([1, 4, 10], [0.1, 3, 10], [10, 13, 15])
        s = log_s_grid(64)
        g = add_noise(forward_transform(spec, KernelKind.NMR, s), 1e-2, 0)
        keep = s >= 1.0
        data = SampledData(s[keep], g[keep], 1e-2)
        space = SearchSpace.for_data(s, "nmr")
        rep = disagreement(search(data, "nmr", "identity", space).solution,
                           search(data, "nmr", "l2", space).solution)
        assert rep.flagged_regions
        assert all(hi < 1.0 for _, hi in rep.flagged_regions)
        small = rep.reference_grid < 1.0
        assert np.sum(rep.pointwise_gap[small] ** 2) >= 0.99 * rep.sum_sq


class TestInterpolation:
    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_linear_in_log_is_exact(self, a, b):
        t = np.geomspace(1e-3, 1e3, 17)
        tn = np.geomspace(1e-3, 1e3, 200)
        np.testing.assert_allclose(interp_log(tn, t, a + b * np.log(t)), a + b * np.log(tn),
                                   atol=1e-12 * (1 + abs(a) + abs(b) * 7))


class TestResidualStats:
    def test_exact_solution(self):
        grid = build_grid(10, 0.1, 10)
        K = assemble_kernel(grid, "laplace", log_s_grid(12, 0.1, 10))
        f = np.linspace(1, 2, 10)
        r = residual_stats(K, f, K @ f)
        assert np.all(r.residuals == 0) and r.mean == 0 and r.std == 0 and r.lag1_autocorr == 0

    def test_pure_noise(self):
        g = add_noise(np.zeros(64), 0.01, 5)
        r = residual_stats(np.zeros((64, 3)), np.zeros(3), g)
        assert r.std == pytest.approx(0.01, rel=0.1)
        np.testing.assert_array_equal(r.residuals, -g)

    def test_lag1_of_alternating(self):
        r = residual_stats(np.eye(6), np.zeros(6), [1, -1, 1, -1, 1, -1])
        assert r.lag1_autocorr == pytest.approx(-5 / 6)

    def test_well_fit_residuals_are_filtered_white_noise(self):
        # A regularized fit removes about effective_dof smooth components, which
        # leaves white noise negatively correlated at lag 1.  The oracle is the
        # lag-1 distribution of (I - A) z over fresh noise draws z, where A is
        # the influence matrix of the same discretization and alpha.
        spec = MixtureSpec.from_lists([1, 6], [0.2, 1], [10, 5])
        s = log_s_grid(64)
        data = SampledData(s, add_noise(forward_transform(spec, "laplace", s), 1e-2, 0), 1e-2)
        sol = solve_at(data, "laplace", "l2", 80, 1e-2, 1e2)
        r = residual_stats(sol.kernel, sol.f, data.g)
        assert 0.5e-2 <= r.std <= 2e-2

        A = np.column_stack([
            sol.kernel.entries @ solve_at(SampledData(s, e), "laplace", "l2", 80, 1e-2, 1e2,
                                          sol.alpha).f
            for e in np.eye(64)])
        R = np.eye(64) - A
        Z = np.random.default_rng(1).standard_normal((64, 4000))
        E = R @ Z
        E -= E.mean(axis=0)
        lag1 = np.sum(E[:-1] * E[1:], axis=0) / np.sum(E * E, axis=0)
        lo, hi = np.quantile(lag1, [0.005, 0.995])
        assert lo <= r.lag1_autocorr <= hi
        assert np.trace(A) == pytest.approx(sol.effective_dof, rel=1e-6)


class TestFindPeaks:
    def test_monotone(self):
        assert find_peaks(np.arange(10.0), np.arange(1.0, 11.0)) == []

    def test_single_interior_max(self):
        f = np.array([0.0, 1.0, 3.0, 2.0, 0.5])
        t = np.geomspace(1, 16, 5)
        assert find_peaks(f, t) == [(t[2], 3.0)]

    def test_plateau_is_not_strict(self):
        assert find_peaks(np.array([0.0, 2.0, 2.0, 0.0]), np.arange(1.0, 5.0)) == []

    def test_nonpositive(self):
        assert find_peaks(-np.array([0.0, 1.0, 0.0]), np.arange(1.0, 4.0)) == []

    def test_small_prominence_dropped(self):
        f = np.array([0.0, 10.0, 9.99, 9.995, 0.0])
        assert len(find_peaks(f, np.arange(1.0, 6.0), 0.05)) == 1
        assert len(find_peaks(f, np.arange(1.0, 6.0), 1e-4)) == 2

    def test_non_finite(self):
        with pytest.raises(DomainError):
            find_peaks(np.array([0.0, np.nan, 0.0]), np.arange(1.0, 4.0))

    def test_exact_three_peak_density(self):
        grid = build_grid(400, 1e-3, 1e3)
        peaks = find_peaks(THREE_PEAKS(grid.nodes), grid)
        assert len(peaks) == 3
        for (t, _), theta in zip(peaks, [0.1, 1, 10]):
            assert abs(math.log(t / theta)) < 0.15

    @settings(max_examples=50)
    @given(st.floats(1e-6, 1e6))
    def test_scale_invariant(self, c):
        grid = build_grid(200, 1e-3, 1e3)
        f = THREE_PEAKS(grid.nodes)
        base = [t for t, _ in find_peaks(f, grid)]
        assert [t for t, _ in find_peaks(c * f, grid)] == base
