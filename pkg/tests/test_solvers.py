import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparse_mut.dictionary import DelayGrid, build_fixed_dictionary, default_grid
from sparse_mut.forward_model import (
    SPEED_OF_LIGHT,
    FrequencySweep,
    ReflectionProfile,
    SlabSpec,
    compute_cir,
    simulate_baseband,
    simulate_slab_profile,
    truncate_cir,
)
from sparse_mut.solvers import (
    InfeasibleError,
    RankDeficientError,
    SolverConfig,
    omp,
    solve_du,
    solve_fd,
    solve_l2,
    sweep_sparsity,
)

PAD = 4
L = 160
SWEEP = FrequencySweep.from_band(75e9, 110e9, 201)
STEP = SWEEP.time_step(PAD)
T_REF = 2 * 0.01 / SPEED_OF_LIGHT


def make_dictionary(l_keep=L, sweep=SWEEP):
    ref = simulate_baseband(sweep, ReflectionProfile([-1.0], [T_REF]))
    grid = default_grid(sweep, PAD, l_keep)
    return build_fixed_dictionary(ref.values, sweep, grid, "none", PAD, l_keep)


D_F = make_dictionary()


def cir_of(profile, noise=0.0, seed=0, sweep=SWEEP, l_keep=L):
    y = simulate_baseband(sweep, profile, noise, seed)
    return truncate_cir(compute_cir(y, "none", PAD), l_keep)


def relative_profile(amps, shifts):
    # amplitudes relative to the plate, which reflects with -1
    return ReflectionProfile(-np.asarray(amps, complex), T_REF + np.asarray(shifts))


def random_matrix(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(s0=0), dict(epsilon=0), dict(max_iters=0), dict(tau_mg=-1.0),
        dict(tau_w_policy="wide"), dict(atom_order="random"), dict(residual_mode="x"),
        dict(stop_energy_scale=0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestOmp:
    def test_single_atom(self):
        h = D_F.columns[:, 37]
        c = omp(D_F, h, 1)
        assert list(c.support) == [37]
        assert c.values[37] == pytest.approx(1.0, abs=1e-12)
        assert c.residual_energy <= 1e-12 * np.vdot(h, h).real

    def test_three_sparse_exact(self, rng):
        a = np.zeros(L, complex)
        idx = [10, 55, 120]
        a[idx] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        c = omp(D_F, D_F.columns @ a, 3)
        assert list(c.support) == idx
        np.testing.assert_allclose(c.values, a, rtol=0, atol=1e-9 * np.abs(a).max())

    def test_values_zero_off_support(self, rng):
        h = rng.standard_normal(L) + 0j
        c = omp(D_F, h, 4)
        mask = np.ones(L, bool)
        mask[c.support] = False
        assert np.all(c.values[mask] == 0)
        assert c.support.size <= 4

    @given(seed=st.integers(0, 10_000), s0=st.integers(1, 6))
    def test_orthogonality(self, seed, s0):
        rng = np.random.default_rng(seed)
        A = random_matrix(rng, 30, 20)
        h = rng.standard_normal(30) + 1j * rng.standard_normal(30)
        c = omp(A, h, s0)
        r = h - A @ c.values
        for k in c.support:
            assert abs(np.vdot(A[:, k], r)) <= 1e-8 * np.linalg.norm(A[:, k]) * np.linalg.norm(h)

    @given(seed=st.integers(0, 10_000))
    def test_residual_non_increasing_in_s0(self, seed):
        rng = np.random.default_rng(seed)
        A = random_matrix(rng, 25, 40)
        h = rng.standard_normal(25) + 1j * rng.standard_normal(25)
        res = [omp(A, h, s).residual_energy for s in range(1, 8)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))

    def test_rank_deficiency(self, rng):
        c1 = rng.standard_normal(20) + 0j
        u = rng.standard_normal(20)
        u -= (u @ c1.real) / (c1.real @ c1.real) * c1.real
        A = np.column_stack([c1, c1 + 1e-13 * u])
        with pytest.raises(RankDeficientError):
            omp(A, c1 + 5 * u, 2)

    def test_input_checks(self):
        with pytest.raises(ValueError):
            omp(D_F, np.ones(L + 1), 2)
        with pytest.raises(ValueError):
            omp(D_F, np.ones(L), L + 1)

    def test_zero_signal(self):
        c = omp(D_F, np.zeros(L), 3)
        assert c.support.size == 0 and c.residual_energy == 0


class TestFixedDictionary:
    def test_is_omp(self, rng):
        h = rng.standard_normal(L) + 1j * rng.standard_normal(L)
        a = solve_fd(D_F, h, SolverConfig(s0=3))
        b = omp(D_F, h, 3)
        assert np.array_equal(a.values, b.values)

    def test_on_grid_slab_exact(self):
        bins = np.array([0, 40, 80])
        amps = np.array([0.2, -0.19, 0.01])
        h = cir_of(relative_profile(amps, bins * STEP))
        c = solve_fd(D_F, h, SolverConfig(s0=3))
        np.testing.assert_array_equal(c.support, bins)
        np.testing.assert_allclose(c.values[bins], amps, rtol=1e-9)

    def test_midpoint_quantisation(self):
        tau = 30.5 * STEP
        c = solve_fd(D_F, cir_of(relative_profile([0.3], [tau])), SolverConfig(s0=1))
        err = abs(D_F.grid.delays[c.support[0]] - tau)
        assert err <= STEP / 2 + 1e-18
        assert c.residual_energy <= np.linalg.norm(cir_of(relative_profile([0.3], [tau])).values) ** 2


class TestDictionaryUpdate:
    def test_on_grid_is_fixed_point(self):
        bins = np.array([5, 50, 95])
        h = cir_of(relative_profile([0.2, -0.19, 0.01], bins * STEP))
        cfg = SolverConfig(s0=3)
        du = solve_du(D_F, h, cfg)
        fd = solve_fd(D_F, h, cfg)
        np.testing.assert_array_equal(du.grid.delays, D_F.grid.delays)
        np.testing.assert_array_equal(du.coefficients.values, fd.values)
        assert du.iterations_run == 1 and du.converged

    @pytest.mark.parametrize("policy", ["half_grid_step", "full_grid_step"])
    def test_midpoint_refinement(self, policy):
        tau = 30.5 * STEP
        h = cir_of(relative_profile([0.3], [tau]))
        cfg = SolverConfig(s0=1, epsilon=1e-30, tau_w_policy=policy)
        du = solve_du(D_F, h, cfg)
        fd = solve_fd(D_F, h, cfg)
        du_err = abs(du.grid.delays[du.coefficients.support[0]] - tau)
        fd_err = abs(D_F.grid.delays[fd.support[0]] - tau)
        assert du_err <= STEP / 50 + 1e-18
        assert du_err < fd_err
        assert du.coefficients.residual_energy < fd.residual_energy

    def test_result_shape_and_trace(self):
        h = cir_of(relative_profile([0.3, -0.2], [20.3 * STEP, 61.7 * STEP]))
        du = solve_du(D_F, h, SolverConfig(s0=2, epsilon=1e-30, max_iters=4))
        assert du.iterations_run <= 4
        assert len(du.residual_trace) == du.iterations_run
        assert len(du.grid) == len(D_F.grid)
        assert du.dictionary.shape == D_F.shape
        assert not du.converged
        assert du.coefficients.residual_energy == min(du.residual_trace)
        assert du.coefficients.support.size <= 2

    @given(
        eps=st.floats(1.5, 4.0), d_mm=st.floats(3.0, 12.0), seed=st.integers(0, 1000),
        s0=st.integers(2, 5),
    )
    def test_residual_dominance(self, eps, d_mm, seed, s0):
        slab = SlabSpec(eps, 0.01, d_mm * 1e-3, standoff=0.01, n_bounces=3)
        h = cir_of(simulate_slab_profile(slab, SWEEP), noise=1e-3, seed=seed)
        cfg = SolverConfig(s0=s0, max_iters=4)
        assert solve_du(D_F, h, cfg).coefficients.residual_energy <= solve_fd(D_F, h, cfg).residual_energy

    def test_scale_equivariance(self):
        h = cir_of(relative_profile([0.3, -0.2, 0.05], [20.3 * STEP, 61.7 * STEP, 102.2 * STEP]))
        # a tolerance that is never met keeps the iteration count independent of |beta|
        cfg = SolverConfig(s0=3, epsilon=1e-300, max_iters=4)
        beta = 3.7 * np.exp(0.9j)
        a = solve_du(D_F, h, cfg)
        b = solve_du(D_F, beta * h.values, cfg)
        np.testing.assert_array_equal(a.coefficients.support, b.coefficients.support)
        np.testing.assert_allclose(a.grid.delays, b.grid.delays, rtol=0, atol=1e-20)
        np.testing.assert_allclose(b.coefficients.values, beta * a.coefficients.values, atol=1e-9)

    def test_deterministic(self):
        h = cir_of(relative_profile([0.3, -0.2], [20.3 * STEP, 61.7 * STEP]), noise=1e-3, seed=3)
        cfg = SolverConfig(s0=4, epsilon=1e-30, max_iters=3)
        a, b = solve_du(D_F, h, cfg), solve_du(D_F, h, cfg)
        assert np.array_equal(a.coefficients.values, b.coefficients.values)
        assert np.array_equal(a.grid.delays, b.grid.delays)
        assert a.residual_trace == b.residual_trace

    def test_progressive_mode_runs(self):
        h = cir_of(relative_profile([0.3, -0.2], [20.3 * STEP, 61.7 * STEP]))
        cfg = SolverConfig(s0=2, epsilon=1e-30, residual_mode="progressive", atom_order="index")
        du = solve_du(D_F, h, cfg)
        assert du.coefficients.residual_energy <= solve_fd(D_F, h, cfg).residual_energy

    def test_stop_energy_scale(self):
        h = cir_of(relative_profile([0.3], [30.5 * STEP]))
        fd_res = solve_fd(D_F, h, SolverConfig(s0=1)).residual_energy
        eps = 2 * fd_res
        assert solve_du(D_F, h, SolverConfig(s0=1, epsilon=eps)).iterations_run == 1
        scaled = SolverConfig(s0=1, epsilon=eps, stop_energy_scale=1e6)
        assert solve_du(D_F, h, scaled).iterations_run > 1

    def test_harmonic_internal_delays(self):
        # high-contrast, low-loss slab: recovered delays sit on multiples of the dominant gap
        slab = SlabSpec(6.0, 0.001, 10e-3, standoff=0.01, n_bounces=3)
        profile = simulate_slab_profile(slab, SWEEP)
        du = solve_du(D_F, cir_of(profile, noise=1e-4, seed=5), SolverConfig(s0=4))
        c = du.coefficients
        delays = du.grid.delays[c.support]
        top = np.sort(delays[np.argsort(-np.abs(c.values[c.support]))[:2]])
        gap = top[1] - top[0]
        k = np.round((delays - top[0]) / gap)
        assert np.all(k >= 0)
        assert np.all(np.abs(delays - top[0] - k * gap) <= STEP)
        np.testing.assert_allclose(np.sort(delays), profile.delays - T_REF, rtol=0, atol=STEP)


class TestMinimumNorm:
    def test_zero_input(self):
        c = solve_l2(D_F, np.zeros(L), 1e-2)
        assert np.all(c.values == 0) and c.support.size == 0

    def test_single_column_matches_pseudoinverse(self, rng):
        A = random_matrix(rng, 30, 12)
        h = A[:, 4]
        c = solve_l2(A, h, 1e-14)
        assert c.residual_energy <= 1e-14 * (1 + 1e-6)
        assert c.support.size >= 1
        np.testing.assert_allclose(c.values, np.linalg.pinv(A) @ h, atol=1e-5)
        assert int(np.argmax(np.abs(c.values))) == 4

    def test_residual_at_tolerance(self, rng):
        A = random_matrix(rng, 20, 50)
        h = rng.standard_normal(20) + 1j * rng.standard_normal(20)
        eps = 0.1
        c = solve_l2(A, h, eps)
        assert c.residual_energy == pytest.approx(eps, rel=1e-6)
        # any smaller-norm vector on the Tikhonov path violates the tolerance
        assert np.linalg.norm(c.values) < np.linalg.norm(np.linalg.pinv(A) @ h)

    def test_infeasible(self, rng):
        A = random_matrix(rng, 30, 5)
        h = rng.standard_normal(30) + 0j
        with pytest.raises(InfeasibleError):
            solve_l2(A, h, 1e-6)

    def test_dense_support(self):
        slab = SlabSpec(2.6, 0.005, 8e-3, standoff=0.01, n_bounces=3)
        h = cir_of(simulate_slab_profile(slab, SWEEP), noise=1e-4, seed=1)
        c = solve_l2(D_F, h, 1e-2)
        assert c.support.size > 4


class TestSparsitySweep:
    def test_true_sparsity_wins_ties(self):
        bins = np.array([3, 60, 110])
        h = cir_of(relative_profile([0.2, -0.19, 0.05], bins * STEP))
        sw = sweep_sparsity(D_F, h, SolverConfig(), range(2, 9), solver=solve_fd)
        assert sw.best_s0 == 3
        assert all(sw.residuals[s] < 1e-20 for s in range(3, 9))

    def test_singleton_range(self, rng):
        h = rng.standard_normal(L) + 0j
        assert sweep_sparsity(D_F, h, SolverConfig(), [2]).best_s0 == 2

    def test_failed_levels_are_excluded(self, rng):
        A = random_matrix(rng, 10, 4)
        h = rng.standard_normal(10) + 0j
        sw = sweep_sparsity(A, h, SolverConfig(), range(2, 7), solver=lambda D, y, c: omp(D, y, c.s0))
        assert set(sw.errors) == {5, 6}
        assert sw.best_s0 in (2, 3, 4)

    def test_all_fail(self, rng):
        A = random_matrix(rng, 10, 2)
        with pytest.raises(RuntimeError):
            sweep_sparsity(A, np.ones(10), SolverConfig(), [5, 6], solver=lambda D, y, c: omp(D, y, c.s0))

    def test_empty_range(self):
        with pytest.raises(ValueError):
            sweep_sparsity(D_F, np.ones(L), SolverConfig(), [])

    def test_du_sweep_never_worse_than_fd(self):
        slab = SlabSpec(2.6, 0.005, 3.3e-3, standoff=0.01)
        h = cir_of(simulate_slab_profile(slab, SWEEP), noise=1e-3, seed=2)
        du = sweep_sparsity(D_F, h, SolverConfig(max_iters=5))
        fd = sweep_sparsity(D_F, h, SolverConfig(), solver=solve_fd)
        for s0 in du.residuals:
            assert du.residuals[s0] <= fd.residuals[s0]
