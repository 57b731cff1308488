import math

import numpy as np
import pytest

from asymptotic_dirichlet import CoefficientBundle
from asymptotic_dirichlet.barriers import build_radial_barrier
from asymptotic_dirichlet.elliptic import (PolarGrid, assemble,
                                           assemble_operator,
                                           attainment_profile,
                                           exhaustion_solve, fourier_oracle,
                                           mmatrix_report, oracle_compare,
                                           solve_ball, uniqueness_probe)
from asymptotic_dirichlet.errors import PreconditionError

from conftest import ones, psi_sq_bundle, unit_bundle, zeros_log


def test_grid_layout():
    grid = PolarGrid(ball=8.0, nr=64, ntheta=32)
    assert grid.dr == pytest.approx(0.125)
    assert grid.radii[0] == pytest.approx(grid.dr / 2.0)
    assert grid.radii[-1] == pytest.approx(8.0 - grid.dr / 2.0)
    with pytest.raises(ValueError):
        PolarGrid(ball=1.0, nr=16, ntheta=31)


class TestExactSolves:
    def test_constant_data(self, euclidean2):
        grid = PolarGrid(ball=1.0, nr=32, ntheta=32)
        u = solve_ball(assemble(euclidean2, unit_bundle(), grid,
                                lambda th: 3.0 * np.ones_like(th)))
        assert np.max(np.abs(u.values - 3.0)) < 1e-10

    def test_zero_order_balance(self, euclidean2):
        bundle = unit_bundle(c=lambda r: -ones(r), f=lambda r: -5.0 * ones(r))
        grid = PolarGrid(ball=1.0, nr=32, ntheta=32)
        u = solve_ball(assemble(euclidean2, bundle, grid,
                                lambda th: 5.0 * np.ones_like(th)))
        assert np.max(np.abs(u.values - 5.0)) < 1e-10

    def test_constant_compatibility_with_varying_c(self, hyperbolic2):
        k = -2.5

        def c(r, theta):
            return -(1.0 + np.asarray(r) ** 2 / (1.0 + np.asarray(r) ** 2)) \
                + 0.0 * np.asarray(theta)

        bundle = CoefficientBundle.radial(a=ones, a_minorant=ones,
                                          a_minorant_log=zeros_log)
        bundle.c = c
        bundle.f = lambda r, theta: c(r, theta) * k
        grid = PolarGrid(ball=4.0, nr=32, ntheta=16)
        u = solve_ball(assemble(hyperbolic2, bundle, grid,
                                lambda th: k * np.ones_like(th)))
        assert np.max(np.abs(u.values - k)) < 1e-10


class TestAssembly:
    def test_interior_row_sums_vanish_without_c(self, euclidean2):
        op = assemble_operator(euclidean2, unit_bundle(),
                               PolarGrid(ball=1.0, nr=16, ntheta=8))
        sums = np.asarray(op.matrix.sum(axis=1)).ravel().reshape(16, 8)
        assert np.max(np.abs(sums[:-1])) < 1e-13
        assert np.all(sums[-1] < -1e-3)

    def test_m_matrix_on_hyperbolic(self, hyperbolic2):
        op = assemble_operator(hyperbolic2, unit_bundle(),
                               PolarGrid(ball=8.0, nr=64, ntheta=64))
        rep = mmatrix_report(op)
        assert rep.is_m_matrix
        assert rep.min_offdiag >= 0.0

    def test_extreme_profile_assembles_finite(self, exp_power2):
        op = assemble_operator(exp_power2, unit_bundle(),
                               PolarGrid(ball=64.0, nr=256, ntheta=32))
        assert np.all(np.isfinite(op.matrix.data))
        assert mmatrix_report(op).is_m_matrix

    def test_positive_c_rejected(self, euclidean2):
        bundle = unit_bundle(c=lambda r: 0.5 * ones(r))
        with pytest.raises(PreconditionError):
            assemble_operator(euclidean2, bundle,
                              PolarGrid(ball=1.0, nr=8, ntheta=8))

    def test_three_dimensional_solver_rejected(self, hyperbolic3):
        with pytest.raises(PreconditionError):
            assemble_operator(hyperbolic3, unit_bundle(),
                              PolarGrid(ball=1.0, nr=8, ntheta=8))


class TestDiskHarmonic:
    def test_grid_convergence_order(self, euclidean2):
        errs = []
        for n in (32, 64, 128):
            grid = PolarGrid(ball=1.0, nr=n, ntheta=n)
            u = solve_ball(assemble(euclidean2, unit_bundle(), grid, np.cos))
            exact = grid.radii[:, None] * np.cos(grid.thetas[None, :])
            errs.append(np.max(np.abs(u.values - exact)))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        assert all(1.8 <= o <= 2.2 for o in orders), (errs, orders)


class TestMaximumPrinciple:
    @pytest.mark.parametrize("cval", [0.0, -0.7])
    def test_hull_bound_exact(self, hyperbolic2, cval):
        rng = np.random.default_rng(11)
        grid = PolarGrid(ball=8.0, nr=64, ntheta=64)
        coeffs = rng.normal(size=4)

        def gamma(th):
            return (coeffs[0] + coeffs[1] * np.cos(th)
                    + coeffs[2] * np.sin(2 * th) + coeffs[3] * np.cos(3 * th))

        bundle = unit_bundle(c=lambda r: cval * ones(r))
        u = solve_ball(assemble(hyperbolic2, bundle, grid, gamma))
        g = gamma(grid.thetas)
        slack = 1e-10 * max(1.0, np.max(np.abs(g)))
        lo, hi = np.min(g), np.max(g)
        if cval < 0:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        assert np.min(u.values) >= lo - slack
        assert np.max(u.values) <= hi + slack

    def test_rotation_equivariance(self, hyperbolic2):
        grid = PolarGrid(ball=4.0, nr=32, ntheta=32)
        bundle = unit_bundle(c=lambda r: -0.5 * ones(r))
        shift = 4  # grid multiple
        u0 = solve_ball(assemble(hyperbolic2, bundle, grid, np.cos))
        u1 = solve_ball(assemble(
            hyperbolic2, bundle, grid,
            lambda th: np.cos(th - shift * grid.dtheta)))
        assert np.max(np.abs(u1.values - np.roll(u0.values, shift, axis=1))) \
            < 1e-10


class TestFourierOracle:
    def test_single_mode_on_the_disk_is_exact(self, euclidean2):
        ref = fourier_oracle(euclidean2, unit_bundle(), np.cos, 1.0, 64, 32)
        exact = ref.grid.radii[:, None] * np.cos(ref.grid.thetas[None, :])
        assert np.max(np.abs(ref.values - exact)) < 1e-12

    def test_constant_data_agrees_with_ball_solve(self, hyperbolic2):
        grid = PolarGrid(ball=4.0, nr=32, ntheta=16)
        gamma = lambda th: 2.0 * np.ones_like(th)
        u = solve_ball(assemble(hyperbolic2, unit_bundle(), grid, gamma))
        ref = fourier_oracle(hyperbolic2, unit_bundle(), gamma, 4.0, 32, 16)
        assert np.max(np.abs(u.values - ref.values)) < 1e-8

    def test_oracle_comparison_converges_at_second_order(self, hyperbolic2):
        bundle = unit_bundle(c=lambda r: -ones(r))
        gamma = lambda th: np.cos(2 * th)
        diffs = []
        for nr, nt in ((64, 16), (128, 32)):
            d, _, _ = oracle_compare(hyperbolic2, bundle, gamma, 8.0, nr, nt)
            diffs.append(d)
        order = math.log2(diffs[0] / diffs[1])
        assert 1.8 <= order <= 2.2, (diffs, order)

    def test_non_radial_coefficient_rejected(self, hyperbolic2):
        bundle = unit_bundle()
        bundle.a = lambda r, th: 1.0 + 0.1 * np.cos(th) + 0.0 * np.asarray(r)
        with pytest.raises(PreconditionError):
            fourier_oracle(hyperbolic2, bundle, np.cos, 2.0, 16, 16)


class TestExhaustion:
    def test_constant_data_gives_zero_differences(self, hyperbolic2):
        gamma = lambda th: 1.5 * np.ones_like(th)
        rep, u = exhaustion_solve(hyperbolic2, unit_bundle(), gamma,
                                  [4, 8, 16], dr=0.25, ntheta=16)
        assert all(d < 1e-12 for d in rep.core_diffs)
        assert np.max(rep.attainment) < 1e-12

    def test_admissible_run_core_differences_decrease(self, hyperbolic2):
        bundle = psi_sq_bundle(hyperbolic2)
        barrier = build_radial_barrier(hyperbolic2, bundle)
        rep, u = exhaustion_solve(hyperbolic2, bundle, np.cos, [8, 16, 32],
                                  dr=0.125, ntheta=32, barrier=barrier)
        assert rep.core_diffs[0] > rep.core_diffs[1]
        assert rep.bound_ok
        # outer-half deviation profile decreases toward the boundary
        outer = rep.attainment[rep.attainment_radii > 16.0]
        assert np.all(np.diff(outer) < 0)

    def test_mismatched_step_rejected(self, hyperbolic2):
        with pytest.raises(ValueError):
            exhaustion_solve(hyperbolic2, unit_bundle(), np.cos, [4, 10],
                             dr=0.375, ntheta=16)

    def test_attainment_profile_of_constant_data(self, euclidean2):
        grid = PolarGrid(ball=2.0, nr=16, ntheta=16)
        gamma = lambda th: 0.5 * np.ones_like(th)
        u = solve_ball(assemble(euclidean2, unit_bundle(), grid, gamma))
        _, profile = attainment_profile(u, gamma)
        assert np.max(profile) < 1e-12


class TestUniquenessProbe:
    def test_zero_bump_gives_zero_curve(self, hyperbolic2):
        curve = uniqueness_probe(hyperbolic2, unit_bundle(), np.cos, [4, 8],
                                 dr=0.25, ntheta=16,
                                 bump=lambda th: np.zeros_like(th))
        assert all(d < 1e-12 for _, d in curve)

    def test_damped_interior_bounded_by_boundary_discrepancy(
            self, hyperbolic2):
        bundle = unit_bundle(c=lambda r: -ones(r))
        curve = uniqueness_probe(hyperbolic2, bundle, np.cos, [8],
                                 dr=0.125, ntheta=32)
        assert curve[0][1] <= 1.0 + 1e-12

    def test_damped_control_curve_decreases(self, hyperbolic2):
        bundle = unit_bundle(c=lambda r: -ones(r))
        curve = uniqueness_probe(hyperbolic2, bundle, np.cos, [8, 16, 32],
                                 dr=0.125, ntheta=32)
        vals = [d for _, d in curve]
        assert vals[0] > vals[1] > vals[2]

    def test_admissible_bundle_influence_persists(self, exp_power2):
        # with data prescribable at infinity the bump influence cannot
        # vanish: it converges to the solution taking the bump as data
        curve = uniqueness_probe(exp_power2, unit_bundle(), np.cos, [8, 16],
                                 dr=0.25, ntheta=16)
        assert curve[-1][1] > 0.5


class TestAttainmentEnvelope:
    def test_profile_dominated_on_the_outer_half(self, hyperbolic2):
        from asymptotic_dirichlet.barriers import (build_cone_barrier,
                                                   build_radial_barrier)
        from asymptotic_dirichlet.elliptic import attainment_envelope

        bundle = psi_sq_bundle(hyperbolic2)
        barrier = build_radial_barrier(hyperbolic2, bundle)
        cone = build_cone_barrier(barrier, theta0=0.0)
        rep, u = exhaustion_solve(hyperbolic2, bundle, np.cos, [8, 16],
                                  dr=0.25, ntheta=32)
        envelope = attainment_envelope(cone, bundle, np.cos, eps=1e-2)
        radii = rep.attainment_radii
        outer = radii > 8.0
        bound = envelope(radii[outer])
        assert np.all(rep.attainment[outer] <= bound)
        # the envelope is a pessimistic majorant, not an estimate
        assert np.all(bound >= 1e-2)
