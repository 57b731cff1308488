"""Acceptance suite: one test per criterion, each printing its verdicts.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one line per
sub-check.  Two sub-assertions are expected to fail on IEEE-754 grounds
and are kept faithful to their stated form rather than weakened; the
analysis lives in the repository notes:

* the fast-growth attainment profile saturates to exact zeros well
  before the outer half of the largest ball (deviations scale like
  ``exp(-r**3)``), so *strict* decrease there is unobservable;
* boundary-bump influence cannot decay on bundles that admit data at
  infinity (persistence of the influence *is* the attainment mechanism),
  so strictly decreasing uniqueness-probe curves contradict
  admissibility.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from asymptotic_dirichlet import (ModelManifold, profile_catalog,
                                  tail_integral)
from asymptotic_dirichlet.barriers import (build_cone_barrier,
                                           build_radial_barrier,
                                           verify_cone_barrier,
                                           verify_radial_barrier)
from asymptotic_dirichlet.cli import main, reproduce_examples
from asymptotic_dirichlet.elliptic import (PolarGrid, assemble,
                                           exhaustion_solve, oracle_compare,
                                           solve_ball, uniqueness_probe)
from asymptotic_dirichlet.parabolic import (hull_probe, solve_cauchy,
                                            solve_cauchy_exhaustion,
                                            uniqueness_probe_t)

from conftest import ones, psi_sq_bundle, unit_bundle

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class Criterion:
    def __init__(self, number, budget_s):
        self.number = number
        self.budget = budget_s
        self.start = time.perf_counter()
        self.failures = []

    def check(self, label, ok):
        print(f"  [criterion {self.number}] "
              f"{'pass' if ok else 'FAIL'}: {label}")
        if not ok:
            self.failures.append(label)
        return ok

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.check(f"runtime {elapsed:.1f}s within {self.budget:.0f}s",
                   elapsed < self.budget)
        print(f"  [criterion {self.number}] "
              f"{'PASS' if not self.failures else 'FAIL'} overall")
        assert not self.failures, self.failures


def test_criterion_1_example_table():
    crit = Criterion(1, 30)
    table = reproduce_examples(tol=1e-4)
    joints = [row[6] for row in table.rows]
    crit.check("five rows emitted", len(table.rows) == 5)
    crit.check("classification: four pass, flat control jointly fails",
               joints == ["pass", "pass", "pass", "pass", "fail"])
    crit.finish()


def test_criterion_2_tail_quadrature_exactness():
    crit = Criterion(2, 1)
    euc3 = ModelManifold(3, profile_catalog("euclidean"))
    hyp3 = ModelManifold(3, profile_catalog("hyperbolic", alpha=1.0))
    r1 = tail_integral(euc3, 1.0, tol=1e-9)
    crit.check("flat tail from 1 equals 1",
               abs(r1.value - 1.0) <= 1e-9)
    r2 = tail_integral(hyp3, 1.0, tol=1e-9)
    expect = 1.0 / math.tanh(1.0) - 1.0
    crit.check("negatively curved tail equals its antiderivative value",
               abs(r2.value - expect) <= 1e-9)
    crit.finish()


def test_criterion_3_barrier_suite(exp_power2, hyperbolic3):
    crit = Criterion(3, 60)
    bundles = [("fast-growth", exp_power2, unit_bundle()),
               ("pinched-curvature", hyperbolic3,
                psi_sq_bundle(hyperbolic3))]
    for name, manifold, bundle in bundles:
        barrier = build_radial_barrier(manifold, bundle)
        rec = verify_radial_barrier(barrier, manifold, bundle, tol=1e-6)
        crit.check(f"{name}: radial checks "
                   f"{sorted(k for k, c in rec.checks.items() if c.ok)}",
                   rec.passed)
        crit.check(f"{name}: vanishes at the grid end "
                   f"({barrier.values[-1]:.2e} <= 1e-3)",
                   barrier.values[-1] <= 1e-3)
        crit.check(f"{name}: offset nonpositive ({barrier.offset:.3e})",
                   barrier.offset <= 1e-8)
        cone = build_cone_barrier(barrier, theta0=0.3)
        expected_gain = (2.0 if manifold.dim == 2 else 4.0) / bundle.c0 + 1.0
        crit.check(f"{name}: cone gain equals C/c0 + 1 = {expected_gain}",
                   cone.gain == pytest.approx(expected_gain))
        floor = cone.boundary_floor()
        expect_floor = min(cone.aperture**2,
                           cone.gain * float(barrier.value_at(
                               cone.inner_radius)))
        crit.check(f"{name}: boundary floor is min(aperture^2, gain*V(R))",
                   floor == pytest.approx(expect_floor, rel=1e-12))
        crec = verify_cone_barrier(cone, manifold, bundle, tol=1e-6)
        crit.check(f"{name}: cone verification", crec.passed)
    crit.finish()


def test_criterion_4_elliptic_exactness(euclidean2):
    crit = Criterion(4, 60)
    grid = PolarGrid(ball=1.0, nr=32, ntheta=32)
    u = solve_ball(assemble(euclidean2, unit_bundle(), grid,
                            lambda th: 3.0 * np.ones_like(th)))
    crit.check("constant data reproduced to 1e-10",
               np.max(np.abs(u.values - 3.0)) <= 1e-10)
    bundle = unit_bundle(c=lambda r: -ones(r), f=lambda r: -5.0 * ones(r))
    u = solve_ball(assemble(euclidean2, bundle, grid,
                            lambda th: 5.0 * np.ones_like(th)))
    crit.check("zero-order balance reproduced to 1e-10",
               np.max(np.abs(u.values - 5.0)) <= 1e-10)
    errs = []
    for n in (32, 64, 128):
        g = PolarGrid(ball=1.0, nr=n, ntheta=n)
        u = solve_ball(assemble(euclidean2, unit_bundle(), g, np.cos))
        exact = g.radii[:, None] * np.cos(g.thetas[None, :])
        errs.append(np.max(np.abs(u.values - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    crit.check(f"disk harmonic orders {['%.2f' % o for o in orders]} "
               "within [1.8, 2.2]",
               all(1.8 <= o <= 2.2 for o in orders))
    crit.finish()


def test_criterion_5_oracle_equivalence(hyperbolic2):
    crit = Criterion(5, 120)
    bundle = unit_bundle(c=lambda r: -ones(r))
    gamma = lambda th: np.cos(2 * th)
    diffs = []
    for nr, nt in ((128, 32), (256, 64), (512, 128)):
        d, _, _ = oracle_compare(hyperbolic2, bundle, gamma, 8.0, nr, nt)
        diffs.append(d)
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(2)]
    crit.check(f"differences decrease: {['%.2e' % d for d in diffs]}",
               diffs[0] > diffs[1] > diffs[2])
    crit.check(f"orders {['%.2f' % o for o in orders]} within [1.8, 2.2]",
               all(1.8 <= o <= 2.2 for o in orders))
    crit.check(f"finest difference {diffs[-1]:.2e} <= 5e-4",
               diffs[-1] <= 5e-4)
    crit.finish()


def test_criterion_6_attainment_at_infinity(exp_power2):
    crit = Criterion(6, 300)
    rep, u = exhaustion_solve(exp_power2, unit_bundle(), np.cos,
                              [8, 16, 32, 64], dr=0.125, ntheta=64)
    radii, profile = rep.attainment_radii, rep.attainment
    at56 = profile[int(np.argmin(np.abs(radii - 56.0)))]
    crit.check(f"deviation at r=56 is {at56:.2e} <= 2e-2", at56 <= 2e-2)
    outer = profile[radii > 32.0]
    crit.check(
        "attainment profile strictly decreasing on the outer half "
        f"(saturates to exact zeros: max outer value {outer.max():.2e})",
        bool(np.all(np.diff(outer) < 0)))
    crit.check(f"final core difference {rep.core_diffs[-1]:.2e} <= 1e-3",
               rep.core_diffs[-1] <= 1e-3)
    d = rep.core_diffs
    crit.check(f"core differences strictly decreasing {d}",
               all(d[i] > d[i + 1] for i in range(len(d) - 1)))
    crit.finish()


def test_criterion_7_discrete_maximum_principles(hyperbolic2):
    crit = Criterion(7, 60)
    rng = np.random.default_rng(3)
    coeffs = rng.normal(size=4)

    def gamma(th):
        return (coeffs[0] + coeffs[1] * np.cos(th)
                + coeffs[2] * np.sin(2 * th) + coeffs[3] * np.cos(3 * th))

    worst = 0.0
    for cval, grid in ((0.0, PolarGrid(ball=8.0, nr=128, ntheta=64)),
                       (-0.6, PolarGrid(ball=8.0, nr=64, ntheta=128))):
        bundle = unit_bundle(c=lambda r, c=cval: c * ones(r))
        u = solve_ball(assemble(hyperbolic2, bundle, grid, gamma))
        g = gamma(grid.thetas)
        lo, hi = np.min(g), np.max(g)
        if cval < 0:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        worst = max(worst, lo - np.min(u.values), np.max(u.values) - hi)
    crit.check(f"elliptic hull violation {worst:.2e} within solver "
               "residual 1e-10", worst <= 1e-10)

    u0 = lambda r, th: np.where(np.asarray(r) < 1.0, 1.0, 0.0) \
        + 0.0 * np.asarray(th)
    grid = PolarGrid(ball=4.0, nr=32, ntheta=32)
    dt_used, ok, slack = hull_probe(
        hyperbolic2, unit_bundle(), u0, lambda th, t: np.zeros_like(th),
        0.5, grid, 0.05)
    crit.check(f"parabolic hull holds after step-halving probe "
               f"(dt={dt_used:.4g}, slack={slack:.2e})", ok)
    crit.finish()


def test_criterion_8_parabolic_exactness(euclidean2):
    crit = Criterion(8, 120)
    bundle = unit_bundle(c=lambda r: -ones(r))
    grid = PolarGrid(ball=2.0, nr=16, ntheta=16)
    gamma = lambda th, t: math.exp(-t) * np.ones_like(th)
    u0 = lambda r, th: 1.0 + 0.0 * np.asarray(r) + 0.0 * np.asarray(th)

    def error(dt, theta_s):
        field = solve_cauchy(euclidean2, bundle, u0, gamma, 1.0, grid, dt,
                             theta_s=theta_s)
        return float(np.max(np.abs(field.values[-1] - math.exp(-1.0))))

    e_cn = [error(dt, 0.5) for dt in (4e-3, 2e-3, 1e-3)]
    crit.check(f"decay value within 1e-4 at dt=1e-3 ({e_cn[-1]:.2e})",
               e_cn[-1] <= 1e-4)
    cn_orders = [math.log2(e_cn[i] / e_cn[i + 1]) for i in range(2)]
    crit.check(f"trapezoidal orders {['%.2f' % o for o in cn_orders]} "
               "within [1.8, 2.2]",
               all(1.8 <= o <= 2.2 for o in cn_orders))
    e_ie = [error(dt, 1.0) for dt in (4e-3, 2e-3, 1e-3)]
    ie_orders = [math.log2(e_ie[i] / e_ie[i + 1]) for i in range(2)]
    crit.check(f"implicit-Euler orders {['%.2f' % o for o in ie_orders]} "
               "within [0.8, 1.2]",
               all(0.8 <= o <= 1.2 for o in ie_orders))

    hyp2 = ModelManifold(2, profile_catalog("hyperbolic", alpha=1.0))
    sgrid = PolarGrid(ball=4.0, nr=32, ntheta=32)
    steady = solve_ball(assemble(hyp2, unit_bundle(), sgrid, np.cos))
    field = solve_cauchy(hyp2, unit_bundle(), steady,
                         lambda th, t: np.cos(th), 1.0, sgrid, 1e-3,
                         blend=False)
    drift = float(np.max(np.abs(field.values[-1] - steady.values)))
    crit.check(f"steady-state drift {drift:.2e} <= 1e-8 over 1e3 steps",
               drift <= 1e-8)
    crit.finish()


def test_criterion_9_time_dependent_attainment(hyperbolic2):
    crit = Criterion(9, 600)
    bundle = psi_sq_bundle(hyperbolic2)
    track = lambda th, t: np.cos(th) * min(t, 1.0)
    u0 = lambda r, th: 0.0 * np.asarray(r) + 0.0 * np.asarray(th)
    rep, field = solve_cauchy_exhaustion(
        hyperbolic2, bundle, u0, track, 2.0, [8, 16, 32], dr=0.125,
        ntheta=64, dt=0.005)
    crit.check(f"compatibility mismatch {rep.compatibility:.2e} below 1e-3",
               rep.compatibility <= 1e-3)
    radii, profile = rep.attainment_radii, rep.attainment
    outer = profile[radii > 16.0]
    crit.check("space-time profile decreasing on the outer half",
               bool(np.all(np.diff(outer) <= 0)))
    quarter = profile[radii >= 24.0]
    crit.check(f"outermost quarter max {quarter.max():.2e} <= 5e-2",
               quarter.max() <= 5e-2)

    ell = uniqueness_probe(hyperbolic2, bundle, np.cos, [8, 16, 32],
                           dr=0.125, ntheta=64)
    ell_vals = [d for _, d in ell]
    par, bound_ok = uniqueness_probe_t(
        hyperbolic2, bundle, u0, track, 1.0, [8, 16, 32], dr=0.25,
        ntheta=32, dt=0.0125)
    par_vals = [d for _, d in par]
    crit.check(f"parabolic probe comparison bound holds", bound_ok)
    # Influence of boundary data persists on admissible bundles (that is
    # the attainment mechanism); decay would contradict it.  Kept as
    # stated; the control below shows the decay on a damped bundle.
    crit.check(
        f"elliptic probe strictly decreasing {['%.2e' % v for v in ell_vals]}"
        " (persists by attainment)",
        all(ell_vals[i] > ell_vals[i + 1] for i in range(len(ell_vals) - 1)))
    crit.check(
        f"parabolic probe strictly decreasing "
        f"{['%.2e' % v for v in par_vals]} (persists by attainment)",
        all(par_vals[i] > par_vals[i + 1] for i in range(len(par_vals) - 1)))
    damped = unit_bundle(c=lambda r: -ones(r))
    ctrl = uniqueness_probe(hyperbolic2, damped, np.cos, [8, 16, 32],
                            dr=0.25, ntheta=32)
    print("  [criterion 9] damped control probe (diagnostic): "
          f"{['%.2e' % d for _, d in ctrl]}")
    crit.finish()


def test_criterion_10_determinism(tmp_path):
    crit = Criterion(10, 300)
    outputs = {}
    for threads in ("1", "4"):
        base = tmp_path / f"t{threads}"
        runs = [
            ("check", "hyperbolic_check.toml", []),
            ("solve-elliptic", "exppower_elliptic.toml",
             ["--schedule", "4,8"]),
            ("reproduce-examples", None, []),
        ]
        blobs = {}
        for command, config, extra in runs:
            out = base / command
            argv = [command, "--out", str(out), "--threads", threads] + extra
            if config is not None:
                argv += ["--config", str(CONFIG_DIR / config)]
            code = main(argv)
            crit.check(f"{command} (threads={threads}) exit 0", code == 0)
            for p in sorted(out.glob("*.csv")):
                blobs[f"{command}/{p.name}"] = p.read_bytes()
        outputs[threads] = blobs
    same = outputs["1"].keys() == outputs["4"].keys() and all(
        outputs["1"][k] == outputs["4"][k] for k in outputs["1"])
    crit.check("CSV artifacts byte-identical across thread counts", same)
    crit.finish()
