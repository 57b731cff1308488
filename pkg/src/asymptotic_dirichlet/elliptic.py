"""Elliptic solves on geodesic balls and the exhaustion to infinity.

The equation ``a * Lap(u) + c u = f`` is discretized on a cell-centered
polar grid (no unknown at the pole) in the conservative flux form

``Lap(u) ~ [w(r+) (u_up - u) - w(r-) (u - u_dn)] / (w(r) dr^2)
          + (u_left + u_right - 2 u) / (psi^2 dtheta^2)``

with ``w = psi**(m-1)`` evaluated at cell faces.  All face weights are
positive, so the assembled matrix has the sign pattern of an M-matrix and
the discrete comparison principle holds exactly; the flux at the pole
face carries weight ``psi(0) = 0`` and drops out, which is the
cell-centered limit of the usual across-the-pole ghost identification.
Face ratios are formed from ``log psi`` differences and each row is
rescaled by its largest coefficient, so profiles like ``exp(r**3)``
assemble without overflow.

Dirichlet data enters at exactly ``r = j`` (the outermost cell face) by
linear elimination of the outer ghost cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .barriers import ConeBarrier, RadialBarrier
from .errors import PreconditionError, SolverError
from .geometry import ModelManifold
from .hypotheses import CoefficientBundle

__all__ = [
    "PolarGrid",
    "DiscreteField",
    "PolarOperator",
    "LinearSystem",
    "ExhaustionReport",
    "MMatrixReport",
    "assemble_operator",
    "assemble",
    "solve_ball",
    "exhaustion_solve",
    "attainment_profile",
    "attainment_envelope",
    "fourier_oracle",
    "oracle_compare",
    "uniqueness_probe",
    "mmatrix_report",
    "gamma_values",
]


@dataclass(frozen=True)
class PolarGrid:
    """Cell-centered tensor grid on the geodesic ball of radius ``ball``.

    Radii sit at ``(k + 1/2) dr`` with ``nr * dr = ball`` (the outermost
    cell face is the boundary); angles at ``l * 2 pi / ntheta``,
    periodic.  ``ntheta`` must be even so angular stencils stay aligned
    across the pole.
    """

    ball: float
    nr: int
    ntheta: int

    def __post_init__(self):
        if self.ball <= 0 or self.nr < 2:
            raise ValueError("need ball > 0 and nr >= 2")
        if self.ntheta < 4 or self.ntheta % 2:
            raise ValueError("ntheta must be even and at least 4")

    @property
    def dr(self):
        return self.ball / self.nr

    @property
    def dtheta(self):
        return 2.0 * math.pi / self.ntheta

    @property
    def radii(self):
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def thetas(self):
        return np.arange(self.ntheta) * self.dtheta

    def index(self, k, l):
        return k * self.ntheta + l % self.ntheta


@dataclass
class DiscreteField:
    """Values on a polar grid, shaped (nr, ntheta)."""

    grid: PolarGrid
    values: np.ndarray

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def core(self, radius):
        """Rows of cells with center radius below ``radius``."""
        mask = self.grid.radii < radius
        return self.values[mask]

    def rows(self):
        rr = self.grid.radii
        tt = self.grid.thetas
        for k in range(self.grid.nr):
            for l in range(self.grid.ntheta):
                yield (rr[k], tt[l], self.values[k, l])


def gamma_values(gamma, grid: PolarGrid):
    """Boundary data sampled on the angular grid."""
    if callable(gamma):
        return np.asarray(gamma(grid.thetas), dtype=float)
    values = np.asarray(gamma, dtype=float)
    if values.shape != (grid.ntheta,):
        raise ValueError("gamma array must match the angular grid")
    return values


@dataclass
class PolarOperator:
    """Row-scaled discretization of ``a * Lap + c`` with ghost-eliminated
    Dirichlet boundary.

    ``matrix @ u + boundary_term(gamma) = rhs_scale * f`` is the discrete
    equation; ``rhs_scale`` is the positive per-cell row scaling (it
    absorbs ``dr**2 / a`` and the log-space normalization).
    """

    grid: PolarGrid
    manifold: ModelManifold
    matrix: sp.csr_matrix = field(repr=False)
    boundary_gain: float
    rhs_scale: np.ndarray = field(repr=False)
    a_vals: np.ndarray = field(repr=False)
    c_vals: np.ndarray = field(repr=False)
    _lu: object = field(default=None, repr=False)

    def boundary_term(self, gamma):
        """Vector carrying ``2 g gamma`` on the outermost cell row."""
        g = gamma_values(gamma, self.grid)
        out = np.zeros(self.grid.nr * self.grid.ntheta)
        out[-self.grid.ntheta:] = 2.0 * self.boundary_gain * g
        return out

    def lu(self):
        if self._lu is None:
            self._lu = splu(self.matrix.tocsc())
        return self._lu


def assemble_operator(manifold: ModelManifold, bundle: CoefficientBundle,
                      grid: PolarGrid, require_nonpositive_c=True
                      ) -> PolarOperator:
    """Build the flux-form operator on the given grid.

    Raises
    ------
    PreconditionError
        If ``a`` is not positive or (when required) ``c`` is positive
        somewhere on the grid, or the manifold dimension is not 2.
    """
    if manifold.dim != 2:
        raise PreconditionError(
            "ball solvers are implemented for two-dimensional models; "
            "higher dimensions enter only through the scalar checks")
    nr, nt = grid.nr, grid.ntheta
    dr, dth = grid.dr, grid.dtheta
    radii = grid.radii
    thetas = grid.thetas

    a_vals = np.asarray(bundle.a(radii[:, None], thetas[None, :]), dtype=float)
    c_vals = np.asarray(bundle.c(radii[:, None], thetas[None, :]), dtype=float)
    if np.any(~np.isfinite(a_vals)) or np.any(a_vals <= 0):
        raise PreconditionError("diffusion coefficient must be positive "
                                "and finite on the grid")
    if require_nonpositive_c and np.any(c_vals > 1e-13):
        raise PreconditionError("zero-order coefficient must be <= 0 for "
                                "the elliptic problem")

    log_psi = manifold.profile.log_eval
    faces = np.arange(nr + 1) * dr
    log_psi_faces = np.concatenate([[-np.inf], log_psi(faces[1:])])
    log_psi_cells = log_psi(radii)

    lup = log_psi_faces[1:] - log_psi_cells          # k -> k+1 coupling
    ldn = log_psi_faces[:-1] - log_psi_cells         # k -> k-1 (0 at pole)
    lang = 2.0 * (math.log(dr / dth) - log_psi_cells)
    scale = np.maximum.reduce([lup, ldn, lang, np.zeros(nr)])
    cup = np.exp(lup - scale)
    cdn = np.exp(ldn - scale)
    cang = np.exp(lang - scale)

    # rhs_scale = dr^2 e^{-scale} / a, also multiplies c and f
    rhs_scale = dr * dr * np.exp(-scale)[:, None] / a_vals

    rows, cols, vals = [], [], []
    idx = np.arange(nr * nt).reshape(nr, nt)

    diag = -(cup[:, None] + cdn[:, None] + 2.0 * cang[:, None])
    diag = diag + c_vals * rhs_scale
    diag[-1, :] -= cup[-1]  # outer ghost elimination
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())

    rows.append(idx[:-1].ravel())
    cols.append(idx[1:].ravel())
    vals.append(np.repeat(cup[:-1], nt))

    rows.append(idx[1:].ravel())
    cols.append(idx[:-1].ravel())
    vals.append(np.repeat(cdn[1:], nt))

    left = np.roll(idx, 1, axis=1)
    right = np.roll(idx, -1, axis=1)
    for nb in (left, right):
        rows.append(idx.ravel())
        cols.append(nb.ravel())
        vals.append(np.repeat(cang, nt))

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nr * nt, nr * nt)).tocsr()
    return PolarOperator(grid=grid, manifold=manifold, matrix=matrix,
                         boundary_gain=float(cup[-1]), rhs_scale=rhs_scale,
                         a_vals=a_vals, c_vals=c_vals)


@dataclass
class LinearSystem:
    operator: PolarOperator
    rhs: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)


def assemble(manifold: ModelManifold, bundle: CoefficientBundle,
             grid: PolarGrid, gamma) -> LinearSystem:
    """Assemble the discrete Dirichlet problem on one ball."""
    op = assemble_operator(manifold, bundle, grid)
    g = gamma_values(gamma, grid)
    f_vals = np.asarray(bundle.f(grid.radii[:, None], grid.thetas[None, :]),
                        dtype=float)
    rhs = (f_vals * op.rhs_scale).ravel() - op.boundary_term(g)
    return LinearSystem(operator=op, rhs=rhs, gamma=g)


def solve_ball(system: LinearSystem, residual_tol=1e-10) -> DiscreteField:
    """Direct sparse solve with residual enforcement.

    One step of iterative refinement is applied if the first solve does
    not meet the relative residual target.
    """
    op = system.operator
    lu = op.lu()
    x = lu.solve(system.rhs)
    scale = max(float(np.max(np.abs(system.rhs))), 1e-300)
    for _ in range(3):
        res = system.rhs - op.matrix @ x
        if np.max(np.abs(res)) <= residual_tol * scale:
            break
        x = x + lu.solve(res)
    else:
        res = system.rhs - op.matrix @ x
        if np.max(np.abs(res)) > residual_tol * scale:
            raise SolverError(
                f"ball solve residual {np.max(np.abs(res)):.3g} above "
                f"{residual_tol:.1g} * {scale:.3g}")
    values = x.reshape(op.grid.nr, op.grid.ntheta)
    if not np.all(np.isfinite(values)):
        raise SolverError("non-finite values in the ball solve")
    return DiscreteField(grid=op.grid, values=values)


@dataclass
class MMatrixReport:
    is_m_matrix: bool
    min_offdiag: float
    max_diag: float
    worst_row_slack: float
    strict_rows: int


def mmatrix_report(operator: PolarOperator, tol=1e-12) -> MMatrixReport:
    """Sign and dominance inspection of the assembled matrix.

    The operator matrix must have negative diagonal, nonnegative
    off-diagonal entries and weak diagonal dominance with strict rows
    (the boundary-coupled ones), i.e. its negative is an M-matrix.
    """
    m = operator.matrix.tocoo()
    off = m.data[m.row != m.col]
    diag = operator.matrix.diagonal()
    rowsum = np.asarray(operator.matrix.sum(axis=1)).ravel()
    # rows of (aLap + c): sum <= 0, with c=0 interior rows summing to 0
    slack = rowsum
    strict = int(np.sum(slack < -tol))
    ok = bool(np.min(off, initial=0.0) >= -tol
              and np.max(diag) < 0.0
              and np.max(slack) <= tol
              and strict > 0)
    return MMatrixReport(is_m_matrix=ok,
                         min_offdiag=float(np.min(off, initial=0.0)),
                         max_diag=float(np.max(diag)),
                         worst_row_slack=float(np.max(slack)),
                         strict_rows=strict)


def attainment_profile(u: DiscreteField, gamma):
    """Radial profile of the worst angular deviation from the data."""
    g = gamma_values(gamma, u.grid)
    dev = np.max(np.abs(u.values - g[None, :]), axis=1)
    return u.grid.radii.copy(), dev


@dataclass
class ExhaustionReport:
    schedule: list
    sup_norms: list
    core_diffs: list
    bound_limit: Optional[float]
    bound_ok: Optional[bool]
    attainment_radii: np.ndarray = field(repr=False)
    attainment: np.ndarray = field(repr=False)
    compatibility: Optional[float] = None


def _solve_on_schedule(manifold, bundle, gamma, schedule, dr, ntheta,
                       threads=1):
    grids = []
    for ball in schedule:
        nr = ball / dr
        if abs(nr - round(nr)) > 1e-9:
            raise ValueError(f"ball radius {ball} is not a multiple of "
                             f"dr={dr}")
        grids.append(PolarGrid(ball=float(ball), nr=int(round(nr)),
                               ntheta=ntheta))

    def run(grid):
        return solve_ball(assemble(manifold, bundle, grid, gamma))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fields = list(pool.map(run, grids))
    else:
        fields = [run(g) for g in grids]
    return fields


def exhaustion_solve(manifold: ModelManifold, bundle: CoefficientBundle,
                     gamma, schedule, dr, ntheta, *,
                     barrier: Optional[RadialBarrier] = None,
                     bound_tol=1e-8, threads=1):
    """Solve the ball problems over an increasing schedule of radii.

    The radial step is shared across the schedule so cell centers nest
    and successive solutions are compared without interpolation on the
    core ball (half the smallest schedule radius).  When a radial barrier
    is supplied (admissible bundle), the a-priori bound
    ``max(|f|, |gamma|) * (1 + V(0))`` is asserted on every solve.

    Returns ``(ExhaustionReport, DiscreteField)`` with the largest-ball
    solution.
    """
    schedule = sorted(float(j) for j in schedule)
    fields = _solve_on_schedule(manifold, bundle, gamma, schedule, dr,
                                ntheta, threads=threads)
    core_radius = schedule[0] / 2.0
    sup_norms = [f.sup_norm() for f in fields]
    core_diffs = []
    for prev, cur in zip(fields[:-1], fields[1:]):
        n_core = prev.core(core_radius).shape[0]
        diff = np.abs(cur.values[:n_core] - prev.values[:n_core])
        core_diffs.append(float(np.max(diff)))

    g = gamma_values(gamma, fields[-1].grid)
    bound_limit = None
    bound_ok = None
    if barrier is not None:
        data_norm = max(bundle.norm_f, float(np.max(np.abs(g))))
        bound_limit = data_norm * (1.0 - barrier.offset)  # V(0) = -offset
        bound_ok = bool(all(s <= bound_limit + bound_tol for s in sup_norms))

    radii, profile = attainment_profile(fields[-1], g)
    report = ExhaustionReport(schedule=schedule, sup_norms=sup_norms,
                              core_diffs=core_diffs,
                              bound_limit=bound_limit, bound_ok=bound_ok,
                              attainment_radii=radii, attainment=profile)
    return report, fields[-1]


def fourier_oracle(manifold: ModelManifold, bundle: CoefficientBundle,
                   gamma, ball, nr, ntheta, mode_cut=1e-13) -> DiscreteField:
    """Independent reference solution for radial coefficients.

    Expands the boundary data in angular modes, solves the two-point
    boundary value problem of each mode on the radial grid (same flux
    form, exact ``-k**2/psi**2`` angular factor, regularity at the pole
    from the vanishing pole-face weight), and resums.  Only modes whose
    data coefficient exceeds ``mode_cut`` relative to the largest are
    solved.
    """
    grid = PolarGrid(ball=float(ball), nr=int(nr), ntheta=int(ntheta))
    radii = grid.radii
    thetas = grid.thetas
    a_r = np.asarray(bundle.a(radii, np.zeros_like(radii)), dtype=float)
    c_r = np.asarray(bundle.c(radii, np.zeros_like(radii)), dtype=float)
    f_r = np.asarray(bundle.f(radii, np.zeros_like(radii)), dtype=float)
    probe = np.linspace(0.0, 2 * math.pi, 17)[None, :]
    for name, fn in (("a", bundle.a), ("c", bundle.c), ("f", bundle.f)):
        sample = np.asarray(fn(radii[:, None], probe), dtype=float)
        if np.max(np.abs(sample - sample[:, :1])) > 1e-12 * (
                1.0 + np.max(np.abs(sample))):
            raise PreconditionError(
                f"fourier reference needs radial coefficients; {name} "
                "varies with the angle")

    g = gamma_values(gamma, grid)
    g_hat = np.fft.rfft(g) / grid.ntheta

    dr = grid.dr
    log_psi = manifold.profile.log_eval
    faces = np.arange(grid.nr + 1) * dr
    log_psi_faces = np.concatenate([[-np.inf], log_psi(faces[1:])])
    log_psi_cells = log_psi(radii)
    lup = log_psi_faces[1:] - log_psi_cells
    ldn = log_psi_faces[:-1] - log_psi_cells
    lmass = 2.0 * (math.log(dr) - log_psi_cells)
    scale = np.maximum.reduce([lup, ldn, lmass, np.zeros(grid.nr)])
    cup = np.exp(lup - scale)
    cdn = np.exp(ldn - scale)
    cmass = np.exp(lmass - scale)
    rhs_scale = dr * dr * np.exp(-scale) / a_r

    cutoff = mode_cut * max(float(np.max(np.abs(g_hat))), 1e-300)
    modes = np.zeros((g_hat.size, grid.nr), dtype=complex)
    for k, coeff in enumerate(g_hat):
        if abs(coeff) <= cutoff and k > 0:
            continue
        band = np.zeros((3, grid.nr), dtype=complex)
        diag = -(cup + cdn) - (k * k) * cmass + c_r * rhs_scale
        diag[-1] -= cup[-1]
        band[1] = diag
        band[0, 1:] = cup[:-1]
        band[2, :-1] = cdn[1:]
        rhs = np.zeros(grid.nr, dtype=complex)
        if k == 0:
            rhs += f_r * rhs_scale
        rhs[-1] -= 2.0 * cup[-1] * coeff
        modes[k] = solve_banded((1, 1), band, rhs)

    values = np.fft.irfft(modes.T * grid.ntheta, n=grid.ntheta, axis=1)
    return DiscreteField(grid=grid, values=values)


def oracle_compare(manifold: ModelManifold, bundle: CoefficientBundle,
                   gamma, ball, nr, ntheta, refine=9):
    """Sup-difference between the ball solve and the mode reference.

    The reference runs on an ``refine`` times finer radial grid whose
    cell centers contain the coarse ones exactly (``refine`` must be
    odd), so the comparison involves no interpolation.
    """
    if refine % 2 == 0:
        raise ValueError("refine must be odd so cell centers nest")
    grid = PolarGrid(ball=float(ball), nr=int(nr), ntheta=int(ntheta))
    u = solve_ball(assemble(manifold, bundle, grid, gamma))
    ref = fourier_oracle(manifold, bundle, gamma, ball, nr * refine, ntheta)
    take = refine * np.arange(nr) + (refine - 1) // 2
    diff = float(np.max(np.abs(u.values - ref.values[take])))
    return diff, u, ref


def uniqueness_probe(manifold: ModelManifold, bundle: CoefficientBundle,
                     gamma, schedule, dr, ntheta, *, bump=None, threads=1):
    """Decay of boundary-data influence on interior quarters.

    Each ball is solved with the data and with the data plus a unit bump
    supported on an angular arc; the sup-difference of the two solutions
    over the quarter ball ``r < j/4`` is returned per schedule entry.
    """
    if bump is None:
        def bump(theta):
            d = np.abs(np.mod(theta + math.pi, 2 * math.pi) - math.pi)
            return np.where(d < math.pi / 4,
                            np.cos(2.0 * d) ** 2, 0.0)

    schedule = sorted(float(j) for j in schedule)
    base = _solve_on_schedule(manifold, bundle, gamma, schedule, dr, ntheta,
                              threads=threads)
    if callable(gamma):
        def bumped(theta):
            return np.asarray(gamma(theta), dtype=float) + bump(theta)
    else:
        thetas = np.arange(ntheta) * (2.0 * math.pi / ntheta)
        bumped = np.asarray(gamma, dtype=float) + bump(thetas)
    pert = _solve_on_schedule(manifold, bundle, bumped, schedule, dr, ntheta,
                              threads=threads)
    curve = []
    for j, u0, u1 in zip(schedule, base, pert):
        mask = u0.grid.radii < j / 4.0
        diff = float(np.max(np.abs(u1.values[mask] - u0.values[mask])))
        curve.append((j, diff))
    return curve


def modulus_delta(gamma, eps, n=4096):
    """Largest angular separation within which the data varies by < eps."""
    thetas = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    g = np.asarray(gamma(thetas) if callable(gamma) else gamma, dtype=float)
    if g.size != n:
        thetas = np.linspace(0.0, 2.0 * math.pi, g.size, endpoint=False)
        n = g.size
    step = 2.0 * math.pi / n
    for lag in range(1, n // 2):
        osc = np.max(np.abs(np.roll(g, -lag) - g))
        if osc >= eps:
            return max(step, (lag - 1) * step)
    return math.pi


def attainment_envelope(cone: ConeBarrier, bundle: CoefficientBundle,
                        gamma, eps, *, k_t: Optional[float] = None):
    """Dominating profile ``K * gain * V(r) + eps`` from the comparison
    argument, with the constant ``K`` assembled from the run's norms at
    accuracy level ``eps``.

    Returns a callable of the radius.  The constant is pessimistic (it
    scales like ``1/delta(eps)**2``); the point of the check is
    domination, not sharpness.
    """
    barrier = cone.radial
    thetas = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
    g = np.asarray(gamma(thetas) if callable(gamma) else gamma, dtype=float)
    gamma_norm = float(np.max(np.abs(g)))
    if k_t is None:
        k_t = max(bundle.norm_f, gamma_norm) * (1.0 - barrier.offset)
    delta = min(modulus_delta(gamma, eps), cone.aperture)
    floor = min(delta**2,
                cone.gain * float(barrier.value_at(cone.inner_radius)))
    k1 = (gamma_norm + k_t) / floor
    k2 = bundle.norm_c * (gamma_norm + 1.0) + bundle.norm_f
    big_k = max(k1, k2)

    def envelope(r):
        return big_k * cone.gain * barrier.value_at(r) + eps

    return envelope
