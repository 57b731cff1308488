"""Radial and directional comparison functions (barriers).

``build_radial_barrier`` constructs a positive decreasing radial function
``V`` with ``a * Lap(V) <= -1`` everywhere and ``V -> 0`` at infinity,
from the reciprocal of the coefficient minorant.  With

``P(r) = int_0^r a0(t) psi(t)**(m-1) dt``

the function is ``V(r) = I(r) P(r) - int_0^r I a0 psi**(m-1) dt - H``
(``I`` the profile tail integral, ``H`` the large-radius limit of the
first two terms).  Because ``I' = -psi**(1-m)``, integration by parts
collapses this to the single smooth integral

``V(r) = int_r^inf psi(t)**(1-m) P(t) dt``,

which is how it is tabulated: no tail lookups, no cancellation, and
positivity / monotonicity hold structurally.  ``V' = -psi**(1-m) P`` is
analytic, and ``V'' + (m-1)(psi'/psi) V' = -a0`` exactly.

``build_cone_barrier`` attaches the squared angular distance to a scaled
copy of ``V``; the result is a supersolution on a cone around any
direction and witnesses attainment of boundary data at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import BarrierError, PreconditionError
from .geometry import ModelManifold, angular_distance
from .hypotheses import CoefficientBundle
from .quadrature import layer_breakpoints, quad_log

__all__ = [
    "RadialWeight",
    "RadialBarrier",
    "ConeBarrier",
    "CheckResult",
    "BarrierVerification",
    "build_weight",
    "compute_limit_offset",
    "build_radial_barrier",
    "verify_radial_barrier",
    "build_cone_barrier",
    "verify_cone_barrier",
    "squared_distance_laplacian",
]


@dataclass
class RadialWeight:
    """Reciprocal minorant profile ``a0`` with ``a(x) >= 1/a0(r(x))``."""

    weight: Callable
    log_weight: Callable
    scale: float
    r0: float


def build_weight(bundle: CoefficientBundle, n_r=64, n_theta=64) -> RadialWeight:
    """Build ``a0`` and its normalization from the bundle.

    The normalization is ``min(min_ball a, abar(r0)) / abar(r0)``, sampled
    on the closed ball of radius ``r0``; it lies in ``(0, 1]`` and makes
    ``a >= 1/a0`` hold across the matching radius.
    """
    r0 = bundle.r0
    radii = np.linspace(0.0, r0, n_r)
    angles = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    ball_min = float(np.min(bundle.a(radii[:, None], angles[None, :])))
    if not ball_min > 0:
        raise BarrierError(
            f"diffusion coefficient not positive on the ball of radius {r0}")
    abar_r0 = float(bundle.a_minorant(r0))
    if not abar_r0 > 0:
        raise BarrierError("minorant not positive at its matching radius")
    scale = min(ball_min, abar_r0) / abar_r0

    def log_a0(r):
        return -math.log(scale) - bundle.log_minorant_clamped(r)

    def a0(r):
        return np.exp(log_a0(r))

    return RadialWeight(weight=a0, log_weight=log_a0, scale=scale, r0=r0)


def _as_weight(weight, log_weight=None, r0=1.0):
    if isinstance(weight, RadialWeight):
        return weight
    if log_weight is None:
        def log_weight(r):
            return np.log(weight(r))
    return RadialWeight(weight=weight, log_weight=log_weight, scale=1.0,
                        r0=r0)


class _RadialEngine:
    """Tabulates ``G = psi**(1-m) P`` and its segment integrals.

    ``G`` stays moderate even when ``P`` and ``psi**(m-1)`` overflow all
    float range, so its log is what gets accumulated: on a dense
    geometric mesh the recurrence

    ``G(t2) = G(t1) * (psi(t1)/psi(t2))**(m-1)
              + psi(t2)**(1-m) * int_t1^t2 a0 psi**(m-1)``

    is evaluated in log space (layer breakpoints resolve the mass piling
    up at each segment's right end) and splined in ``log r``.
    """

    def __init__(self, manifold: ModelManifold, weight: RadialWeight,
                 t_max, t_min=1e-3, mesh_per_decade=80, extra_nodes=None):
        self.manifold = manifold
        self.weight = weight
        m = manifold.dim
        profile = manifold.profile
        self._log_psi = profile.log_eval
        self._drift = lambda r: (m - 1.0) * profile.drift_ratio(r)
        self._sigma = lambda x: weight.log_weight(x) \
            + (m - 1.0) * profile.log_eval(x)
        # the weight kinks at its matching radius and the profile's third
        # derivative jumps at its splice; splining across either rings
        knots = {weight.r0}
        match = profile.params.get("match_radius")
        if match is not None:
            knots.add(float(match))
        knots = np.array(sorted(k for k in knots if t_min < k < t_max))
        n = max(8, int(mesh_per_decade * math.log10(t_max / t_min)) + 1)
        mesh = np.geomspace(t_min, t_max, n)
        if extra_nodes is not None:
            extra = np.asarray(extra_nodes, dtype=float)
            extra = extra[(extra >= t_min) & (extra <= t_max)]
            mesh = np.concatenate([mesh, extra])
        self.mesh = np.unique(np.concatenate([mesh, knots]))
        n = self.mesh.size
        log_psi_mesh = (m - 1.0) * profile.log_eval(self.mesh)
        log_g = np.empty(n)
        lv0, _ = quad_log(self._sigma, 0.0, self.mesh[0], rel_tol=1e-12)
        log_g[0] = lv0 - log_psi_mesh[0]
        for i in range(n - 1):
            a, b = self.mesh[i], self.mesh[i + 1]
            pts = layer_breakpoints(a, b, rate_right=max(self._drift(b), 0.0))
            lv, _ = quad_log(self._sigma, a, b, rel_tol=1e-12, points=pts)
            carried = log_g[i] - (log_psi_mesh[i + 1] - log_psi_mesh[i])
            log_g[i + 1] = np.logaddexp(carried, lv - log_psi_mesh[i + 1])
        self._log_g_nodes = log_g
        bounds = np.concatenate([[self.mesh[0]], knots, [self.mesh[-1]]])
        self._pieces = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sel = (self.mesh >= lo) & (self.mesh <= hi)
            if np.count_nonzero(sel) >= 4:
                spline = CubicSpline(np.log(self.mesh[sel]), log_g[sel])
            else:
                spline = None
            self._pieces.append((lo, hi, spline))

    def log_g(self, x):
        """log of ``psi**(1-m) P``; exact at mesh nodes, piecewise-splined
        between (pieces split at the weight / profile knots)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        done = np.zeros(x.shape, dtype=bool)
        # exact values on mesh nodes
        idx = np.searchsorted(self.mesh, x)
        idx = np.clip(idx, 0, self.mesh.size - 1)
        exact = self.mesh[idx] == x
        out[exact] = self._log_g_nodes[idx[exact]]
        done |= exact
        for lo, hi, spline in self._pieces:
            sel = ~done & (x >= lo) & (x <= hi)
            if not sel.any():
                continue
            if spline is None:
                out[sel] = np.interp(np.log(x[sel]), np.log(self.mesh),
                                     self._log_g_nodes)
            else:
                out[sel] = spline(np.log(x[sel]))
            done |= sel
        if not done.all():
            # outside the tabulated range: fall back to the nearest piece
            lo, hi, spline = self._pieces[0] if x[~done].min() < self.mesh[0] \
                else self._pieces[-1]
            rest = ~done
            if spline is None:
                out[rest] = np.interp(np.log(x[rest]), np.log(self.mesh),
                                      self._log_g_nodes)
            else:
                out[rest] = spline(np.log(x[rest]))
        return out[0] if scalar else out

    def log_p(self, x):
        """log P (may overflow float range only after exponentiation)."""
        x = np.asarray(x, dtype=float)
        m = self.manifold.dim
        return self.log_g(x) + (m - 1.0) * self._log_psi(x)

    def segment_integrals(self, nodes):
        """Integrals of ``psi**(1-m) P`` between consecutive nodes."""
        out = np.empty(len(nodes) - 1)
        for i in range(len(nodes) - 1):
            lv, _ = quad_log(self.log_g, nodes[i], nodes[i + 1],
                             rel_tol=1e-10)
            out[i] = math.exp(lv)
        return out

    def initial_integral(self, t_first):
        """Integral of ``psi**(1-m) P`` over ``[0, t_first]``.

        Below the mesh the integrand behaves like ``a0(0) t / m``; the
        nested quadrature here is cheap because the range is tiny.
        """
        def log_g(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            vals = np.empty_like(x)
            for i, xi in enumerate(x):
                lv, _ = quad_log(self._sigma, 0.0, xi, rel_tol=1e-10)
                vals[i] = lv
            m = self.manifold.dim
            return (1.0 - m) * self._log_psi(x) + vals

        lv, _ = quad_log(log_g, 0.0, t_first, rel_tol=1e-9)
        return math.exp(lv)


@dataclass
class OffsetResult:
    offset: float
    stabilized_at: float
    rho_final: float
    rho_values: np.ndarray
    bracket_values: np.ndarray


def compute_limit_offset(manifold: ModelManifold, weight, tol=1e-3, *,
                         log_weight=None, rho0=None, rho_floor=None,
                         max_doublings=10) -> OffsetResult:
    """Limit of ``I(rho) P(rho) - int_0^rho I a0 psi**(m-1)`` for large rho.

    The bracket equals ``-int_0^rho psi**(1-m) P`` exactly and decreases
    strictly, so its limit is approximated by the deepest value of a
    doubling sequence once three consecutive increments fall below
    ``tol``.  The result is the vertical offset that makes the radial
    barrier vanish at infinity; it is nonpositive up to quadrature error.

    Raises
    ------
    BarrierError
        If the increments have not stabilized after ``max_doublings``
        doublings of ``rho``.
    """
    w = _as_weight(weight, log_weight)
    if rho0 is None:
        rho0 = max(2.0, 2.0 * w.r0)
    n_doublings = max_doublings
    if rho_floor is not None and rho_floor > rho0:
        n_doublings = max(n_doublings,
                          int(math.ceil(math.log2(rho_floor / rho0))))
    # beyond some radius the log of the profile loses the absolute
    # precision the relative recurrence needs; cap the horizon there
    m = manifold.dim
    eps = np.finfo(float).eps

    def in_range(k):
        log_range = (m - 1.0) * float(manifold.profile.log_eval(rho0 * 2.0**k))
        return abs(log_range) * eps <= 1e-4

    while n_doublings > 1 and not in_range(n_doublings):
        n_doublings -= 1
    rhos = rho0 * 2.0 ** np.arange(n_doublings + 1)
    if rho_floor is not None and rhos[-1] < rho_floor * (1 - 1e-12):
        raise BarrierError(
            f"requested truncation radius {rho_floor:.3g} exceeds the "
            f"representable log range of the profile (cap {rhos[-1]:.3g})")
    engine = _RadialEngine(manifold, w, t_max=rhos[-1],
                           t_min=min(1e-3, rho0), extra_nodes=rhos)
    nodes = np.unique(np.concatenate([[engine.mesh[0]], rhos]))
    segs = engine.segment_integrals(nodes)
    head = engine.initial_integral(nodes[0])
    # B(node_i) = -(head + sum of segment integrals up to node_i)
    b_nodes = -(head + np.concatenate([[0.0], np.cumsum(segs)]))
    node_brackets = dict(zip(nodes, b_nodes))
    b_at_rho = np.array([node_brackets[r] for r in rhos])
    increments = -np.diff(b_at_rho)  # positive, since B decreases
    stab_idx = None
    run = 0
    for k, inc in enumerate(increments):
        run = run + 1 if inc < tol else 0
        if run >= 3:
            stab_idx = k
            break
    if stab_idx is None or stab_idx + 1 > max_doublings:
        raise BarrierError(
            f"barrier offset not stabilizing within {max_doublings} "
            f"doublings from rho0={rho0} at tol={tol}")
    final_idx = len(rhos) - 1 if rho_floor is not None else stab_idx + 1
    return OffsetResult(offset=float(b_at_rho[final_idx]),
                        stabilized_at=float(rhos[stab_idx + 1]),
                        rho_final=float(rhos[final_idx]),
                        rho_values=rhos[:final_idx + 1],
                        bracket_values=b_at_rho[:final_idx + 1])


@dataclass
class RadialBarrier:
    """Tabulated radial supersolution with analytic first two derivatives."""

    grid: np.ndarray
    values: np.ndarray
    vprime: np.ndarray
    vsecond: np.ndarray
    scale: float
    offset: float
    weight: RadialWeight
    manifold: ModelManifold = field(repr=False)
    bundle: Optional[CoefficientBundle] = field(default=None, repr=False)
    vanish_target: float = 1e-3
    rho_final: float = math.inf
    build_params: dict = field(default_factory=dict, repr=False)
    _engine: object = field(default=None, repr=False)

    def value_at(self, r):
        """V interpolated in log-radius (tabulated nodes are exact)."""
        r = np.asarray(r, dtype=float)
        return np.interp(np.log(r), np.log(self.grid), self.values)

    def derivatives_at(self, r):
        """Analytic first and second derivative at arbitrary radii.

        Only available on barriers produced by ``build_radial_barrier``;
        radii should lie within the tabulation range.
        """
        if self._engine is None:
            raise ValueError("derivatives_at requires a built barrier")
        r = np.asarray(r, dtype=float)
        vp = -np.exp(self._engine.log_g(r))
        m = self.manifold.dim
        drift = (m - 1.0) * self.manifold.profile.drift_ratio(r)
        a0 = np.exp(self.weight.log_weight(r))
        return vp, -drift * vp - a0

    @property
    def r_max(self):
        return float(self.grid[-1])


def build_radial_barrier(manifold: ModelManifold, bundle: CoefficientBundle,
                         *, grid=None, r_min=1e-3, points_per_decade=40,
                         vanish_target=1e-3, offset_tol=1e-3,
                         max_doublings=14) -> RadialBarrier:
    """Construct and tabulate the radial barrier for an admissible bundle.

    When ``grid`` is omitted, a geometric grid is laid from ``r_min`` to
    the smallest doubling radius where the barrier has dropped below
    ``vanish_target``; the truncation radius of the defining integral sits
    at least one doubling beyond the grid, so the tabulated values stay
    strictly positive.
    """
    weight = build_weight(bundle)
    rho0 = max(2.0, 2.0 * weight.r0)
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        rho_floor = 2.0 * grid[-1]
        r_min = float(grid[0])
    else:
        rho_floor = None
    offset_res = compute_limit_offset(
        manifold, weight, tol=offset_tol, rho0=rho0, rho_floor=rho_floor,
        max_doublings=max_doublings)

    if grid is None:
        # suffix of the bracket sequence = barrier value at each rho
        rhos = offset_res.rho_values
        v_at_rho = offset_res.bracket_values - offset_res.offset
        candidates = rhos[v_at_rho <= 0.75 * vanish_target]
        candidates = candidates[candidates <= offset_res.rho_final / 2.0]
        if candidates.size == 0:
            # extend using a deeper floor tied to the deepest rho
            rho_floor = 2.0 * rhos[-1]
            offset_res = compute_limit_offset(
                manifold, weight, tol=offset_tol, rho0=rho0,
                rho_floor=rho_floor, max_doublings=max_doublings)
            rhos = offset_res.rho_values
            v_at_rho = offset_res.bracket_values - offset_res.offset
            candidates = rhos[(v_at_rho <= 0.75 * vanish_target)
                              & (rhos <= offset_res.rho_final / 2.0)]
        if candidates.size == 0:
            raise BarrierError("could not locate a vanishing radius; "
                               "increase max_doublings or vanish_target")
        r_max = float(candidates[0])
        n = max(8, int(points_per_decade * math.log10(r_max / r_min)) + 1)
        grid = np.geomspace(r_min, r_max, n)

    if offset_res.offset > 1e-8:
        raise BarrierError(
            f"barrier offset {offset_res.offset} is not nonpositive; "
            "the bundle is likely inadmissible")

    engine = _RadialEngine(manifold, weight, t_max=offset_res.rho_final,
                           t_min=min(r_min, 1e-3), extra_nodes=grid)
    nodes = np.unique(np.concatenate([grid, [offset_res.rho_final]]))
    segs = engine.segment_integrals(nodes)
    suffix = np.concatenate([np.cumsum(segs[::-1])[::-1], [0.0]])
    values = np.array([suffix[np.searchsorted(nodes, r)] for r in grid])

    m = manifold.dim
    # spline values of log(psi**(1-m) P) are within interpolation error
    # of the mesh tabulation and keep the derivative identities intact
    vprime = -np.exp(engine.log_g(grid))
    drift = (m - 1.0) * manifold.profile.drift_ratio(grid)
    a0_grid = np.exp(weight.log_weight(grid))
    vsecond = -drift * vprime - a0_grid

    barrier = RadialBarrier(
        grid=grid, values=values, vprime=vprime, vsecond=vsecond,
        scale=weight.scale, offset=offset_res.offset, weight=weight,
        manifold=manifold, bundle=bundle, vanish_target=vanish_target,
        rho_final=offset_res.rho_final,
        build_params={"r_min": r_min, "points_per_decade": points_per_decade,
                      "offset_tol": offset_tol,
                      "max_doublings": max_doublings},
        _engine=engine)
    if not np.all(values > 0):
        raise BarrierError("tabulated barrier not positive")
    if not np.all(np.diff(values) < 0):
        raise BarrierError("tabulated barrier not strictly decreasing")
    if values[-1] > vanish_target:
        raise BarrierError(
            f"barrier at the grid end ({values[-1]:.3g}) above the "
            f"vanishing target {vanish_target:.3g}")
    return barrier


@dataclass
class CheckResult:
    ok: bool
    worst: float
    location: object = None


@dataclass
class BarrierVerification:
    passed: bool
    checks: dict
    violations: list

    def rows(self):
        """Violation rows ``(check, r, theta, value)`` for CSV export."""
        return list(self.violations)


def _nonuniform_fd(grid, values):
    """Second-order first derivative on a nonuniform grid (interior)."""
    hl = grid[1:-1] - grid[:-2]
    hr = grid[2:] - grid[1:-1]
    num = (values[2:] * hl**2 - values[:-2] * hr**2
           + values[1:-1] * (hr**2 - hl**2))
    return num / (hl * hr * (hl + hr))


def verify_radial_barrier(barrier: RadialBarrier, manifold: ModelManifold,
                          bundle: CoefficientBundle, *, tol=1e-6,
                          n_theta=32, fd_check=True) -> BarrierVerification:
    """Check the defining properties of the radial barrier on its grid.

    Verifies positivity, strict decrease, smallness at the grid end, a
    nonpositive offset, negativity of the analytic derivative and the
    supersolution inequality ``a * Lap(V) <= -1 + tol`` at every node and
    sampled angle.  With ``fd_check`` the tabulated values are also
    differentiated numerically and compared against the analytic
    derivative on the given grid and a once-refined rebuild; the mismatch
    must shrink at second order (or sit at rounding level already).
    """
    checks = {}
    violations = []
    grid = barrier.grid
    v = barrier.values

    checks["positive"] = CheckResult(bool(np.all(v > 0)), float(np.min(v)),
                                     float(grid[int(np.argmin(v))]))
    diffs = np.diff(v)
    checks["decreasing"] = CheckResult(bool(np.all(diffs < 0)),
                                       float(np.max(diffs)))
    checks["vanishes"] = CheckResult(bool(v[-1] <= barrier.vanish_target),
                                     float(v[-1]), float(grid[-1]))
    checks["offset_nonpositive"] = CheckResult(barrier.offset <= 1e-8,
                                               float(barrier.offset))
    checks["derivative_negative"] = CheckResult(
        bool(np.all(barrier.vprime < 0)), float(np.max(barrier.vprime)))

    angles = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    m = manifold.dim
    drift = (m - 1.0) * manifold.profile.drift_ratio(grid)
    radial_part = barrier.vsecond + drift * barrier.vprime  # = -a0 exactly
    avals = bundle.a(grid[:, None], angles[None, :])
    residual = avals * radial_part[:, None] + 1.0
    worst_idx = np.unravel_index(np.argmax(residual), residual.shape)
    ok = bool(np.max(residual) <= tol)
    checks["supersolution"] = CheckResult(
        ok, float(np.max(residual)),
        (float(grid[worst_idx[0]]), float(angles[worst_idx[1]])))
    if not ok:
        bad = np.argwhere(residual > tol)
        for i, j in bad[:200]:
            violations.append(("supersolution", float(grid[i]),
                               float(angles[j]), float(residual[i, j])))

    if fd_check:
        def mismatch(b):
            fd = _nonuniform_fd(b.grid, b.values)
            scale = np.abs(b.vprime[1:-1]) + 1e-300
            return float(np.max(np.abs(fd - b.vprime[1:-1]) / scale))

        coarse = mismatch(barrier)
        fine_grid = np.geomspace(grid[0], grid[-1],
                                 2 * (len(grid) - 1) + 1)
        fine = build_radial_barrier(
            manifold, bundle, grid=fine_grid,
            vanish_target=barrier.vanish_target,
            offset_tol=barrier.build_params.get("offset_tol", 1e-3),
            max_doublings=barrier.build_params.get("max_doublings", 14))
        fine_mis = mismatch(fine)
        if coarse < 1e-10:
            order = math.inf
        else:
            order = math.log2(coarse / max(fine_mis, 1e-300))
        checks["derivative_consistency"] = CheckResult(
            bool(order >= 1.8 or fine_mis < 1e-10), float(order),
            (coarse, fine_mis))

    passed = all(c.ok for c in checks.values())
    for name, c in checks.items():
        if not c.ok and name != "supersolution":
            violations.append((name, float("nan"), float("nan"), c.worst))
    return BarrierVerification(passed=passed, checks=checks,
                               violations=violations)


def squared_distance_laplacian(manifold: ModelManifold, r, dist):
    """Angular Laplacian of the squared angular distance, in closed form.

    On the circle the second derivative of the squared distance is 2 away
    from the antipode; on the 2-sphere the colatitude form gives
    ``2 + 2 d cot d``.  Both are divided by ``psi(r)**2``.  Values at
    ``dist >= pi`` are NaN: the squared distance is not smooth there.
    """
    r = np.asarray(r, dtype=float)
    dist = np.asarray(dist, dtype=float)
    m = manifold.dim
    if m == 2:
        base = np.where(dist < math.pi - 1e-12, 2.0, np.nan)
    elif m == 3:
        with np.errstate(invalid="ignore"):
            base = np.where(
                dist < 1e-8, 4.0,
                np.where(dist < math.pi - 1e-12,
                         2.0 + 2.0 * dist / np.tan(dist), np.nan))
    else:
        raise ValueError("cone barriers implemented for m in (2, 3)")
    return base * np.exp(-2.0 * manifold.profile.log_eval(r))


def angular_estimate_constant(m: int) -> float:
    """Upper bound for ``psi**2`` times the squared-distance Laplacian."""
    if m == 2:
        return 2.0
    if m == 3:
        return 4.0
    raise ValueError("cone barriers implemented for m in (2, 3)")


@dataclass
class ConeBarrier:
    """Directional supersolution ``gain * V(r) + dist(theta, theta0)**2``."""

    theta0: float
    gain: float
    inner_radius: float
    aperture: float
    angular_constant: float
    c0: float
    m: int
    radial: RadialBarrier

    def height(self, r, theta):
        d = angular_distance(theta, self.theta0, m=self.m)
        return self.gain * self.radial.value_at(r) + d**2

    def boundary_floor(self, aperture=None, radius=None):
        """Positive lower bound for the barrier on the cone boundary."""
        aperture = self.aperture if aperture is None else aperture
        radius = self.inner_radius if radius is None else radius
        return min(aperture**2,
                   self.gain * float(self.radial.value_at(radius)))


def build_cone_barrier(barrier: RadialBarrier, theta0: float, *,
                       manifold: Optional[ModelManifold] = None,
                       bundle: Optional[CoefficientBundle] = None,
                       inner_factor=2.0, aperture=None) -> ConeBarrier:
    """Attach the squared angular distance to the radial barrier.

    The gain is ``C / c0 + 1`` with ``C`` the closed-form bound on the
    angular Laplacian of the squared distance; the minorant / angular
    weight compatibility bound must hold (checked here, error if not).
    The aperture is capped at ``pi/2`` so the cone keeps away from the
    antipode, where the squared distance loses smoothness.
    """
    from .hypotheses import check_weight_bound

    manifold = manifold or barrier.manifold
    bundle = bundle or barrier.bundle
    if manifold is None or bundle is None:
        raise ValueError("manifold and bundle required (or stored on the "
                         "radial barrier)")
    weight = check_weight_bound(manifold, bundle)
    if not weight.ok:
        raise PreconditionError(
            "minorant/angular-weight bound fails; no cone barrier "
            f"(worst log margin {weight.worst_log_margin:.3g} at "
            f"r={weight.worst_radius:.3g})")
    m = manifold.dim
    c = angular_estimate_constant(m)
    gain = c / bundle.c0 + 1.0
    if aperture is None:
        aperture = math.pi / 2.0
    aperture = min(aperture, math.pi / 2.0)
    return ConeBarrier(theta0=float(theta0), gain=gain,
                       inner_radius=inner_factor * bundle.r0,
                       aperture=aperture, angular_constant=c,
                       c0=bundle.c0, m=m, radial=barrier)


def verify_cone_barrier(cone: ConeBarrier, manifold: ModelManifold,
                        bundle: CoefficientBundle, *, tol=1e-6,
                        n_dist=49, radii=None) -> BarrierVerification:
    """Check the cone barrier on a polar grid of its cone.

    Asserts the supersolution inequality at interior nodes, positivity,
    the boundary floor ``min(aperture**2, gain*V(R))`` on the inner and
    lateral boundaries, and monotone decay along the axis.  Nodes where
    the closed-form angular Laplacian is invalid (at or past the
    antipode) are reported as violations; they can only appear when the
    cone was widened beyond its construction aperture.
    """
    barrier = cone.radial
    if radii is None:
        radii = barrier.grid[barrier.grid >= cone.inner_radius]
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2:
        raise ValueError("cone verification needs at least two radii")
    dists = np.linspace(0.0, cone.aperture, n_dist)
    m = manifold.dim

    checks = {}
    violations = []

    v = np.interp(np.log(radii), np.log(barrier.grid), barrier.values)
    vp = np.interp(np.log(radii), np.log(barrier.grid), barrier.vprime)
    vpp = np.interp(np.log(radii), np.log(barrier.grid), barrier.vsecond)
    drift = (m - 1.0) * manifold.profile.drift_ratio(radii)
    radial_lap = vpp + drift * vp

    # theta positions at each distance (one representative per distance;
    # models are rotation invariant so a is sampled on both sides)
    thetas = cone.theta0 + dists
    height = cone.gain * v[:, None] + dists[None, :] ** 2
    ang_lap = squared_distance_laplacian(manifold, radii[:, None],
                                         dists[None, :])
    lap_h = cone.gain * radial_lap[:, None] + ang_lap
    avals = bundle.a(radii[:, None], thetas[None, :])
    residual = avals * lap_h + 1.0

    interior = (dists[None, :] < cone.aperture) & \
        (radii[:, None] > radii[0])
    res_int = np.where(interior, residual, -np.inf)
    bad_nan = interior & ~np.isfinite(residual)
    finite_vals = res_int[np.isfinite(res_int)]
    ok_res = bool((~bad_nan).all()
                  and np.all(finite_vals <= tol))
    worst = float(np.max(finite_vals)) if finite_vals.size else float("nan")
    checks["supersolution"] = CheckResult(ok_res, worst)
    if not ok_res:
        bad = np.argwhere(interior & (~np.isfinite(residual)
                                      | (residual > tol)))
        for i, j in bad[:200]:
            violations.append(("cone_supersolution", float(radii[i]),
                               float(thetas[j]), float(residual[i, j])))

    floor = cone.boundary_floor(radius=radii[0])
    lateral = height[:, -1]
    inner = height[0, :]
    ok_floor = bool(np.all(lateral >= floor - tol)
                    and np.all(inner >= floor - tol))
    checks["boundary_floor"] = CheckResult(
        ok_floor, float(min(np.min(lateral), np.min(inner)) - floor))

    axis = cone.gain * v
    checks["axis_decay"] = CheckResult(bool(np.all(np.diff(axis) < 0)),
                                       float(np.max(np.diff(axis))))
    checks["positive"] = CheckResult(bool(np.all(height > 0)),
                                     float(np.min(height)))

    passed = all(c.ok for c in checks.values())
    for name, c in checks.items():
        if not c.ok and name != "supersolution":
            violations.append((name, float("nan"), float("nan"), c.worst))
    return BarrierVerification(passed=passed, checks=checks,
                               violations=violations)
