"""Rotationally symmetric model geometries.

A model manifold is described by its dimension ``m`` and a warping profile
``psi`` with ``psi(0) = 0``, ``psi'(0) = 1`` and ``psi > 0`` on ``(0, inf)``.
Every geometric quantity the solvers need (radial drift, angular weight,
sphere areas, radial sectional curvature) reduces to ``psi`` and its first
two derivatives.  Profiles that grow like ``exp(r**alpha)`` overflow double
precision long before the working radii of the solvers, so each profile also
carries ``log_eval`` and the ratios ``psi'/psi`` and ``psi''/psi`` in closed
form; all tail quadrature downstream works on those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ProfileError

__all__ = [
    "ProfileFunction",
    "ModelManifold",
    "profile_catalog",
    "radial_sectional_curvature",
    "laplace_coeffs",
    "sphere_area",
    "angular_distance",
    "unit_sphere_area",
]


@dataclass
class ProfileFunction:
    """Warping profile with analytic derivatives and log-space accessors.

    ``eval``, ``deriv1`` and ``deriv2`` evaluate ``psi``, ``psi'`` and
    ``psi''``; ``log_eval`` returns ``log(psi)`` and stays finite wherever
    ``psi`` itself would overflow.  ``drift_ratio`` is ``psi'/psi`` and
    ``curvature_ratio`` is ``psi''/psi``.  All callables accept scalars or
    ndarrays.
    """

    name: str
    params: dict
    eval: Callable = field(repr=False)
    deriv1: Callable = field(repr=False)
    deriv2: Callable = field(repr=False)
    log_eval: Callable = field(repr=False)
    drift_ratio: Callable = field(repr=False)
    curvature_ratio: Callable = field(repr=False)


@dataclass
class ModelManifold:
    """Dimension plus warping profile; the source of all geometry data."""

    dim: int
    profile: ProfileFunction

    def __post_init__(self):
        if self.dim < 2:
            raise ProfileError(f"manifold dimension must be >= 2, got {self.dim}")

    def log_psi(self, r):
        return self.profile.log_eval(r)

    def drift(self, r):
        """Radial first-order coefficient (m - 1) * psi'/psi."""
        return (self.dim - 1) * self.profile.drift_ratio(r)

    def angular_weight(self, r):
        """Coefficient 1/psi**2 multiplying the angular operator."""
        return np.exp(-2.0 * self.profile.log_eval(r))


def _require_positive(value, name):
    if not (value > 0):
        raise ProfileError(f"parameter {name} must be positive, got {value}")
    return float(value)


def _piecewise(r, r_match, inner, outer):
    """Evaluate inner/outer branches on their own subarrays (no stray NaNs)."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    mask = r < r_match
    if mask.any():
        out[mask] = inner(r[mask])
    if (~mask).any():
        out[~mask] = outer(r[~mask])
    if out.ndim == 0:
        return out[()]
    return out


def _cubic_splice(r_match, value, slope, curv):
    """Coefficients of q(r) = 1 + c1 r + c2 r^2 + c3 r^3 with psi = r*q.

    The cubic is pinned by continuity of psi, psi', psi'' at ``r_match``;
    q(0) = 1 keeps psi'(0) = 1 and psi(0) = 0.
    """
    rm = r_match
    q_v = value / rm
    q_s = (slope - q_v) / rm
    q_c = (curv - 2.0 * q_s) / rm
    mat = np.array(
        [
            [rm, rm**2, rm**3],
            [1.0, 2.0 * rm, 3.0 * rm**2],
            [0.0, 2.0, 6.0 * rm],
        ]
    )
    rhs = np.array([q_v - 1.0, q_s, q_c])
    return np.linalg.solve(mat, rhs)


def _spliced_profile(name, params, r_match, outer_log, outer_d1, outer_d2,
                     outer_drift, outer_curv):
    """Build a profile equal to its asymptotic form beyond ``r_match`` and
    spliced to ``r * cubic`` below it."""
    value = math.exp(outer_log(np.array(r_match))[()])
    slope = outer_d1(np.array(r_match))[()]
    curv = outer_d2(np.array(r_match))[()]
    c1, c2, c3 = _cubic_splice(r_match, value, slope, curv)

    def q(r):
        return 1.0 + r * (c1 + r * (c2 + r * c3))

    def q1(r):
        return c1 + r * (2.0 * c2 + 3.0 * c3 * r)

    def q2(r):
        return 2.0 * c2 + 6.0 * c3 * r

    # class-A sanity: the splice must stay positive below the match radius
    sample = np.geomspace(r_match * 1e-8, r_match, 257)
    if not np.all(q(sample) > 0.0):
        raise ProfileError(
            f"profile {name}: cubic splice not positive on (0, {r_match}]; "
            "choose a different match radius"
        )

    def psi(r):
        return _piecewise(r, r_match, lambda x: x * q(x),
                          lambda x: np.exp(outer_log(x)))

    def d1(r):
        return _piecewise(r, r_match, lambda x: q(x) + x * q1(x), outer_d1)

    def d2(r):
        return _piecewise(r, r_match, lambda x: 2.0 * q1(x) + x * q2(x), outer_d2)

    def log_psi(r):
        return _piecewise(r, r_match,
                          lambda x: np.log(x) + np.log(q(x)), outer_log)

    def drift(r):
        return _piecewise(r, r_match,
                          lambda x: 1.0 / x + q1(x) / q(x), outer_drift)

    def curvr(r):
        return _piecewise(r, r_match,
                          lambda x: (2.0 * q1(x) + x * q2(x)) / (x * q(x)),
                          outer_curv)

    return ProfileFunction(name=name, params=params, eval=psi, deriv1=d1,
                           deriv2=d2, log_eval=log_psi, drift_ratio=drift,
                           curvature_ratio=curvr)


def _euclidean_profile():
    return ProfileFunction(
        name="euclidean",
        params={},
        eval=lambda r: np.asarray(r, dtype=float) + 0.0,
        deriv1=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        deriv2=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        log_eval=lambda r: np.log(r),
        drift_ratio=lambda r: 1.0 / np.asarray(r, dtype=float),
        curvature_ratio=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


def _hyperbolic_profile(alpha):
    a = _require_positive(alpha, "alpha")

    def log_psi(r):
        x = a * np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return x + np.log1p(-np.exp(-2.0 * x)) - np.log(2.0 * a)

    return ProfileFunction(
        name="hyperbolic",
        params={"alpha": a},
        eval=lambda r: np.sinh(a * np.asarray(r, dtype=float)) / a,
        deriv1=lambda r: np.cosh(a * np.asarray(r, dtype=float)),
        deriv2=lambda r: a * np.sinh(a * np.asarray(r, dtype=float)),
        log_eval=log_psi,
        drift_ratio=lambda r: a / np.tanh(a * np.asarray(r, dtype=float)),
        curvature_ratio=lambda r: np.full_like(np.asarray(r, dtype=float), a * a),
    )


def _exp_power_profile(alpha, match_radius):
    a = _require_positive(alpha, "alpha")
    rm = _require_positive(match_radius, "match_radius")

    def outer_log(r):
        return np.asarray(r, dtype=float) ** a

    def outer_drift(r):
        return a * np.asarray(r, dtype=float) ** (a - 1.0)

    def outer_curv(r):
        r = np.asarray(r, dtype=float)
        return a * (a - 1.0) * r ** (a - 2.0) + (a * r ** (a - 1.0)) ** 2

    def outer_d1(r):
        return outer_drift(r) * np.exp(outer_log(r))

    def outer_d2(r):
        return outer_curv(r) * np.exp(outer_log(r))

    return _spliced_profile("exp_power", {"alpha": a, "match_radius": rm}, rm,
                            outer_log, outer_d1, outer_d2, outer_drift,
                            outer_curv)


def _log_power_profile(beta, match_radius):
    b = float(beta)
    if not b > 1.0:
        raise ProfileError(f"parameter beta must exceed 1, got {beta}")
    rm = float(match_radius)
    if not rm > 1.0:
        raise ProfileError(f"match_radius must exceed 1 for log profiles, got {rm}")

    def outer_log(r):
        r = np.asarray(r, dtype=float)
        return np.log(r) + b * np.log(np.log(r))

    def outer_d1(r):
        r = np.asarray(r, dtype=float)
        L = np.log(r)
        return L**b + b * L ** (b - 1.0)

    def outer_d2(r):
        r = np.asarray(r, dtype=float)
        L = np.log(r)
        return (b / r) * (L ** (b - 1.0) + (b - 1.0) * L ** (b - 2.0))

    def outer_drift(r):
        r = np.asarray(r, dtype=float)
        return (1.0 + b / np.log(r)) / r

    def outer_curv(r):
        r = np.asarray(r, dtype=float)
        L = np.log(r)
        return b * (1.0 + (b - 1.0) / L) / (r * r * L)

    return _spliced_profile("log_power", {"beta": b, "match_radius": rm}, rm,
                            outer_log, outer_d1, outer_d2, outer_drift,
                            outer_curv)


_CATALOG = {
    "euclidean": (_euclidean_profile, ()),
    "hyperbolic": (_hyperbolic_profile, ("alpha",)),
    "exp_power": (_exp_power_profile, ("alpha", "match_radius")),
    "log_power": (_log_power_profile, ("beta", "match_radius")),
}

_DEFAULTS = {
    "hyperbolic": {"alpha": 1.0},
    "exp_power": {"match_radius": 1.0},
    "log_power": {"match_radius": math.e},
}


def profile_catalog(name, **params) -> ProfileFunction:
    """Build a named warping profile.

    Parameters
    ----------
    name : str
        One of ``euclidean``, ``hyperbolic`` (param ``alpha``), ``exp_power``
        (``alpha``, ``match_radius``) or ``log_power`` (``beta``,
        ``match_radius``).  Growth profiles equal their asymptotic form at and
        beyond the match radius and are joined to a positive cubic times ``r``
        below it, which keeps ``psi(0) = 0`` and ``psi'(0) = 1``.

    Raises
    ------
    ProfileError
        Unknown name, unexpected parameter, or parameter out of range.
    """
    if name not in _CATALOG:
        raise ProfileError(
            f"unknown profile {name!r}; catalog: {sorted(_CATALOG)}"
        )
    builder, accepted = _CATALOG[name]
    merged = dict(_DEFAULTS.get(name, {}))
    for key, value in params.items():
        if key not in accepted:
            raise ProfileError(
                f"profile {name!r} does not take parameter {key!r}; "
                f"accepted: {list(accepted)}"
            )
        merged[key] = value
    missing = [k for k in accepted if k not in merged]
    if missing:
        raise ProfileError(f"profile {name!r} missing parameters {missing}")
    return builder(**merged)


def radial_sectional_curvature(manifold: ModelManifold, r):
    """Sectional curvature of planes containing the radial direction.

    Equals ``-psi''/psi`` on model manifolds.  Requires ``r > 0``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radial sectional curvature requires r > 0")
    return -manifold.profile.curvature_ratio(r)


def laplace_coeffs(manifold: ModelManifold, r):
    """Radial drift and angular weight of the Laplace-Beltrami operator.

    Returns ``((m-1) psi'/psi, 1/psi**2)`` so the operator reads
    ``u_rr + drift * u_r + angular_weight * (angular Laplacian)``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("laplace_coeffs requires r > 0")
    return manifold.drift(r), manifold.angular_weight(r)


def unit_sphere_area(m: int) -> float:
    """Area of the unit sphere in m-dimensional Euclidean space."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


def sphere_area(manifold: ModelManifold, radius):
    """Area of the geodesic sphere of the given radius."""
    radius = np.asarray(radius, dtype=float)
    if np.any(radius <= 0):
        raise ValueError("sphere_area requires a positive radius")
    m = manifold.dim
    return unit_sphere_area(m) * np.exp((m - 1) * manifold.log_psi(radius))


def angular_distance(theta, theta0, m: int = 2):
    """Geodesic distance between directions.

    For ``m = 2`` the inputs are angles on the circle (any real values;
    wrapped to the shorter arc).  For ``m = 3`` the inputs are either
    colatitudes in ``[0, pi]`` or ``(colatitude, azimuth)`` pairs; pairs are
    compared with the spherical law of cosines.
    """
    if m == 2:
        d = np.abs(np.asarray(theta, dtype=float) - np.asarray(theta0, dtype=float))
        d = np.mod(d, 2.0 * math.pi)
        return np.minimum(d, 2.0 * math.pi - d)
    if m == 3:
        t1 = np.asarray(theta, dtype=float)
        t2 = np.asarray(theta0, dtype=float)
        if t1.ndim and t1.shape[-1] == 2 or t2.ndim and t2.shape[-1] == 2:
            t1 = np.atleast_2d(t1)
            t2 = np.atleast_2d(t2)
            cosd = (np.cos(t1[..., 0]) * np.cos(t2[..., 0])
                    + np.sin(t1[..., 0]) * np.sin(t2[..., 0])
                    * np.cos(t1[..., 1] - t2[..., 1]))
            return np.arccos(np.clip(cosd, -1.0, 1.0))
        return np.abs(t1 - t2)
    raise ValueError(f"angular_distance implemented for m in (2, 3), got {m}")
