"""Named closed-form families for coefficients and boundary data.

Run configurations pick coefficients from this catalog instead of
embedding a general expression parser: every entry is a named family
with numeric parameters, so configs stay auditable and reproducible.
Radial families also expose their logarithm where meaningful, which the
hypothesis checks prefer for profiles that overflow double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import ModelManifold, angular_distance

__all__ = ["ExpressionSpec", "CATALOG", "catalog_names", "build_radial",
           "build_field", "build_angular", "build_boundary_t",
           "validate_spec"]


@dataclass(frozen=True)
class ExpressionSpec:
    name: str
    params: dict = field(default_factory=dict)


# name -> (required params, defaults, kinds)
CATALOG = {
    "constant": ((), {"value": 0.0},
                 {"radial", "angular", "boundary_t"}),
    "power": (("exponent",), {"coeff": 1.0, "floor": 0.0}, {"radial"}),
    "exponential": (("rate",), {"coeff": 1.0, "floor": 0.0}, {"radial"}),
    "power_exp": (("exponent", "rate"), {"coeff": 1.0, "floor": 0.0},
                  {"radial"}),
    "psi_squared": ((), {"scale": 1.0, "floor": 1.0}, {"radial"}),
    "cosine_mode": (("k",), {"amplitude": 1.0, "phase": 0.0},
                    {"angular", "boundary_t"}),
    "gaussian_bump": (("center", "width"), {"amplitude": 1.0},
                      {"angular"}),
    "cosine_ramp": (("k",), {"amplitude": 1.0, "ramp": 1.0},
                    {"boundary_t"}),
}


def catalog_names(kind: Optional[str] = None):
    if kind is None:
        return sorted(CATALOG)
    return sorted(n for n, (_, _, kinds) in CATALOG.items() if kind in kinds)


def validate_spec(spec: ExpressionSpec, kind: str):
    """Return a list of problems (empty when the spec is usable)."""
    problems = []
    entry = CATALOG.get(spec.name)
    if entry is None:
        problems.append(
            f"unknown expression {spec.name!r}; catalog: {catalog_names()}")
        return problems
    required, defaults, kinds = entry
    if kind not in kinds:
        problems.append(
            f"expression {spec.name!r} cannot be used here; families for "
            f"this slot: {catalog_names(kind)}")
    for key in required:
        if key not in spec.params:
            problems.append(f"expression {spec.name!r} needs parameter "
                            f"{key!r}")
    for key in spec.params:
        if key not in required and key not in defaults:
            problems.append(f"expression {spec.name!r} does not take "
                            f"parameter {key!r}")
    return problems


def _merged(spec: ExpressionSpec):
    required, defaults, _ = CATALOG[spec.name]
    params = dict(defaults)
    params.update(spec.params)
    return params


def build_radial(spec: ExpressionSpec, manifold: Optional[ModelManifold]):
    """Radial callable plus its log (or None when signs allow zero)."""
    p = _merged(spec)
    name = spec.name
    if name == "constant":
        v = float(p["value"])

        def fn(r):
            return np.full_like(np.asarray(r, dtype=float), v)

        log_fn = None
        if v > 0:
            def log_fn(r):
                return np.full_like(np.asarray(r, dtype=float), math.log(v))
        return fn, log_fn
    if name == "power":
        coeff, expo, floor = p["coeff"], p["exponent"], p["floor"]

        def fn(r):
            rr = np.maximum(np.asarray(r, dtype=float), floor)
            return coeff * rr**expo

        log_fn = None
        if coeff > 0 and floor > 0:
            def log_fn(r):
                rr = np.maximum(np.asarray(r, dtype=float), floor)
                return math.log(coeff) + expo * np.log(rr)
        return fn, log_fn
    if name == "exponential":
        coeff, rate, floor = p["coeff"], p["rate"], p["floor"]

        def fn(r):
            rr = np.maximum(np.asarray(r, dtype=float), floor)
            with np.errstate(over="ignore"):
                return coeff * np.exp(rate * rr)

        log_fn = None
        if coeff > 0:
            def log_fn(r):
                rr = np.maximum(np.asarray(r, dtype=float), floor)
                return math.log(coeff) + rate * rr
        return fn, log_fn
    if name == "power_exp":
        coeff, expo, rate, floor = (p["coeff"], p["exponent"], p["rate"],
                                    p["floor"])

        def fn(r):
            rr = np.maximum(np.asarray(r, dtype=float), max(floor, 1e-300))
            with np.errstate(over="ignore"):
                return coeff * rr**expo * np.exp(rate * rr)

        log_fn = None
        if coeff > 0 and floor > 0:
            def log_fn(r):
                rr = np.maximum(np.asarray(r, dtype=float), floor)
                return math.log(coeff) + expo * np.log(rr) + rate * rr
        return fn, log_fn
    if name == "psi_squared":
        if manifold is None:
            raise ValueError("psi_squared needs the manifold")
        scale, floor = p["scale"], p["floor"]
        log_psi = manifold.profile.log_eval

        def log_fn(r):
            rr = np.maximum(np.asarray(r, dtype=float), floor)
            return math.log(scale) + 2.0 * log_psi(rr)

        def fn(r):
            with np.errstate(over="ignore"):
                return np.exp(log_fn(r))

        return fn, log_fn
    raise ValueError(f"expression {name!r} is not radial")


def build_field(spec: ExpressionSpec, manifold):
    """Callable of (r, theta) built from a radial or angular family."""
    if spec.name in ("cosine_mode", "gaussian_bump"):
        ang = build_angular(spec, manifold)

        def fn(r, theta):
            return ang(np.asarray(theta, dtype=float)) \
                + 0.0 * np.asarray(r, dtype=float)

        return fn
    radial, _ = build_radial(spec, manifold)

    def fn(r, theta):
        return radial(np.asarray(r, dtype=float)) \
            + 0.0 * np.asarray(theta, dtype=float)

    return fn


def build_angular(spec: ExpressionSpec, manifold):
    p = _merged(spec)
    name = spec.name
    if name == "constant":
        v = float(p["value"])
        return lambda theta: np.full_like(np.asarray(theta, dtype=float), v)
    if name == "cosine_mode":
        k, amp, phase = int(p["k"]), p["amplitude"], p["phase"]
        return lambda theta: amp * np.cos(
            k * np.asarray(theta, dtype=float) - phase)
    if name == "gaussian_bump":
        center, width, amp = p["center"], p["width"], p["amplitude"]

        def fn(theta):
            d = angular_distance(np.asarray(theta, dtype=float), center)
            return amp * np.exp(-((d / width) ** 2))

        return fn
    raise ValueError(f"expression {name!r} is not angular data")


def build_boundary_t(spec: ExpressionSpec, manifold):
    p = _merged(spec)
    name = spec.name
    if name == "constant":
        v = float(p["value"])
        return lambda theta, t: np.full_like(np.asarray(theta, dtype=float),
                                             v)
    if name == "cosine_mode":
        k, amp, phase = int(p["k"]), p["amplitude"], p["phase"]
        return lambda theta, t: amp * np.cos(
            k * np.asarray(theta, dtype=float) - phase) + 0.0 * t
    if name == "cosine_ramp":
        k, amp, ramp = int(p["k"]), p["amplitude"], p["ramp"]

        def fn(theta, t):
            return amp * np.cos(k * np.asarray(theta, dtype=float)) \
                * (min(float(t), ramp) / ramp)

        return fn
    raise ValueError(f"expression {name!r} is not time-dependent data")
