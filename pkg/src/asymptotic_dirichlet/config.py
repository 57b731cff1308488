"""Run configurations: a flat key-value format with named expressions.

Configs are TOML with four flat sections (``manifold``, ``coefficients``,
``boundary``, ``numerics``) plus ``output``.  Expression-valued fields
name a catalog family and carry their parameters as ``<field>_<param>``
keys, e.g.::

    [coefficients]
    a = "psi_squared"
    a_scale = 1.0
    a_floor = 1.0

Parsing validates everything and reports *all* problems at once;
``serialize_config`` writes a canonical form (fixed section order,
sorted keys, full-precision floats) that round-trips through the parser
unchanged.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .expressions import (ExpressionSpec, build_boundary_t, build_field,
                          build_angular, build_radial, validate_spec)
from .geometry import ModelManifold, profile_catalog
from .hypotheses import CoefficientBundle

__all__ = ["RunConfig", "parse_config", "serialize_config", "load_config"]

_PROFILE_PARAMS = {
    "euclidean": set(),
    "hyperbolic": {"alpha"},
    "exp_power": {"alpha", "match_radius"},
    "log_power": {"beta", "match_radius"},
}

_EXPRESSION_FIELDS = {
    "coefficients": (("a", "radial"), ("c", "radial"), ("f", "radial"),
                     ("abar", "radial")),
    "boundary": (("gamma", "angular"), ("gamma_t", "boundary_t"),
                 ("u0", "radial")),
}

_SCALARS = {
    "coefficients": {"r0": float, "c0": float},
    "numerics": {"dr": float, "ntheta": int, "dt": float, "t_final": float,
                 "tol": float, "theta_s": float, "nr": int},
    "output": {"directory": str},
}

_SECTION_ORDER = ("manifold", "coefficients", "boundary", "numerics",
                  "output")

_DEFAULTS = {
    ("coefficients", "r0"): 1.0,
    ("coefficients", "c0"): 1.0,
    ("numerics", "ntheta"): 64,
    ("numerics", "dr"): 0.125,
    ("numerics", "dt"): 0.01,
    ("numerics", "t_final"): 1.0,
    ("numerics", "tol"): 1e-6,
    ("numerics", "theta_s"): 0.5,
    ("output", "directory"): "out",
}


@dataclass
class RunConfig:
    profile: str
    profile_params: dict
    dim: int
    expressions: dict          # field name -> ExpressionSpec
    r0: float
    c0: float
    dr: float
    ntheta: int
    schedule: list
    dt: float
    t_final: float
    tol: float
    theta_s: float
    output_dir: str

    def build_manifold(self) -> ModelManifold:
        return ModelManifold(self.dim,
                             profile_catalog(self.profile,
                                             **self.profile_params))

    def build_bundle(self, manifold: Optional[ModelManifold] = None
                     ) -> CoefficientBundle:
        manifold = manifold or self.build_manifold()
        a = build_field(self.expressions["a"], manifold)
        c = build_field(self.expressions["c"], manifold)
        f = build_field(self.expressions["f"], manifold)
        abar = abar_log = None
        if "abar" in self.expressions:
            abar, abar_log = build_radial(self.expressions["abar"], manifold)
        return CoefficientBundle(a=a, c=c, f=f, a_minorant=abar,
                                 a_minorant_log=abar_log, r0=self.r0,
                                 c0=self.c0)

    def build_gamma(self, manifold=None):
        if "gamma" not in self.expressions:
            raise ConfigError(["boundary data 'gamma' missing from the "
                               "configuration"])
        return build_angular(self.expressions["gamma"],
                             manifold or self.build_manifold())

    def build_gamma_t(self, manifold=None):
        if "gamma_t" not in self.expressions:
            raise ConfigError(["time-dependent data 'gamma_t' missing from "
                               "the configuration"])
        return build_boundary_t(self.expressions["gamma_t"],
                                manifold or self.build_manifold())

    def build_u0(self, manifold=None):
        if "u0" not in self.expressions:
            raise ConfigError(["initial datum 'u0' missing from the "
                               "configuration"])
        return build_field(self.expressions["u0"],
                           manifold or self.build_manifold())


def _collect_expression(section_name, data, field_name, kind, errors,
                        taken):
    """Collect one expression field; ``taken`` holds keys already owned by
    longer field names (``gamma_t_k`` belongs to ``gamma_t``, not
    ``gamma``)."""
    if field_name not in data:
        return None, set()
    name = data[field_name]
    used = {field_name}
    if not isinstance(name, str):
        errors.append(f"[{section_name}] {field_name} must name an "
                      "expression family (string)")
        return None, used
    prefix = field_name + "_"
    params = {}
    for key, value in data.items():
        if key.startswith(prefix) and key not in taken:
            used.add(key)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                errors.append(f"[{section_name}] {key} must be numeric")
                continue
            params[key[len(prefix):]] = float(value)
    spec = ExpressionSpec(name=name, params=params)
    for problem in validate_spec(spec, kind):
        errors.append(f"[{section_name}] {field_name}: {problem}")
    return spec, used


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration; raises ConfigError with
    the complete list of problems."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"not valid key-value syntax: {exc}"]) from exc

    errors = []
    for section in data:
        if section not in _SECTION_ORDER:
            errors.append(f"unknown section [{section}]; sections: "
                          f"{list(_SECTION_ORDER)}")

    manifold = data.get("manifold", {})
    profile = manifold.get("profile")
    dim = manifold.get("dim", 2)
    profile_params = {}
    if profile is None:
        errors.append("[manifold] profile is required")
    elif profile not in _PROFILE_PARAMS:
        errors.append(f"[manifold] unknown profile {profile!r}; catalog: "
                      f"{sorted(_PROFILE_PARAMS)}")
    else:
        allowed = _PROFILE_PARAMS[profile]
        for key, value in manifold.items():
            if key in ("profile", "dim"):
                continue
            if key not in allowed:
                errors.append(f"[manifold] profile {profile!r} does not "
                              f"take {key!r}; accepted: {sorted(allowed)}")
            else:
                profile_params[key] = float(value)
    if not isinstance(dim, int) or dim < 2:
        errors.append("[manifold] dim must be an integer >= 2")

    expressions = {}
    for section_name, fields in _EXPRESSION_FIELDS.items():
        section = data.get(section_name, {})
        used = set()
        # longest field names first so shared prefixes resolve correctly
        for field_name, kind in sorted(fields, key=lambda f: -len(f[0])):
            spec, keys = _collect_expression(section_name, section,
                                             field_name, kind, errors, used)
            used |= keys
            if spec is not None:
                expressions[field_name] = spec
        scalar_keys = _SCALARS.get(section_name, {})
        for key in section:
            if key in used or key in scalar_keys:
                continue
            known = [f for f, _ in fields]
            errors.append(f"[{section_name}] unknown key {key!r}; "
                          f"expression fields: {known}")
    for required in ("a", "c", "f"):
        if required not in expressions:
            errors.append(f"[coefficients] {required} is required")

    scalars = {}
    for section_name, spec in _SCALARS.items():
        section = data.get(section_name, {})
        for key, typ in spec.items():
            if key in section:
                value = section[key]
                if typ is float and isinstance(value, (int, float)) \
                        and not isinstance(value, bool):
                    scalars[(section_name, key)] = float(value)
                elif typ is int and isinstance(value, int):
                    scalars[(section_name, key)] = int(value)
                elif typ is str and isinstance(value, str):
                    scalars[(section_name, key)] = value
                else:
                    errors.append(f"[{section_name}] {key} must be of type "
                                  f"{typ.__name__}")
    numerics = data.get("numerics", {})
    for key in numerics:
        if key not in _SCALARS["numerics"] and key != "schedule":
            errors.append(f"[numerics] unknown key {key!r}")
    schedule = numerics.get("schedule", [8.0, 16.0, 32.0])
    if not isinstance(schedule, list) or not schedule or any(
            isinstance(x, bool) or not isinstance(x, (int, float))
            for x in schedule):
        errors.append("[numerics] schedule must be a nonempty array of "
                      "radii")
        schedule = [8.0]
    schedule = [float(x) for x in schedule]

    def scalar(section, key):
        return scalars.get((section, key), _DEFAULTS.get((section, key)))

    theta_s = scalar("numerics", "theta_s")
    if not 0.5 <= theta_s <= 1.0:
        errors.append("[numerics] theta_s must lie in [0.5, 1]")
    for key in ("dr", "dt", "t_final", "tol"):
        if scalar("numerics", key) <= 0:
            errors.append(f"[numerics] {key} must be positive")
    if scalar("coefficients", "r0") <= 0 or scalar("coefficients", "c0") <= 0:
        errors.append("[coefficients] r0 and c0 must be positive")
    ntheta = scalar("numerics", "ntheta")
    if ntheta % 2 or ntheta < 4:
        errors.append("[numerics] ntheta must be even and at least 4")

    if errors:
        raise ConfigError(errors)

    return RunConfig(
        profile=profile, profile_params=profile_params, dim=dim,
        expressions=expressions,
        r0=scalar("coefficients", "r0"), c0=scalar("coefficients", "c0"),
        dr=scalar("numerics", "dr"), ntheta=ntheta,
        schedule=sorted(schedule), dt=scalar("numerics", "dt"),
        t_final=scalar("numerics", "t_final"),
        tol=scalar("numerics", "tol"), theta_s=theta_s,
        output_dir=scalar("output", "directory"))


def _format_value(value):
    if isinstance(value, str):
        return '"' + value + '"'
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return f"{value:.1f}"
        return f"{value:.17g}"
    if isinstance(value, list):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form: fixed section order, sorted keys."""
    sections = {name: {} for name in _SECTION_ORDER}
    sections["manifold"]["profile"] = cfg.profile
    sections["manifold"]["dim"] = cfg.dim
    for key, value in cfg.profile_params.items():
        sections["manifold"][key] = value
    for field_name, spec in cfg.expressions.items():
        target = "coefficients" if field_name in ("a", "c", "f", "abar") \
            else "boundary"
        sections[target][field_name] = spec.name
        for key, value in spec.params.items():
            sections[target][f"{field_name}_{key}"] = value
    sections["coefficients"]["r0"] = cfg.r0
    sections["coefficients"]["c0"] = cfg.c0
    sections["numerics"].update({
        "dr": cfg.dr, "ntheta": cfg.ntheta, "schedule": list(cfg.schedule),
        "dt": cfg.dt, "t_final": cfg.t_final, "tol": cfg.tol,
        "theta_s": cfg.theta_s,
    })
    sections["output"]["directory"] = cfg.output_dir

    lines = []
    for name in _SECTION_ORDER:
        body = sections[name]
        if not body:
            continue
        lines.append(f"[{name}]")
        for key in sorted(body):
            lines.append(f"{key} = {_format_value(body[key])}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())
