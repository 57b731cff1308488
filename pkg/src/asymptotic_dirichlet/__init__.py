"""Solvers and checks for Dirichlet problems at infinity on model manifolds."""

__version__ = "0.1.0"

from .barriers import (ConeBarrier, RadialBarrier, build_cone_barrier,
                       build_radial_barrier, build_weight,
                       compute_limit_offset, verify_cone_barrier,
                       verify_radial_barrier)
from .elliptic import (DiscreteField, ExhaustionReport, PolarGrid, assemble,
                       assemble_operator, attainment_profile,
                       exhaustion_solve, fourier_oracle, mmatrix_report,
                       oracle_compare, solve_ball, uniqueness_probe)
from .geometry import (ModelManifold, ProfileFunction, angular_distance,
                       laplace_coeffs, profile_catalog,
                       radial_sectional_curvature, sphere_area,
                       unit_sphere_area)
from .hypotheses import (CoefficientBundle, HypothesisReport, JointVerdict,
                         WeightCheck, check_admissibility, check_weight_bound,
                         double_integral, exp_tail_criterion,
                         green_function_bound, joint_feasibility,
                         tail_integral)
from .parabolic import (CauchyReport, Cutoff, SpaceTimeField, TimeStepper,
                        attainment_profile_t, blend_initial, hull_probe,
                        solve_cauchy, solve_cauchy_exhaustion,
                        step_theta_scheme, uniqueness_probe_t)
from .quadrature import QuadratureResult

__all__ = [
    "__version__",
    # geometry
    "ModelManifold", "ProfileFunction", "profile_catalog",
    "radial_sectional_curvature", "laplace_coeffs", "sphere_area",
    "angular_distance", "unit_sphere_area",
    # hypotheses
    "CoefficientBundle", "HypothesisReport", "JointVerdict", "WeightCheck",
    "QuadratureResult", "tail_integral", "double_integral",
    "check_admissibility", "check_weight_bound", "joint_feasibility",
    "exp_tail_criterion", "green_function_bound",
    # barriers
    "RadialBarrier", "ConeBarrier", "build_weight", "compute_limit_offset",
    "build_radial_barrier", "verify_radial_barrier", "build_cone_barrier",
    "verify_cone_barrier",
    # elliptic
    "PolarGrid", "DiscreteField", "ExhaustionReport", "assemble",
    "assemble_operator", "solve_ball", "exhaustion_solve",
    "attainment_profile", "fourier_oracle", "oracle_compare",
    "uniqueness_probe", "mmatrix_report",
    # parabolic
    "Cutoff", "SpaceTimeField", "CauchyReport", "TimeStepper",
    "blend_initial", "step_theta_scheme", "solve_cauchy",
    "solve_cauchy_exhaustion", "attainment_profile_t", "uniqueness_probe_t",
    "hull_probe",
]
