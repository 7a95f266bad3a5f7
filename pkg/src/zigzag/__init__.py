"""Zigzag sampler: simulation, Gaussian reachability, ergodicity diagnostics.

The process lives on R^d x {-1,+1}^d, moving in straight lines with unit
speed per coordinate and flipping one velocity sign at a time at rates tied
to a potential U.  This package simulates it exactly (affine gradients) or
by thinning (general smooth targets), constructs controls proving Gaussian
reachability, and checks Lyapunov drift and stationarity numerically.
"""

from .control import (AdmissibilityReport, ControlSequence, FlipHistory,
                      apply_control, build_reach_control,
                      build_reversal_control, check_admissible,
                      concat_controls, escalate_to_flippable, flippable_set,
                      reverse_control)
from .core import (ExcessRate, Potential, Skeleton, SkeletonEvent, State,
                   Velocity, canonical_rate, flip, flip_seq, log_density,
                   rate_vector, unnormalized_density)
from .diagnostics import (DriftReport, GrowthReport, LyapunovParams,
                          QuadratureSpec, StateFunction, drift_bound,
                          drift_ratio, drift_ratio_terms,
                          drift_ratio_via_generator, drift_scan,
                          generator_apply, growth_probe, log_lyapunov,
                          lyapunov_value, stationarity_residual)
from .estimate import BatchMeansResult, batch_means, ergodic_average
from .expressions import ExpressionError, parse_observable
from .simulate import (EventDraw, SimConfig, ThinningBoundError,
                       first_arrival_affine, integrate_along,
                       next_event_exact, next_event_thinning, pointwise,
                       position_at, simulate_skeleton, skeleton_from_csv,
                       skeleton_to_csv)
from .targets import (GaussianTarget, MaxTarget, PowerLawTarget, RidgeTarget,
                      gaussian_rate_along, target_from_config)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport", "BatchMeansResult", "ControlSequence",
    "DriftReport", "EventDraw", "ExcessRate", "ExpressionError",
    "FlipHistory", "GaussianTarget", "GrowthReport", "LyapunovParams",
    "MaxTarget", "Potential", "PowerLawTarget", "QuadratureSpec",
    "RidgeTarget", "SimConfig", "Skeleton", "SkeletonEvent", "State",
    "StateFunction", "ThinningBoundError", "Velocity", "apply_control",
    "batch_means", "build_reach_control", "build_reversal_control",
    "canonical_rate", "check_admissible", "concat_controls", "drift_bound",
    "drift_ratio", "drift_ratio_terms", "drift_ratio_via_generator",
    "drift_scan", "ergodic_average", "escalate_to_flippable",
    "first_arrival_affine", "flip", "flip_seq", "flippable_set",
    "gaussian_rate_along", "generator_apply", "growth_probe",
    "integrate_along", "log_density", "log_lyapunov", "lyapunov_value",
    "next_event_exact", "next_event_thinning", "parse_observable",
    "pointwise", "position_at", "rate_vector", "reverse_control",
    "simulate_skeleton", "skeleton_from_csv", "skeleton_to_csv",
    "stationarity_residual", "target_from_config", "unnormalized_density",
    "__version__",
]
