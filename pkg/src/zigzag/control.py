"""Deterministic switching controls and constructive reachability.

A control sequence prescribes a zigzag trajectory by hand: travel, flip a
named component, travel again.  A control is admissible when the canonical
rate of the flipped component is strictly positive at every switch instant
(evaluated with the pre-switch velocity), i.e. when the prescribed path has
positive probability density under the process.

For Gaussian targets (grad U = Ax + b) admissible controls between ANY two
states can be constructed explicitly:

* escalate_to_flippable flips, in rounds, every component whose rate grows
  linearly along the current ray; each round strictly increases the
  quadratic form theta.A theta, so at most 2^d rounds reach a velocity whose
  components all qualify.
* build_reversal_control moves from (x, eta) to (x_target, -eta) for such a
  velocity: travel far out along eta, then flip components one at a time in
  the order of their required displacements; the alternating travel times
  telescope so the endpoint is hit exactly.
* build_reach_control composes both with a velocity bridge and a
  time-reversed escalation from the target side.

"Large enough" travel times are found by doubling from T_init, and the
instantaneous multi-flips of the theory become small positive gaps found by
halving, so every returned control is finite, explicit and re-verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ExcessRate, Potential, State, Velocity, flip_seq
from .targets import GaussianTarget

__all__ = [
    "ControlSequence",
    "AdmissibilityReport",
    "FlipHistory",
    "apply_control",
    "check_admissible",
    "reverse_control",
    "concat_controls",
    "flippable_set",
    "escalate_to_flippable",
    "build_reversal_control",
    "build_reach_control",
]

_DOUBLING_CAP = 40
_HALVING_CAP = 60


@dataclass(frozen=True)
class ControlSequence:
    """Durations t_0..t_m and 1-based flip indices i_1..i_m.

    The trajectory travels t_0, flips component i_1, travels t_1, and so on,
    ending with a final travel of t_m.  An empty index tuple (a single
    duration) is straight-line motion.
    """

    times: tuple
    indices: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        indices = tuple(int(i) for i in self.indices)
        if len(times) != len(indices) + 1:
            raise ValueError(
                f"need len(times) == len(indices) + 1, got {len(times)} and {len(indices)}")
        if not all(np.isfinite(t) and t > 0 for t in times):
            raise ValueError(f"durations must be positive and finite, got {times}")
        if any(i < 1 for i in indices):
            raise ValueError(f"component indices are 1-based, got {indices}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "indices", indices)

    @property
    def n_switches(self) -> int:
        return len(self.indices)

    @property
    def total_time(self) -> float:
        return float(sum(self.times))

    def to_json_dict(self) -> dict:
        return {"times": list(self.times), "indices": list(self.indices)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "ControlSequence":
        unknown = set(data) - {"times", "indices"}
        if unknown:
            raise ValueError(f"unknown control keys: {sorted(unknown)}")
        if "times" not in data or "indices" not in data:
            raise ValueError('control JSON requires "times" and "indices"')
        return cls(tuple(data["times"]), tuple(data["indices"]))


@dataclass(frozen=True)
class AdmissibilityReport:
    """Switch-by-switch canonical rates of a control; admissible iff all > 0."""

    admissible: bool
    min_rate: float
    switch_rates: tuple


@dataclass(frozen=True)
class FlipHistory:
    """Escalation transcript: flipped index sets and theta.A theta after each round."""

    steps: tuple
    quad_forms: tuple


def _velocity_table(theta: Velocity, indices: Sequence[int]) -> np.ndarray:
    """Velocities before the 1st switch, ..., after the last (m+1 rows)."""
    rows = np.empty((len(indices) + 1, theta.d))
    cur = theta.signs.copy()
    rows[0] = cur
    for j, i in enumerate(indices, start=1):
        if not 1 <= i <= theta.d:
            raise IndexError(f"component index {i} out of range 1..{theta.d}")
        cur[i - 1] = -cur[i - 1]
        rows[j] = cur
    return rows


def apply_control(s: State, u: ControlSequence) -> State:
    """Deterministic endpoint of the control started at s.

    The endpoint is the telescoping sum x + sum_k t_k theta^(k); velocity
    components are exactly +-1 so every term is exact, and math.fsum keeps
    the total correctly rounded even when individual travel times are huge.
    """
    vel = _velocity_table(s.theta, u.indices)
    signed = np.asarray(u.times)[:, None] * vel
    x_end = np.array([math.fsum([s.x[c], *signed[:, c]]) for c in range(s.d)])
    return State(x_end, Velocity(vel[-1]))


def check_admissible(pot: Potential, ex: Optional[ExcessRate], s: State,
                     u: ControlSequence) -> AdmissibilityReport:
    """Evaluate the switching rate at every switch instant of the control.

    Rates use the pre-switch velocity.  An empty control is vacuously
    admissible with min_rate = +inf.
    """
    m = u.n_switches
    if m == 0:
        return AdmissibilityReport(True, math.inf, ())
    vel = _velocity_table(s.theta, u.indices)
    signed = np.asarray(u.times)[:, None] * vel
    # switch j sits at x + sum_{k<j} t_k theta^(k); rates only need ~1e-9
    # accuracy (they are bounded away from zero by construction), cumsum is fine
    prefix = s.x[None, :] + np.cumsum(signed, axis=0)
    rates = []
    for j in range(1, m + 1):
        xj = prefix[j - 1]
        theta_pre = vel[j - 1]
        i = u.indices[j - 1]
        grad = np.asarray(pot.gradient(xj), dtype=float)
        lam = max(theta_pre[i - 1] * grad[i - 1], 0.0)
        if ex is not None:
            lam += float(ex.values(xj, theta_pre)[i - 1])
        rates.append(float(lam))
    rates = tuple(rates)
    min_rate = min(rates)
    return AdmissibilityReport(bool(min_rate > 0.0), min_rate, rates)


def reverse_control(u: ControlSequence) -> ControlSequence:
    """Reverse the durations and indices.

    For canonical rates, if u is admissible from (x, theta) and ends at
    (x', theta'), the reversed control is admissible from (x', -theta') and
    ends at (x, -theta): the pre-switch rate of the reversed pass equals the
    pre-switch rate of the forward pass at the same point.
    """
    return ControlSequence(u.times[::-1], u.indices[::-1])


def concat_controls(u: ControlSequence, v: ControlSequence) -> ControlSequence:
    """Run u, then v: the boundary travel times merge into one duration."""
    times = u.times[:-1] + (u.times[-1] + v.times[0],) + v.times[1:]
    return ControlSequence(times, u.indices + v.indices)


def _concat_all(legs) -> ControlSequence:
    out = legs[0]
    for leg in legs[1:]:
        out = concat_controls(out, leg)
    return out


def _validate_spd(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise ValueError("matrix must be positive definite") from None
    return 0.5 * (A + A.T)


def flippable_set(A, theta: Velocity) -> tuple:
    """Components i with theta_i (A theta)_i > 0, as a sorted 1-based tuple.

    These are the components whose canonical rate grows linearly along the
    ray x + t theta for a Gaussian target with precision A, hence the ones a
    far-enough travel makes switchable.
    """
    A = _validate_spd(A)
    th = theta.as_array()
    if A.shape[0] != theta.d:
        raise ValueError(f"matrix is {A.shape[0]}-D, velocity is {theta.d}-D")
    products = th * (A @ th)
    return tuple(int(i) for i in np.nonzero(products > 0)[0] + 1)


def escalate_to_flippable(A, theta: Velocity):
    """Flip rounds of linearly-growing components until all d qualify.

    Writing A as a Gram matrix of independent vectors, flipping the whole
    qualifying set strictly increases theta.A theta, so the walk cannot
    revisit a velocity and terminates within 2^d rounds.  Returns the final
    velocity and the transcript (flip sets, quadratic forms).
    """
    A = _validate_spd(A)
    th = theta.as_array().copy()
    d = theta.d
    if A.shape[0] != d:
        raise ValueError(f"matrix is {A.shape[0]}-D, velocity is {theta.d}-D")
    steps = []
    quad_forms = [float(th @ A @ th)]
    for _ in range(2 ** d):
        products = th * (A @ th)
        qualifying = np.nonzero(products > 0)[0]
        if qualifying.size == d:
            return Velocity(th), FlipHistory(tuple(steps), tuple(quad_forms))
        if qualifying.size == 0:
            raise RuntimeError(
                "no component qualifies; impossible for a positive definite matrix")
        th[qualifying] = -th[qualifying]
        steps.append(tuple(int(i) for i in qualifying + 1))
        quad_forms.append(float(th @ A @ th))
    raise RuntimeError("escalation exceeded 2^d rounds; this is a logic error")


def _reversal_leg(pot: GaussianTarget, x: np.ndarray, eta: Velocity,
                  x_target: np.ndarray, T_init: float) -> ControlSequence:
    """One out-and-back construction leg; requires strictly distinct offsets."""
    eta_arr = eta.as_array()
    d_vec = (np.asarray(x_target, float) - np.asarray(x, float)) / eta_arr
    order = np.argsort(d_vec, kind="stable")
    ds = d_vec[order]
    if np.any(np.diff(ds) <= 0):
        raise ValueError("signed offsets must be strictly distinct for a single leg")
    t_mid = np.diff(ds) / 2.0
    span = (ds[0] + ds[-1]) / 2.0
    t_first = max(span, 0.0)
    t_last = max(-span, 0.0)
    indices = tuple(int(i) for i in order + 1)
    start = State(x, eta)
    for k in range(_DOUBLING_CAP + 1):
        t = T_init * (2.0 ** k)
        u = ControlSequence((t + t_first, *t_mid, t_last + t), indices)
        if check_admissible(pot, None, start, u).admissible:
            return u
    raise RuntimeError(
        f"no admissible travel time up to 2^{_DOUBLING_CAP} * T_init; "
        "the velocity is not asymptotically flippable (logic error)")


def _pseudo_leg(pot: GaussianTarget, s: State, flip_set: Sequence[int],
                T_init: float) -> ControlSequence:
    """Travel far, then flip a set of linearly-growing components back to back.

    At gap zero all switches would share one position where each rate is
    positive for large t; positivity is open, so halving the gap from 1.0
    finds an admissible strictly-positive spacing.
    """
    indices = tuple(sorted(int(i) for i in flip_set))
    m = len(indices)
    for k in range(_DOUBLING_CAP + 1):
        t = T_init * (2.0 ** k)
        eps = 1.0
        for _ in range(_HALVING_CAP + 1):
            u = ControlSequence((t,) + (eps,) * m, indices)
            if check_admissible(pot, None, s, u).admissible:
                return u
            eps /= 2.0
    raise RuntimeError(
        "no admissible (travel, gap) pair within the doubling/halving caps; "
        "the flip set is not asymptotically flippable at this velocity")


def build_reversal_control(A, b, x, eta: Velocity, x_target,
                           T_init: float = 1.0) -> ControlSequence:
    """Admissible control from (x, eta) to (x_target, -eta).

    Requires every component of eta to be asymptotically flippable
    (flippable_set(A, eta) is all of 1..d).  Components are flipped in
    increasing order of their signed offsets d_i = (x_target_i - x_i)/eta_i;
    the travel times between flips are half the consecutive offset gaps, so
    the endpoint telescopes onto x_target exactly.  When offsets coincide
    the move is split over two intermediate waypoints chosen so that all
    three legs have strictly distinct offsets (each leg flips every
    component once, and only an odd number of legs restores -eta).
    """
    A = _validate_spd(A)
    d = eta.d
    if b is None:
        b = np.zeros(d)
    x = np.asarray(x, dtype=float)
    x_target = np.asarray(x_target, dtype=float)
    if x.shape != (d,) or x_target.shape != (d,) or A.shape[0] != d:
        raise ValueError("dimension mismatch between matrix, endpoints and velocity")
    if flippable_set(A, eta) != tuple(range(1, d + 1)):
        raise ValueError(
            "every component of eta must be asymptotically flippable; "
            "run escalate_to_flippable first")
    pot = GaussianTarget(A, b)
    eta_arr = eta.as_array()
    d_vec = (x_target - x) / eta_arr
    ds = np.sort(d_vec)
    if d == 1 or np.all(np.diff(ds) > 0):
        control = _reversal_leg(pot, x, eta, x_target, T_init)
    else:
        ladder = np.arange(1, d + 1, dtype=float)
        delta = 1.0
        for _ in range(_HALVING_CAP + 1):
            leg3 = np.sort(d_vec + delta * ladder)
            if np.all(np.diff(leg3) > 0):
                break
            delta /= 2.0
        else:
            raise RuntimeError("could not separate coincident offsets (logic error)")
        y = x + eta_arr * delta * ladder
        y2 = y - eta_arr * (2.0 * delta) * ladder
        minus_eta = Velocity(-eta_arr)
        legs = [
            _reversal_leg(pot, x, eta, y, T_init),
            _reversal_leg(pot, y, minus_eta, y2, T_init),
            _reversal_leg(pot, y2, eta, x_target, T_init),
        ]
        control = _concat_all(legs)
    end = apply_control(State(x, eta), control)
    gap = float(np.max(np.abs(end.x - x_target)))
    if gap > 1e-8 or end.theta != Velocity(-eta_arr):
        raise RuntimeError(f"reversal construction missed its endpoint by {gap:.3g}")
    report = check_admissible(pot, None, State(x, eta), control)
    if not report.admissible:
        raise RuntimeError("reversal construction lost admissibility (logic error)")
    return control


def build_reach_control(A, b, s: State, target: State,
                        T_init: float = 1.0) -> ControlSequence:
    """Admissible control from s to target for the Gaussian with precision A.

    Composition: escalate the source velocity to a fully flippable eta;
    escalate -target.theta the same way on the target side (to be traversed
    backwards); bridge eta to the target-side escalated velocity with one
    far-travel multi-flip; connect the positions with a reversal leg; append
    the time-reversed target-side escalation.  The result is re-verified
    (endpoint within 1e-8, strictly positive switch rates) before returning.
    """
    A = _validate_spd(A)
    d = s.d
    if target.d != d or A.shape[0] != d:
        raise ValueError("dimension mismatch between matrix and endpoint states")
    if b is None:
        b = np.zeros(d)
    pot = GaussianTarget(A, b)

    legs = []
    cur = s
    eta_src, _ = escalate_to_flippable(A, s.theta)
    for flip_set in _escalation_steps(A, s.theta):
        leg = _pseudo_leg(pot, cur, flip_set, T_init)
        legs.append(leg)
        cur = apply_control(cur, leg)

    rev_start = State(target.x, Velocity(-target.theta.as_array()))
    eta_tgt, _ = escalate_to_flippable(A, rev_start.theta)
    rev_legs = []
    rcur = rev_start
    for flip_set in _escalation_steps(A, rev_start.theta):
        leg = _pseudo_leg(pot, rcur, flip_set, T_init)
        rev_legs.append(leg)
        rcur = apply_control(rcur, leg)

    bridge = tuple(
        int(i) for i in np.nonzero(cur.theta.as_array() != eta_tgt.as_array())[0] + 1)
    if bridge:
        leg = _pseudo_leg(pot, cur, bridge, T_init)
        legs.append(leg)
        cur = apply_control(cur, leg)

    legs.append(build_reversal_control(A, b, cur.x, eta_tgt, rcur.x, T_init))
    cur = apply_control(cur, legs[-1])

    if rev_legs:
        legs.append(reverse_control(_concat_all(rev_legs)))

    control = _concat_all(legs)
    end = apply_control(s, control)
    gap = float(np.max(np.abs(end.x - target.x)))
    if gap > 1e-8 or end.theta != target.theta:
        raise RuntimeError(f"reach construction missed its target by {gap:.3g}")
    report = check_admissible(pot, None, s, control)
    if not report.admissible:
        raise RuntimeError("reach construction lost admissibility (logic error)")
    return control


def _escalation_steps(A, theta: Velocity):
    _, history = escalate_to_flippable(A, theta)
    return history.steps
