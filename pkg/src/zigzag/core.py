"""Core state types and switching-rate algebra for the zigzag process.

The process lives on E = R^d x {-1,+1}^d.  Positions move on straight lines
with velocity theta, and component i of the velocity flips at rate

    lambda_i(x, theta) = (theta_i * dU/dx_i(x))_+ + gamma_i(x, theta)

where U is the potential of the target density exp(-U) and gamma is a
nonnegative excess rate.  Subtracting the rate of the flipped state leaves
the antisymmetric part:

    lambda_i(x, theta) - lambda_i(x, flip(theta, i)) = theta_i * dU/dx_i(x)

which is the identity every valid (potential, excess) pair must satisfy.
The simulation engines, reachability controls and drift diagnostics are all
written against the small surface defined here.

Component indices are 1-based in the public API.  Index 0 is reserved as the
"no switch" sentinel in the skeleton CSV format, so real components are
1..d everywhere a component index appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Velocity",
    "State",
    "Potential",
    "ExcessRate",
    "SkeletonEvent",
    "Skeleton",
    "flip",
    "flip_seq",
    "canonical_rate",
    "rate_vector",
    "unnormalized_density",
    "log_density",
]


def _as_float_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Velocity:
    """A d-tuple of signs in {-1, +1}, immutable after construction."""

    signs: np.ndarray

    def __post_init__(self):
        arr = _as_float_vector(self.signs, "velocity")
        if not np.all(np.abs(arr) == 1.0):
            raise ValueError(f"velocity components must be exactly +-1, got {arr}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "signs", arr)

    @property
    def d(self) -> int:
        return self.signs.size

    def flip(self, i: int) -> "Velocity":
        return flip(self, i)

    def as_array(self) -> np.ndarray:
        return self.signs

    def as_tuple(self) -> tuple:
        return tuple(int(s) for s in self.signs)

    def __eq__(self, other) -> bool:
        if isinstance(other, Velocity):
            return np.array_equal(self.signs, other.signs)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.as_tuple())

    def __repr__(self) -> str:
        body = ",".join("+1" if s > 0 else "-1" for s in self.signs)
        return f"Velocity({body})"


@dataclass(frozen=True, eq=False)
class State:
    """A point (x, theta) of the zigzag state space.

    x must be finite and match theta's dimension; both are immutable.
    theta may be given as any +-1 sequence and is coerced to Velocity.
    """

    x: np.ndarray
    theta: Velocity

    def __post_init__(self):
        x = _as_float_vector(self.x, "position")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"position must be finite, got {x}")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        theta = self.theta
        if not isinstance(theta, Velocity):
            theta = Velocity(theta)
            object.__setattr__(self, "theta", theta)
        if theta.d != x.size:
            raise ValueError(
                f"dimension mismatch: position has d={x.size}, velocity d={theta.d}"
            )

    @property
    def d(self) -> int:
        return self.x.size

    def __eq__(self, other) -> bool:
        if isinstance(other, State):
            return np.array_equal(self.x, other.x) and self.theta == other.theta
        return NotImplemented

    def __hash__(self) -> int:
        return hash((tuple(self.x), self.theta.as_tuple()))

    def __repr__(self) -> str:
        return f"State(x={list(self.x)}, theta={self.theta!r})"


def _check_index(i: int, d: int) -> int:
    if not isinstance(i, (int, np.integer)):
        raise TypeError(f"component index must be an integer, got {type(i).__name__}")
    if not 1 <= i <= d:
        raise IndexError(f"component index {i} out of range 1..{d}")
    return int(i)


def flip(theta: Velocity, i: int) -> Velocity:
    """Negate component i (1-based) of the velocity.

    flip is an involution: flip(flip(theta, i), i) == theta.
    """
    i = _check_index(i, theta.d)
    signs = theta.signs.copy()
    signs[i - 1] = -signs[i - 1]
    return Velocity(signs)


def flip_seq(theta: Velocity, indices: Sequence[int]) -> Velocity:
    """Apply flips left to right.  Repeated indices cancel pairwise."""
    signs = theta.signs.copy()
    for i in indices:
        i = _check_index(i, theta.d)
        signs[i - 1] = -signs[i - 1]
    return Velocity(signs)


class Potential:
    """Base class for target potentials U with density exp(-U).

    Subclasses provide `value` and `gradient` (vectorized over leading axes:
    input (..., d) gives value (...,) and gradient (..., d)) and may provide
    `hessian`.  `affine_gradient` is True only when grad U(x) = A x + b holds
    exactly, which unlocks the exact per-component simulation engine.
    """

    dim: int
    affine_gradient: bool = False

    def value(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} does not provide a Hessian")

    @property
    def has_hessian(self) -> bool:
        try:
            self.hessian(np.zeros(self.dim))
        except NotImplementedError:
            return False
        return True

    def rate_bound(self, x, theta, delta: float, n_samples: int = 33) -> np.ndarray:
        """Per-component upper bound on the canonical rate along a segment.

        Bounds sup over s in [0, delta] of (theta_i dU/dx_i(x + s theta))_+
        for every i.  The default oracle samples the segment densely, takes
        the running maximum, inflates it by a 1.2 safety factor, and adds a
        Lipschitz margin of half a sample spacing whenever the Hessian is
        available and finite along the segment.  Subclasses with exact
        structure (affine gradients) override this with a tight bound.

        The thinning engine trusts this oracle but independently verifies it
        against every evaluated rate; a violation raises a loud error rather
        than silently biasing the samples.
        """
        x = _as_float_vector(x, "position")
        th = theta.as_array() if isinstance(theta, Velocity) else np.asarray(theta, float)
        if delta <= 0:
            raise ValueError(f"window length must be positive, got {delta}")
        s = np.linspace(0.0, delta, n_samples)
        pts = x[None, :] + s[:, None] * th[None, :]
        rates = np.maximum(self.gradient(pts) * th[None, :], 0.0)
        bound = 1.2 * rates.max(axis=0)
        try:
            hess = self.hessian(pts)
        except NotImplementedError:
            return bound
        if np.all(np.isfinite(hess)):
            # |d/ds (theta . grad U)_i| <= sum_j |H_ij| along the segment
            lipschitz = np.abs(hess).sum(axis=-1).max(axis=0)
            bound = bound + 0.5 * (s[1] - s[0]) * lipschitz
        return bound


class ExcessRate:
    """Nonnegative excess switching rate gamma with a uniform bound.

    gamma maps (x, theta) to a d-vector of nonnegative values and must not
    depend on the sign of the component it excites:

        gamma_i(x, flip(theta, i)) == gamma_i(x, theta)

    which keeps the rate identity (module docstring) intact.  gamma_bar is a
    global upper bound used by the thinning engine's dominating intensity.
    Use `ExcessRate.zero()` for the canonical process and
    `ExcessRate.constant(c)` for a state-independent excess, both of which
    mark themselves constant so the exact engine can invert them in closed
    form.
    """

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 gamma_bar: float, constant_value: Optional[float] = None):
        if gamma_bar < 0 or not np.isfinite(gamma_bar):
            raise ValueError(f"gamma_bar must be finite and >= 0, got {gamma_bar}")
        self._fn = fn
        self.gamma_bar = float(gamma_bar)
        self._constant_value = constant_value

    @classmethod
    def zero(cls) -> "ExcessRate":
        return cls(lambda x, theta: np.zeros(np.shape(x)), 0.0, constant_value=0.0)

    @classmethod
    def constant(cls, value: float) -> "ExcessRate":
        value = float(value)
        if value < 0:
            raise ValueError(f"excess rate must be >= 0, got {value}")
        return cls(lambda x, theta: np.full(np.shape(x), value), value,
                   constant_value=value)

    @property
    def is_constant(self) -> bool:
        return self._constant_value is not None

    @property
    def constant_value(self) -> float:
        if self._constant_value is None:
            raise ValueError("excess rate is not constant")
        return self._constant_value

    def values(self, x, theta) -> np.ndarray:
        """gamma as a vector over components; broadcasts over leading axes."""
        x = np.asarray(x, dtype=float)
        th = theta.as_array() if isinstance(theta, Velocity) else np.asarray(theta, float)
        vals = np.asarray(self._fn(x, th), dtype=float)
        if vals.shape != x.shape:
            raise ValueError(
                f"excess rate returned shape {vals.shape}, expected {x.shape}")
        if np.any(vals < 0):
            raise ValueError("excess rate produced a negative value")
        if np.any(vals > self.gamma_bar + 1e-12 * max(1.0, self.gamma_bar)):
            raise ValueError(
                f"excess rate exceeded its declared bound gamma_bar={self.gamma_bar}")
        return vals


@dataclass(frozen=True)
class SkeletonEvent:
    """One velocity switch: time, flipped component, position, new velocity."""

    t: float
    index: int
    x: np.ndarray
    theta: Velocity

    def __post_init__(self):
        x = _as_float_vector(self.x, "event position")
        x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        theta = self.theta
        if not isinstance(theta, Velocity):
            object.__setattr__(self, "theta", Velocity(theta))
        _check_index(self.index, x.size)


@dataclass(frozen=True, eq=False)
class Skeleton:
    """A zigzag trajectory recorded at its switch times.

    Stored as arrays: strictly increasing event times in (0, horizon] and
    the 1-based component flipped at each.  Positions and velocities are
    derived from the initial state, which keeps them consistent with the
    linear flow by construction; between events the position is linear,
    x(t) = X_k + Theta_k (t - T_k), and the path is right-continuous in the
    velocity.  `truncated` marks runs stopped by an event cap before the
    requested horizon.  Use from_events to build from SkeletonEvent objects;
    the events property materializes them back on demand.
    """

    init: State
    event_times: np.ndarray
    event_indices: np.ndarray
    horizon: float
    truncated: bool = False

    def __post_init__(self):
        times = np.asarray(self.event_times, dtype=float)
        idx = np.asarray(self.event_indices, dtype=np.int64)
        if times.ndim != 1 or idx.shape != times.shape:
            raise ValueError("event_times and event_indices must be matching 1-D arrays")
        if self.horizon < 0 or not np.isfinite(self.horizon):
            raise ValueError(f"horizon must be finite and >= 0, got {self.horizon}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise ValueError("event times must be finite")
            if times[0] <= 0.0 or np.any(np.diff(times) <= 0.0):
                raise ValueError("event times must be strictly increasing and positive")
            if times[-1] > self.horizon:
                raise ValueError("event time beyond the horizon")
            if np.any(idx < 1) or np.any(idx > self.init.d):
                raise ValueError(f"event indices must lie in 1..{self.init.d}")
        times = times.copy()
        idx = idx.copy()
        times.flags.writeable = False
        idx.flags.writeable = False
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "event_indices", idx)

    @classmethod
    def from_events(cls, init: State, events: Sequence[SkeletonEvent],
                    horizon: float, truncated: bool = False) -> "Skeleton":
        """Build from event objects, checking their x/theta against the flow.

        Times and indices are authoritative; the redundant positions and
        velocities carried by the events must agree with the trajectory they
        imply (exactly for velocities, to float reproduction for positions).
        """
        events = tuple(events)
        for ev in events:
            if not isinstance(ev, SkeletonEvent):
                raise TypeError("events must be SkeletonEvent instances")
            if ev.x.size != init.d:
                raise ValueError("event dimension does not match the initial state")
        skel = cls(init, np.array([ev.t for ev in events]),
                   np.array([ev.index for ev in events]), horizon, truncated)
        _, pos, vel = skel._segments
        for j, ev in enumerate(events, start=1):
            if not np.array_equal(ev.theta.signs, vel[j]):
                raise ValueError(f"event {j} velocity disagrees with its flip history")
            if not np.allclose(ev.x, pos[j], rtol=0.0, atol=1e-9):
                raise ValueError(f"event {j} position is off the linear flow")
        return skel

    @property
    def d(self) -> int:
        return self.init.d

    @property
    def n_events(self) -> int:
        return int(self.event_times.size)

    @cached_property
    def _segments(self):
        """(times, positions, velocities) arrays describing the k+1 segments."""
        k = self.n_events
        times = np.concatenate(([0.0], self.event_times))
        flips = np.ones((k + 1, self.d))
        if k:
            flips[np.arange(1, k + 1), self.event_indices - 1] = -1.0
        vel = self.init.theta.as_array() * np.cumprod(flips, axis=0)
        pos = np.empty((k + 1, self.d))
        pos[0] = self.init.x
        if k:
            steps = vel[:-1] * np.diff(times)[:, None]
            pos[1:] = self.init.x + np.cumsum(steps, axis=0)
        return times, pos, vel

    @cached_property
    def events(self) -> tuple:
        """The switches as SkeletonEvent objects (materialized lazily)."""
        times, pos, vel = self._segments
        return tuple(
            SkeletonEvent(float(times[j]), int(self.event_indices[j - 1]),
                          pos[j], Velocity(vel[j]))
            for j in range(1, self.n_events + 1))

    def final_state(self) -> State:
        times, pos, vel = self._segments
        x = pos[-1] + (self.horizon - times[-1]) * vel[-1]
        return State(x, Velocity(vel[-1]))


def canonical_rate(pot: Potential, s: State, i: int) -> float:
    """The canonical switching rate (theta_i dU/dx_i(x))_+ of component i."""
    i = _check_index(i, s.d)
    g = np.asarray(pot.gradient(s.x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"potential gradient is not finite at x={s.x}")
    return float(max(s.theta.signs[i - 1] * g[i - 1], 0.0))


def rate_vector(pot: Potential, ex: Optional[ExcessRate], s: State) -> np.ndarray:
    """All d switching rates at once, canonical part plus excess."""
    g = np.asarray(pot.gradient(s.x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError(f"potential gradient is not finite at x={s.x}")
    rates = np.maximum(s.theta.signs * g, 0.0)
    if ex is not None:
        rates = rates + ex.values(s.x, s.theta)
    return rates


def log_density(pot: Potential, x) -> float:
    """log of the unnormalized target density, -U(x)."""
    return float(-pot.value(np.asarray(x, dtype=float)))


def unnormalized_density(pot: Potential, x) -> float:
    """exp(-U(x)).  Raises on overflow; work with log_density instead."""
    logp = log_density(pot, x)
    if logp > 709.0:
        raise OverflowError(
            "exp(-U) overflows a double at this point; use log_density")
    return math.exp(logp)
