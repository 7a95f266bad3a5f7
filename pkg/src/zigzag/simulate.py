"""Simulation engines for the zigzag process.

Two interchangeable engines produce the skeleton of switch times:

* exact: for affine-gradient targets (Gaussians) each component's rate along
  the current ray is (c_i + m_i t)_+ plus a constant excess, whose integrated
  hazard inverts in closed form.  One unit exponential per component, the
  smallest arrival wins.
* thinning: for everything else.  Successive windows of length `window` get
  a dominating constant intensity from the target's per-component rate bound
  (plus the excess bound); proposals arrive at that intensity times d, pick
  a component uniformly, and are accepted with probability true/bound.  Any
  true rate above the bound is a contract violation and raises
  ThinningBoundError instead of biasing the law of the samples.

Both engines consume a numpy Generator, so a fixed seed reproduces the
skeleton bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, asdict
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core import (ExcessRate, Potential, Skeleton, SkeletonEvent, State,
                   Velocity, flip)
from .targets import GaussianTarget

__all__ = [
    "SimConfig",
    "EventDraw",
    "ThinningBoundError",
    "first_arrival_affine",
    "next_event_exact",
    "next_event_thinning",
    "simulate_skeleton",
    "position_at",
    "integrate_along",
    "pointwise",
    "skeleton_to_csv",
    "skeleton_from_csv",
]

_METHODS = ("auto", "exact", "thinning")


@dataclass(frozen=True)
class SimConfig:
    """Run parameters for simulate_skeleton.

    horizon: total time to simulate.
    seed: 64-bit seed for the PCG64 generator (full determinism).
    method: "auto" picks exact for affine-gradient targets with constant
        excess, thinning otherwise.
    window: thinning window length (ignored by the exact engine).
    max_events: safety cap; hitting it returns a truncated skeleton.
    """

    horizon: float
    seed: int = 0
    method: str = "auto"
    window: float = 1.0
    max_events: int = 10_000_000

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be finite and positive, got {self.horizon}")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got {self.method!r}")
        if not (np.isfinite(self.window) and self.window > 0):
            raise ValueError(f"window must be finite and positive, got {self.window}")
        if self.max_events < 1:
            raise ValueError(f"max_events must be >= 1, got {self.max_events}")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "SimConfig":
        unknown = set(data) - {"horizon", "seed", "method", "window", "max_events"}
        if unknown:
            raise ValueError(f"unknown SimConfig keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class EventDraw:
    """A proposed switch: waiting time dt > 0 and the 1-based component."""

    dt: float
    index: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError(f"waiting time must be positive, got {self.dt}")


class ThinningBoundError(RuntimeError):
    """A rate evaluation exceeded the dominating bound of its window."""

    def __init__(self, component: int, at_time: float, rate: float, bound: float):
        self.component = component
        self.at_time = at_time
        self.rate = rate
        self.bound = bound
        super().__init__(
            f"thinning bound violated: component {component} has rate {rate:.6g} "
            f"above the window bound {bound:.6g} at offset {at_time:.6g}; the "
            f"target's rate_bound oracle is wrong for this segment")


def first_arrival_affine(c: float, m: float, E: float, gamma: float = 0.0) -> float:
    """First time the integrated rate (c + m s)_+ + gamma reaches E.

    Solves int_0^t [(c + m s)_+ + gamma] ds = E in closed form and returns
    inf when the total integral stays below E (m < 0 after the rate hits
    zero, or a rate that is identically zero).  gamma >= 0 is a constant
    added to the rate, used by the exact engine for constant excess rates.
    """
    for name, val in (("c", c), ("m", m), ("E", E), ("gamma", gamma)):
        if not np.isfinite(val):
            raise ValueError(f"{name} must be finite, got {val}")
    if E <= 0:
        raise ValueError(f"exponential threshold must be positive, got {E}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")

    if m == 0.0:
        rate = max(c, 0.0) + gamma
        return E / rate if rate > 0 else math.inf

    if m > 0.0:
        if c >= 0.0:
            # rate c + gamma + m s throughout
            return 2.0 * E / ((c + gamma) + math.sqrt((c + gamma) ** 2 + 2.0 * m * E))
        # flat gamma until the kink at t0, quadratic afterwards
        t0 = -c / m
        if gamma > 0.0 and E <= gamma * t0:
            return E / gamma
        rest = E - gamma * t0
        return t0 + 2.0 * rest / (gamma + math.sqrt(gamma * gamma + 2.0 * m * rest))

    # m < 0: the canonical part dies at t1 = -c/m (if it was ever alive)
    if c <= 0.0:
        return E / gamma if gamma > 0 else math.inf
    t1 = c / (-m)
    mass_to_t1 = (c + gamma) * t1 + 0.5 * m * t1 * t1
    if E <= mass_to_t1:
        disc = (c + gamma) ** 2 + 2.0 * m * E
        # disc >= gamma^2 on this branch; clip defensively against roundoff
        return 2.0 * E / ((c + gamma) + math.sqrt(max(disc, 0.0)))
    if gamma > 0.0:
        return t1 + (E - mass_to_t1) / gamma
    return math.inf


def next_event_exact(tgt: GaussianTarget, ex: Optional[ExcessRate], s: State,
                     rng: np.random.Generator) -> Optional[EventDraw]:
    """Draw the next switch from an affine-gradient target in closed form.

    One unit exponential per component; each inverts its own integrated
    hazard along the ray, and the smallest arrival (ties to the lowest
    component) wins.  Returns None when no component can ever switch on this
    ray, which happens when every rate decays to zero before its exponential
    is spent.
    """
    if not getattr(tgt, "affine_gradient", False):
        raise ValueError("target gradient not affine; use the thinning engine")
    if ex is not None and not ex.is_constant:
        raise ValueError("exact engine requires a constant excess rate")
    gamma = ex.constant_value if ex is not None else 0.0
    c, m = tgt.rate_along(s)
    thresholds = rng.exponential(size=s.d)
    best_t = math.inf
    best_i = 0
    for j in range(s.d):
        t = first_arrival_affine(float(c[j]), float(m[j]), float(thresholds[j]), gamma)
        if t < best_t:
            best_t = t
            best_i = j + 1
    if not math.isfinite(best_t):
        return None
    return EventDraw(best_t, best_i)


def next_event_thinning(pot: Potential, ex: Optional[ExcessRate], s: State,
                        delta: float, rng: np.random.Generator,
                        t_max: float) -> Optional[EventDraw]:
    """Draw the next switch by thinning a dominating homogeneous process.

    Scans windows of length delta (the last one clipped at t_max).  Within a
    window starting at x', the scalar bound is max_i rate_bound(x', theta,
    w)_i plus the excess bound; proposals arrive at bound*d, the component is
    uniform, and acceptance compares the true rate against the bound.
    Windows whose bound is zero are skipped without touching the generator,
    so a trajectory stuck in a zero-rate region costs nothing per window.

    Returns None when no proposal is accepted before t_max.
    """
    if delta <= 0:
        raise ValueError(f"window length must be positive, got {delta}")
    if t_max <= 0:
        return None
    x = s.x
    th = s.theta.as_array()
    d = s.d
    gamma_bar = ex.gamma_bar if ex is not None else 0.0
    elapsed = 0.0
    while elapsed < t_max:
        w = min(delta, t_max - elapsed)
        x_start = x + elapsed * th
        bound = float(np.max(pot.rate_bound(x_start, s.theta, w))) + gamma_bar
        if bound <= 0.0:
            elapsed += w
            continue
        total = bound * d
        offset = 0.0
        while True:
            offset += rng.exponential() / total
            if offset >= w:
                break
            j = int(rng.integers(0, d))
            xp = x_start + offset * th
            grad_j = float(np.asarray(pot.gradient(xp))[j])
            if not np.isfinite(grad_j):
                raise ValueError(f"potential gradient is not finite at x={xp}")
            lam = max(th[j] * grad_j, 0.0)
            if ex is not None:
                lam += float(ex.values(xp, s.theta)[j])
            if lam > bound * (1.0 + 1e-9) + 1e-300:
                raise ThinningBoundError(j + 1, elapsed + offset, lam, bound)
            if rng.random() * bound < lam:
                return EventDraw(elapsed + offset, j + 1)
        elapsed += w
    return None


def _resolve_method(pot: Potential, ex: Optional[ExcessRate], method: str) -> str:
    constant_excess = ex is None or ex.is_constant
    if method == "auto":
        return "exact" if (pot.affine_gradient and constant_excess) else "thinning"
    if method == "exact":
        if not pot.affine_gradient:
            raise ValueError("target gradient not affine; exact engine unavailable")
        if not constant_excess:
            raise ValueError("exact engine requires a constant excess rate")
    return method


def simulate_skeleton(pot: Potential, ex: Optional[ExcessRate], init: State,
                      cfg: SimConfig,
                      rng: Optional[np.random.Generator] = None) -> Skeleton:
    """Run the zigzag process from `init` until cfg.horizon.

    Returns the event skeleton; positions between events are linear
    interpolations (see position_at).  If cfg.max_events fires first, the
    result is flagged truncated and its horizon is the time of the last
    event, so downstream consumers never extrapolate into unsimulated time.
    """
    if init.d != pot.dim:
        raise ValueError(f"initial state has d={init.d}, target has d={pot.dim}")
    method = _resolve_method(pot, ex, cfg.method)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if method == "exact":
        return _simulate_exact(pot, ex, init, cfg, rng)  # type: ignore[arg-type]

    x = init.x.copy()
    theta = init.theta
    t = 0.0
    times: list = []
    indices: list = []
    while True:
        remaining = cfg.horizon - t
        if remaining <= 0:
            break
        draw = next_event_thinning(pot, ex, State(x, theta), cfg.window, rng,
                                   remaining)
        if draw is None:
            break
        t = t + draw.dt
        x = x + draw.dt * theta.as_array()
        theta = flip(theta, draw.index)
        times.append(t)
        indices.append(draw.index)
        if len(times) >= cfg.max_events:
            return Skeleton(init, times, indices, horizon=t, truncated=True)
    return Skeleton(init, times, indices, horizon=cfg.horizon, truncated=False)


def _simulate_exact(tgt: GaussianTarget, ex: Optional[ExcessRate], init: State,
                    cfg: SimConfig, rng: np.random.Generator) -> Skeleton:
    """Inline event loop for affine-gradient targets.

    Identical in law to looping next_event_exact and consumes the generator
    identically, but tracks A x and A theta incrementally: the position
    update shifts A x by dt * A theta, a flip of component i shifts A theta
    by a column of A, so each event costs O(d) with no matrix products.
    Event times agree with the object-based loop to roundoff, not bitwise.
    Both running products are refreshed from scratch every 512 events to
    stop roundoff from creeping into the rates.
    """
    gamma = ex.constant_value if ex is not None else 0.0
    A, b = tgt.A, tgt.b
    d = init.d
    cols = [A[:, j] * 2.0 for j in range(d)]
    x = init.x.copy()
    th = init.theta.as_array().copy()
    ax = A @ x
    ath = A @ th
    horizon = float(cfg.horizon)
    t = 0.0
    times: list = []
    indices: list = []
    exponential = rng.exponential
    arrival = first_arrival_affine
    while True:
        thresholds = exponential(size=d)
        best_t = math.inf
        best_j = -1
        for j in range(d):
            tj = arrival(th[j] * (ax[j] + b[j]), th[j] * ath[j],
                         thresholds[j], gamma)
            if tj < best_t:
                best_t = tj
                best_j = j
        if t + best_t >= horizon:
            break
        t += best_t
        x += best_t * th
        ax += best_t * ath
        ath -= th[best_j] * cols[best_j]
        th[best_j] = -th[best_j]
        times.append(t)
        indices.append(best_j + 1)
        if len(times) % 512 == 0:
            ax = A @ x
            ath = A @ th
        if len(times) >= cfg.max_events:
            return Skeleton(init, times, indices, horizon=t, truncated=True)
    return Skeleton(init, times, indices, horizon=horizon, truncated=False)


def position_at(skel: Skeleton, t: float) -> State:
    """State at time t, right-continuous in the velocity at switch times."""
    if not 0.0 <= t <= skel.horizon:
        raise ValueError(f"t={t} outside [0, {skel.horizon}]")
    times, pos, vel = skel._segments
    j = int(np.searchsorted(times, t, side="right")) - 1
    x = pos[j] + (t - times[j]) * vel[j]
    return State(x, Velocity(vel[j]))


_GL_NODES, _GL_WEIGHTS = leggauss(8)


def pointwise(fn: Callable[[State], float]) -> Callable:
    """Adapt a State-wise scalar function to the vectorized g(X, Theta) form."""

    def g(X: np.ndarray, Theta: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Theta = np.atleast_2d(np.asarray(Theta, dtype=float))
        return np.array([fn(State(x, Velocity(th))) for x, th in zip(X, Theta)])

    return g


def _segment_integrals(skel: Skeleton, g: Callable, t_end: float) -> np.ndarray:
    """Gauss-Legendre (order 8) integral of g over each segment up to t_end.

    Exact for g polynomial in position of degree <= 15 along a segment.
    g must be vectorized: g(X, Theta) with (n, d) arrays returns (n,) values
    (wrap plain State functions with `pointwise`).
    """
    times, pos, vel = skel._segments
    k = int(np.searchsorted(times, t_end, side="left"))
    k = max(k, 1)
    starts = times[:k]
    ends = np.minimum(np.append(times[1:k], np.inf), t_end)
    lengths = ends - starts
    offs = 0.5 * (_GL_NODES + 1.0)[None, :] * lengths[:, None]
    X = pos[:k, None, :] + offs[..., None] * vel[:k, None, :]
    Theta = np.broadcast_to(vel[:k, None, :], X.shape)
    vals = np.asarray(g(X.reshape(-1, skel.d), Theta.reshape(-1, skel.d)), dtype=float)
    vals = vals.reshape(k, _GL_NODES.size)
    return 0.5 * lengths * (vals @ _GL_WEIGHTS)


def integrate_along(skel: Skeleton, g: Callable, t_end: float) -> float:
    """Time average (1/t_end) int_0^t_end g(x(s), theta(s)) ds."""
    if not 0.0 < t_end <= skel.horizon:
        raise ValueError(f"t_end={t_end} outside (0, {skel.horizon}]")
    return float(np.sum(_segment_integrals(skel, g, t_end)) / t_end)


_CSV_FLOAT = repr  # shortest round-trip formatting keeps reruns byte-identical


def skeleton_to_csv(skel: Skeleton, path) -> None:
    """Write the skeleton in the t,i,x1..xd,th1..thd format.

    Row 0 carries the initial state with i=0; each event contributes one row
    with its 1-based flipped component; a trailing row at the horizon with
    i=0 closes the file so the final segment is recoverable.
    """
    d = skel.d
    header = ["t", "i"] + [f"x{j}" for j in range(1, d + 1)] \
        + [f"th{j}" for j in range(1, d + 1)]
    final = skel.final_state()
    times, pos, vel = skel._segments
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)

        def row(t, i, x, theta):
            writer.writerow([_CSV_FLOAT(float(t)), str(int(i))]
                            + [_CSV_FLOAT(float(v)) for v in x]
                            + [str(int(v)) for v in theta])

        row(0.0, 0, pos[0], vel[0])
        for j in range(1, skel.n_events + 1):
            row(times[j], skel.event_indices[j - 1], pos[j], vel[j])
        row(skel.horizon, 0, final.x, final.theta.as_array())


def skeleton_from_csv(path) -> Skeleton:
    """Rebuild a Skeleton from its CSV form (truncation flags do not survive)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if len(rows) < 3:
        raise ValueError("skeleton CSV needs a header, an initial row and a horizon row")
    header = rows[0]
    if len(header) < 4 or header[:2] != ["t", "i"] or (len(header) - 2) % 2 != 0:
        raise ValueError(f"malformed skeleton header: {header}")
    d = (len(header) - 2) // 2
    expected = ["t", "i"] + [f"x{j}" for j in range(1, d + 1)] \
        + [f"th{j}" for j in range(1, d + 1)]
    if header != expected:
        raise ValueError(f"malformed skeleton header: {header}")

    def parse(row, line_no):
        if len(row) != 2 + 2 * d:
            raise ValueError(f"row {line_no} has {len(row)} fields, expected {2 + 2 * d}")
        t = float(row[0])
        i = int(row[1])
        x = np.array([float(v) for v in row[2:2 + d]])
        theta = Velocity([float(v) for v in row[2 + d:]])
        return t, i, x, theta

    t0, i0, x0, th0 = parse(rows[1], 1)
    if t0 != 0.0 or i0 != 0:
        raise ValueError("first data row must be the initial state at t=0 with i=0")
    tn, i_last, _, _ = parse(rows[-1], len(rows) - 1)
    if i_last != 0:
        raise ValueError("last data row must be the horizon marker with i=0")
    events = []
    for line_no, row in enumerate(rows[2:-1], start=2):
        t, i, x, theta = parse(row, line_no)
        if i == 0:
            raise ValueError(f"row {line_no}: interior rows must carry a switch index")
        events.append(SkeletonEvent(t, i, x, theta))
    return Skeleton.from_events(State(x0, th0), events, horizon=tn)
