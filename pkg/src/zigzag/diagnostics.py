"""Generator checks, Lyapunov drift ratios and growth-condition probes.

The extended generator of the process acts on f(x, theta) as

    L f = <theta, grad_x f> + sum_i lambda_i(x, theta) (f(x, F_i theta) - f)

with F_i the i-th velocity flip.  Stationarity of exp(-U) times the uniform
velocity law is equivalent to the integral of L f vanishing for a rich
enough class of f, which `stationarity_residual` checks by quadrature.

`drift_ratio` evaluates (L V)/V in closed form for the Lyapunov candidate

    V(x, theta) = exp(alpha U(x) + sum_i phi(theta_i dU/dx_i(x))),
    phi(s) = sign(s) log(1 + delta |s|) / 2,

valid for parameters with 0 <= gamma_bar * delta < alpha < 1.  All V
arithmetic is done in log space so probes far out in the tails cannot
overflow.  `drift_scan` sweeps a radial-angular grid times all velocities,
checks the closed form against an algebraic pointwise upper bound at every
probe, and extracts a certified drift triple (epsilon, K_radius, C) with

    (L V)/V <= -epsilon whenever |x| > K_radius,   L V + epsilon V <= C.

`growth_probe` reports the tail diagnostics that decide whether the drift
argument can work at all: curvature-to-gradient and gradient-to-value
ratios along rays, and the log-growth slope of U.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ExcessRate, Potential, State, Velocity, rate_vector

__all__ = [
    "LyapunovParams",
    "StateFunction",
    "QuadratureSpec",
    "DriftReport",
    "GrowthReport",
    "generator_apply",
    "log_lyapunov",
    "lyapunov_value",
    "drift_ratio",
    "drift_ratio_terms",
    "drift_bound",
    "drift_ratio_via_generator",
    "drift_scan",
    "growth_probe",
    "stationarity_residual",
]


@dataclass(frozen=True)
class LyapunovParams:
    """Parameters (alpha, delta, gamma_bar) of the Lyapunov candidate.

    Constraints: delta > 0 and 0 <= gamma_bar * delta < alpha < 1.  alpha
    weighs the potential itself, delta the switching-rate tilt, gamma_bar
    must dominate any excess rate in play.
    """

    alpha: float
    delta: float
    gamma_bar: float = 0.0

    def __post_init__(self):
        a, d, g = self.alpha, self.delta, self.gamma_bar
        if not (np.isfinite(a) and np.isfinite(d) and np.isfinite(g)):
            raise ValueError("Lyapunov parameters must be finite")
        if d <= 0:
            raise ValueError(f"delta must be positive, got {d}")
        if g < 0:
            raise ValueError(f"gamma_bar must be >= 0, got {g}")
        if not g * d < a < 1:
            raise ValueError(
                f"need gamma_bar*delta < alpha < 1, got gamma_bar*delta={g * d}, alpha={a}")


class StateFunction:
    """A test function f(x, theta) with an optional exact x-gradient.

    Both callables must be vectorized over leading axes ((..., d) inputs,
    (...) value, (..., d) gradient).  Plain callables work everywhere a
    StateFunction does; they just fall back to central finite differences
    where a gradient is needed.
    """

    def __init__(self, value: Callable, gradient: Optional[Callable] = None):
        self._value = value
        if gradient is not None:
            self.gradient = gradient

    def __call__(self, x, theta):
        return self._value(x, theta)


def _fd_gradient(f, x: np.ndarray, theta: np.ndarray, h: float) -> np.ndarray:
    """Central finite differences of f in x, vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = h
        cols.append((np.asarray(f(x + e, theta), dtype=float)
                     - np.asarray(f(x - e, theta), dtype=float)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def generator_apply(pot: Potential, ex: Optional[ExcessRate], f, s: State,
                    fd_step: float = 1e-6) -> float:
    """Evaluate the extended generator L f at the state s.

    Uses f.gradient when present, otherwise central differences at fd_step.
    """
    x, th = s.x, s.theta.as_array()
    grad_fn = getattr(f, "gradient", None)
    gradf = np.asarray(grad_fn(x, th) if grad_fn is not None
                       else _fd_gradient(f, x, th, fd_step), dtype=float)
    rates = rate_vector(pot, ex, s)
    base = float(f(x, th))
    total = float(th @ gradf)
    for j in range(s.d):
        flipped = th.copy()
        flipped[j] = -flipped[j]
        total += rates[j] * (float(f(x, flipped)) - base)
    return total


def _phi(s: np.ndarray, delta: float) -> np.ndarray:
    return 0.5 * np.sign(s) * np.log1p(delta * np.abs(s))


def _phi_prime(s: np.ndarray, delta: float) -> np.ndarray:
    return 0.5 * delta / (1.0 + delta * np.abs(s))


def _log_v(pot: Potential, p: LyapunovParams, x, theta) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = theta * pot.gradient(x)
    return p.alpha * pot.value(x) + _phi(s, p.delta).sum(axis=-1)


def log_lyapunov(pot: Potential, p: LyapunovParams, s: State) -> float:
    """log V(x, theta); prefer this over lyapunov_value away from the origin."""
    return float(_log_v(pot, p, s.x, s.theta.as_array()))


def lyapunov_value(pot: Potential, p: LyapunovParams, s: State) -> float:
    """V(x, theta) = exp(alpha U + sum phi(theta_i dU_i)).  Raises on overflow."""
    logv = log_lyapunov(pot, p, s)
    if logv > 709.0:
        raise OverflowError("V overflows a double here; use log_lyapunov")
    return math.exp(logv)


def drift_ratio_terms(pot: Potential, ex: Optional[ExcessRate],
                      p: LyapunovParams, s: State):
    """The three closed-form pieces of (L V)/V at s.

    transport: alpha <theta, grad U>.
    curvature: sum_ij theta_i d2U_ij theta_j phi'(theta_j dU_j), the price of
        the rate tilt moving with x (requires the Hessian; non-finite where
        the potential is not twice differentiable).
    switching: sum_i (gamma_i + (s_i)_+) (exp(phi(-s_i) - phi(s_i)) - 1)
        with s_i = theta_i dU_i, always <= 0.
    """
    x, th = s.x, s.theta.as_array()
    grad = np.asarray(pot.gradient(x), dtype=float)
    sv = th * grad
    transport = p.alpha * float(np.sum(sv))
    hess = np.asarray(pot.hessian(x), dtype=float)
    # inf * 0 -> nan here is the intended signal for a non-C2 point
    with np.errstate(invalid="ignore"):
        curvature = float(th @ hess @ (th * _phi_prime(sv, p.delta)))
    # exp(phi(-s) - phi(s)) - 1 simplifies to -delta s/(1+delta s) for s > 0
    # and to delta |s| for s <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(sv > 0, -p.delta * sv / (1.0 + p.delta * sv), -p.delta * sv)
    gamma = ex.values(x, th) if ex is not None else np.zeros(s.d)
    switching = float(np.sum((gamma + np.maximum(sv, 0.0)) * factor))
    return transport, curvature, switching


def drift_ratio(pot: Potential, ex: Optional[ExcessRate],
                p: LyapunovParams, s: State) -> float:
    """(L V)/V at s in closed form (log-space safe, no V is ever formed)."""
    transport, curvature, switching = drift_ratio_terms(pot, ex, p, s)
    return transport + curvature + switching


def drift_bound(pot: Potential, p: LyapunovParams, s: State) -> float:
    """Algebraic pointwise upper bound on (L V)/V.

    -min(1-alpha, alpha - gamma_bar*delta) sum_i |dU_i| + d/delta
    + (delta/2) sum_ij |d2U_ij|.  Holds with no tolerance wherever the
    Hessian is finite; drift_scan asserts it at every probe.
    """
    grad = np.asarray(pot.gradient(s.x), dtype=float)
    hess = np.asarray(pot.hessian(s.x), dtype=float)
    slope = min(1.0 - p.alpha, p.alpha - p.gamma_bar * p.delta)
    return (-slope * float(np.sum(np.abs(grad)))
            + s.d / p.delta
            + 0.5 * p.delta * float(np.sum(np.abs(hess))))


def drift_ratio_via_generator(pot: Potential, ex: Optional[ExcessRate],
                              p: LyapunovParams, s: State,
                              fd_step: float = 1e-6) -> float:
    """(L V)/V through the generator acting on log V, as an independent route.

    The transport part differentiates log V by central differences instead
    of using the closed-form Hessian contraction; the switching part
    re-exponentiates actual log V differences.  Agreement with drift_ratio
    validates both.
    """
    x, th = s.x, s.theta.as_array()

    def lv(X, TH):
        return _log_v(pot, p, X, TH)

    grad_lv = _fd_gradient(lv, x, th, fd_step)
    total = float(th @ grad_lv)
    rates = rate_vector(pot, ex, s)
    base = float(lv(x, th))
    for j in range(s.d):
        flipped = th.copy()
        flipped[j] = -flipped[j]
        total += rates[j] * math.expm1(float(lv(x, flipped)) - base)
    return total


def _directions(d: int, n_angular: int) -> np.ndarray:
    """Deterministic unit directions: signs in 1-D, a uniform fan in 2-D,
    fixed-seed unit vectors beyond."""
    if n_angular < 1:
        raise ValueError(f"n_angular must be >= 1, got {n_angular}")
    if d == 1:
        return np.array([[1.0], [-1.0]])[:n_angular]
    if d == 2:
        phi = 2.0 * np.pi * np.arange(n_angular) / n_angular
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((n_angular, d))
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def _all_velocities(d: int) -> np.ndarray:
    if d > 12:
        raise ValueError(f"velocity grid has 2^{d} entries; refusing beyond d=12")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=d)))


@dataclass(frozen=True)
class DriftReport:
    """Grid of drift ratios and the certified (epsilon, K_radius, C) triple.

    epsilon is None when no scanned radius has every strictly-outside probe
    finite with ratio <= -epsilon for a positive epsilon; then K_radius and
    C are None too.
    """

    params: LyapunovParams
    radii: np.ndarray
    xs: np.ndarray
    thetas: np.ndarray
    ratios: np.ndarray
    bounds: np.ndarray
    log_vs: np.ndarray
    epsilon: Optional[float]
    k_radius: Optional[float]
    c: Optional[float]

    def to_json_dict(self) -> dict:
        def none_or_float(v):
            return None if v is None or not np.isfinite(v) else float(v)

        finite = np.isfinite(self.ratios)
        return {
            "alpha": self.params.alpha,
            "delta": self.params.delta,
            "gamma_bar": self.params.gamma_bar,
            "epsilon": none_or_float(self.epsilon),
            "k_radius": none_or_float(self.k_radius),
            "c": none_or_float(self.c),
            "n_probes": int(self.ratios.size),
            "n_nonfinite": int(np.sum(~finite)),
            "max_finite_ratio": none_or_float(
                float(self.ratios[finite].max()) if finite.any() else None),
        }

    def write_grid_csv(self, path) -> None:
        d = self.xs.shape[1]
        header = ["radius"] + [f"x{j}" for j in range(1, d + 1)] \
            + [f"th{j}" for j in range(1, d + 1)] + ["ratio", "bound", "log_v"]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for k in range(self.ratios.size):
                row = ([repr(float(self.radii[k]))]
                       + [repr(float(v)) for v in self.xs[k]]
                       + [str(int(v)) for v in self.thetas[k]]
                       + [repr(float(self.ratios[k])), repr(float(self.bounds[k])),
                          repr(float(self.log_vs[k]))])
                fh.write(",".join(row) + "\n")


def drift_scan(pot: Potential, ex: Optional[ExcessRate], p: LyapunovParams,
               r_min: float, r_max: float, n_radial: int = 9,
               n_angular: int = 16) -> DriftReport:
    """Sweep (L V)/V over radii x directions x all velocities.

    Asserts drift_ratio <= drift_bound at every probe where both are finite
    (the bound is algebraic, so no tolerance is allowed).  The certified
    triple is extracted conservatively: walk candidate K_radius over the
    scanned radii; screen the region beyond K with the 99th percentile of
    its ratios, then re-verify with the raw maximum, so one bad probe moves
    K outward instead of silently shrinking the certificate.
    """
    if not 0 < r_min < r_max:
        raise ValueError(f"need 0 < r_min < r_max, got {r_min}, {r_max}")
    if n_radial < 2:
        raise ValueError(f"n_radial must be >= 2, got {n_radial}")
    radii = np.geomspace(r_min, r_max, n_radial)
    dirs = _directions(pot.dim, n_angular)
    thetas = _all_velocities(pot.dim)

    rows_r, rows_x, rows_th, rows_ratio, rows_bound, rows_lv = [], [], [], [], [], []
    for r in radii:
        for direction in dirs:
            x = r * direction
            for th in thetas:
                state = State(x, Velocity(th))
                ratio = drift_ratio(pot, ex, p, state)
                bound = drift_bound(pot, p, state)
                if np.isfinite(ratio) and np.isfinite(bound) and ratio > bound:
                    raise RuntimeError(
                        f"closed-form ratio {ratio} exceeds its algebraic bound "
                        f"{bound} at x={x}, theta={th}; the closed form is wrong")
                rows_r.append(r)
                rows_x.append(x)
                rows_th.append(th)
                rows_ratio.append(ratio)
                rows_bound.append(bound)
                rows_lv.append(float(_log_v(pot, p, x, th)))

    radii_col = np.asarray(rows_r)
    ratios = np.asarray(rows_ratio)
    log_vs = np.asarray(rows_lv)

    epsilon = k_radius = c = None
    for K in radii[:-1]:
        outside = ratios[radii_col > K]
        if outside.size == 0 or not np.all(np.isfinite(outside)):
            continue
        robust = -float(np.quantile(outside, 0.99))
        if robust <= 0:
            continue
        eps = min(robust, -float(outside.max()))
        if eps <= 0:
            continue
        epsilon, k_radius = eps, float(K)
        inside = radii_col <= K
        with np.errstate(over="ignore", invalid="ignore"):
            slack = np.exp(log_vs[inside]) * (ratios[inside] + eps)
        c = float(max(0.0, np.nanmax(slack))) if slack.size else 0.0
        break

    return DriftReport(p, radii_col, np.asarray(rows_x), np.asarray(rows_th),
                       ratios, np.asarray(rows_bound), log_vs,
                       epsilon, k_radius, c)


@dataclass(frozen=True)
class GrowthReport:
    """Tail growth diagnostics per radius (maxima over probed directions).

    ratio1 = max(1, ||Hess U||) / |grad U| and ratio2 = |grad U| / U must
    both decay for the drift machinery to have any chance; gc2_slope is the
    least-squares slope of min-over-directions U against log radius.
    gc3_consistent requires both ratios to decrease monotonically AND to at
    least halve over the top half of the radii, so a ratio stalling at a
    positive constant is called out even though it still decreases.
    """

    radii: tuple
    ratio1: tuple
    ratio2: tuple
    u_min: tuple
    gc2_slope: float
    gc3_consistent: bool

    def to_json_dict(self) -> dict:
        clean = lambda v: None if not np.isfinite(v) else float(v)
        return {
            "radii": [float(r) for r in self.radii],
            "ratio1": [clean(v) for v in self.ratio1],
            "ratio2": [clean(v) for v in self.ratio2],
            "u_min": [float(v) for v in self.u_min],
            "gc2_slope": clean(self.gc2_slope),
            "gc3_consistent": bool(self.gc3_consistent),
        }

    def write_grid_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("radius,ratio1,ratio2,u_min\n")
            for r, a, b, u in zip(self.radii, self.ratio1, self.ratio2, self.u_min):
                fh.write(f"{r!r},{a!r},{b!r},{u!r}\n")


def growth_probe(pot: Potential, radii: Sequence[float],
                 n_angular: int = 16) -> GrowthReport:
    """Probe curvature/gradient/value ratios along rays at the given radii."""
    radii = [float(r) for r in radii]
    if len(radii) < 2 or any(r <= 0 for r in radii) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be at least two increasing positive values")
    dirs = _directions(pot.dim, n_angular)
    r1, r2, umin = [], [], []
    for r in radii:
        worst1 = worst2 = -math.inf
        lowest_u = math.inf
        for direction in dirs:
            x = r * direction
            grad = np.asarray(pot.gradient(x), dtype=float)
            hess = np.asarray(pot.hessian(x), dtype=float)
            u = float(pot.value(x))
            gnorm = float(np.linalg.norm(grad))
            hnorm = float(np.linalg.norm(hess, 2)) if np.all(np.isfinite(hess)) \
                else math.inf
            with np.errstate(divide="ignore", invalid="ignore"):
                v1 = max(1.0, hnorm) / gnorm if gnorm > 0 else math.inf
                v2 = gnorm / u if u > 0 else math.inf
            worst1 = max(worst1, v1)
            worst2 = max(worst2, v2)
            lowest_u = min(lowest_u, u)
        r1.append(worst1)
        r2.append(worst2)
        umin.append(lowest_u)

    slope = float(np.polyfit(np.log(radii), umin, 1)[0])

    def decays(seq) -> bool:
        half = max(len(seq) // 2, 1) - 1 if len(seq) > 2 else 0
        top = seq[half:]
        if any(not np.isfinite(v) for v in top):
            return False
        strictly_down = all(a > b for a, b in zip(top, top[1:]))
        halves = top[-1] <= 0.5 * top[0]
        return strictly_down and halves

    return GrowthReport(tuple(radii), tuple(r1), tuple(r2), tuple(umin),
                        slope, decays(r1) and decays(r2))


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor trapezoid grid: n points per axis on [lo, hi]^d."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 3:
            raise ValueError(f"need at least 3 quadrature points, got {self.n}")


def stationarity_residual(pot: Potential, ex: Optional[ExcessRate], f,
                          quad: QuadratureSpec, fd_step: float = 1e-6) -> float:
    """Quadrature of L f against the target law; ~0 iff the law is stationary.

    Computes sum over velocities of int L f(x, theta) exp(-U) dx on the
    tensor trapezoid grid, normalized by 2^d int exp(-U) dx.  Summing over
    the full velocity set cancels the positive-part kinks of the rates, so
    the integrand is as smooth as U and the trapezoid rule converges fast.
    A residual clearly away from zero flags a broken (potential, excess)
    pair, e.g. an excess rate that secretly depends on the sign it flips.
    """
    d = pot.dim
    axis = np.linspace(quad.lo, quad.hi, quad.n)
    h = axis[1] - axis[0]
    w1 = np.full(quad.n, h)
    w1[0] = w1[-1] = h / 2.0
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([w1] * d), indexing="ij")
    W = np.ones(X.shape[0])
    for m in wmesh:
        W = W * m.ravel()
    U = np.asarray(pot.value(X), dtype=float)
    shift = U.min()
    dens = np.exp(-(U - shift))
    z = float(W @ dens)

    gradU = np.asarray(pot.gradient(X), dtype=float)
    grad_fn = getattr(f, "gradient", None)
    total = 0.0
    for th in _all_velocities(d):
        TH = np.broadcast_to(th, X.shape)
        gradf = np.asarray(grad_fn(X, TH) if grad_fn is not None
                           else _fd_gradient(f, X, TH, fd_step), dtype=float)
        lf = np.sum(TH * gradf, axis=-1)
        rates = np.maximum(TH * gradU, 0.0)
        if ex is not None:
            rates = rates + ex.values(X, TH)
        base = np.asarray(f(X, TH), dtype=float)
        for j in range(d):
            flipped = TH.copy()
            flipped[:, j] = -flipped[:, j]
            lf = lf + rates[:, j] * (np.asarray(f(X, flipped), dtype=float) - base)
        total += float(W @ (lf * dens))
    return total / (2 ** d * z)
