"""Built-in target potentials.

Four families with deliberately different regularity, used throughout the
tests and demos:

* GaussianTarget: U(x) = x.Ax/2 + b.x, smooth, affine gradient, the one
  family the exact simulation engine and the reachability constructions
  operate on.
* RidgeTarget: U(x1,x2) = |x1-x2|^(2a) (1 + |x1+x2|^2) for 1/2 < a < 1.
  The gradient vanishes on the diagonal x1 = x2, so a trajectory started
  there with a diagonal velocity never switches and escapes to infinity.
* MaxTarget: U(x1,x2) = max(|x1|, |x2|).  Piecewise linear; the gradient is
  constant on four quadrant-like regions and drives a cyclic switching
  pattern.
* PowerLawTarget: U(x) = (1 + |x|^2)^(a/2).  For a = 2 the curvature decays
  relative to the gradient (drift diagnostics succeed); for a = 1 the
  gradient-to-curvature ratio stalls at a positive constant.

All value/gradient/hessian methods are vectorized over leading axes:
input (..., d) produces (...,), (..., d) and (..., d, d) respectively.
"""

from __future__ import annotations

import json
from typing import Optional, Union

import numpy as np

from .core import Potential, State, Velocity, _check_index

__all__ = [
    "GaussianTarget",
    "RidgeTarget",
    "MaxTarget",
    "PowerLawTarget",
    "gaussian_rate_along",
    "target_from_config",
]


class GaussianTarget(Potential):
    """Gaussian potential U(x) = x.Ax/2 + b.x with A symmetric positive definite.

    grad U(x) = A x + b exactly, so along a ray x + t theta every
    pre-positive-part rate is affine in t and both the exact engine and the
    control constructions apply.  The density exp(-U) is the Gaussian with
    precision A and mean -A^{-1} b.
    """

    affine_gradient = True

    def __init__(self, precision, offset=None):
        A = np.asarray(precision, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"precision must be a square matrix, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("precision matrix must be symmetric")
        try:
            np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise ValueError("precision matrix must be positive definite") from None
        self.A = 0.5 * (A + A.T)
        self.A.flags.writeable = False
        self.dim = A.shape[0]
        if offset is None:
            offset = np.zeros(self.dim)
        b = np.asarray(offset, dtype=float)
        if b.shape != (self.dim,):
            raise ValueError(f"offset must have shape ({self.dim},), got {b.shape}")
        self.b = b.copy()
        self.b.flags.writeable = False

    def value(self, x):
        x = np.asarray(x, dtype=float)
        quad = 0.5 * np.einsum("...i,ij,...j->...", x, self.A, x)
        return quad + x @ self.b

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.A + self.b

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.A, x.shape[:-1] + (self.dim, self.dim)).copy()

    @property
    def mean(self) -> np.ndarray:
        return np.linalg.solve(self.A, -self.b)

    def rate_along(self, s: State):
        """Affine rate coefficients along the ray from s.

        Returns (c, m) vectors with lambda_i(x + t theta, theta) equal to
        (c_i + m_i t)_+ for all t >= 0.
        """
        th = s.theta.as_array()
        c = th * (self.A @ s.x + self.b)
        m = th * (self.A @ th)
        return c, m

    def rate_bound(self, x, theta, delta, n_samples=None):
        """Exact segment bound: an affine rate's positive part peaks at an endpoint."""
        th = theta.as_array() if isinstance(theta, Velocity) else np.asarray(theta, float)
        x = np.asarray(x, dtype=float)
        if delta <= 0:
            raise ValueError(f"window length must be positive, got {delta}")
        c = th * (self.A @ x + self.b)
        m = th * (self.A @ th)
        return np.maximum(np.maximum(c, 0.0), np.maximum(c + m * delta, 0.0))

    def to_config(self) -> dict:
        return {"family": "gaussian", "precision": self.A.tolist(),
                "offset": self.b.tolist()}


def gaussian_rate_along(tgt: GaussianTarget, s: State, i: int):
    """(c, m) of component i's rate (c + m t)_+ along the ray from s."""
    i = _check_index(i, s.d)
    c, m = tgt.rate_along(s)
    return float(c[i - 1]), float(m[i - 1])


def _masked_power(base: np.ndarray, exponent: float, at_zero: float) -> np.ndarray:
    """base**exponent with an explicit value where base == 0 (exponent may be < 0)."""
    safe = np.where(base > 0, base, 1.0)
    out = safe ** exponent
    return np.where(base > 0, out, at_zero)


class RidgeTarget(Potential):
    """Ridge potential U(x1,x2) = |x1-x2|^(2a) (1 + |x1+x2|^2), 1/2 < a < 1.

    U is continuously differentiable (2a > 1) with gradient exactly zero on
    the diagonal x1 = x2, but not twice differentiable there: the second
    derivative across the ridge scales like |x1-x2|^(2a-2) and diverges.
    hessian() reports that divergence as inf entries on the diagonal.
    """

    dim = 2

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not 0.5 < alpha < 1.0:
            raise ValueError(f"ridge exponent must satisfy 1/2 < alpha < 1, got {alpha}")
        self.alpha = alpha

    def _uv(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise ValueError(f"ridge potential is 2-D, got trailing dim {x.shape[-1]}")
        return x[..., 0] - x[..., 1], x[..., 0] + x[..., 1]

    def value(self, x):
        u, v = self._uv(x)
        return np.abs(u) ** (2 * self.alpha) * (1.0 + v * v)

    def gradient(self, x):
        a = self.alpha
        u, v = self._uv(x)
        au = np.abs(u)
        # dU/du -> 0 as u -> 0 because 2a - 1 > 0; pin it exactly.
        du = 2 * a * np.sign(u) * _masked_power(au, 2 * a - 1, 0.0) * (1.0 + v * v)
        dv = 2 * v * au ** (2 * a)
        return np.stack([du + dv, -du + dv], axis=-1)

    def hessian(self, x):
        a = self.alpha
        u, v = self._uv(x)
        au = np.abs(u)
        uu = 2 * a * (2 * a - 1) * _masked_power(au, 2 * a - 2, np.inf) * (1.0 + v * v)
        uv = 4 * a * v * np.sign(u) * _masked_power(au, 2 * a - 1, 0.0)
        vv = 2 * au ** (2 * a)
        h11 = uu + 2 * uv + vv
        h12 = vv - uu
        h22 = uu - 2 * uv + vv
        row1 = np.stack([h11, h12], axis=-1)
        row2 = np.stack([h12, h22], axis=-1)
        return np.stack([row1, row2], axis=-2)

    def to_config(self) -> dict:
        return {"family": "ridge", "alpha": self.alpha}


class MaxTarget(Potential):
    """Sup-norm potential U(x1,x2) = max(|x1|, |x2|) on R^2.

    The plane splits into four open regions by the two diagonals:
    region 1 where x1 > |x2| (gradient (+1, 0)), region 2 where x2 > |x1|
    (gradient (0, +1)), region 3 where x1 < -|x2| (gradient (-1, 0)) and
    region 4 where x2 < -|x1| (gradient (0, -1)).  On the diagonals the
    gradient does not exist; by convention the region-1 limit (+1, 0) is
    returned there, which keeps the gradient's sup norm equal to 1
    everywhere.  The Hessian is zero on every region interior and is
    reported as zero everywhere under the same convention.
    """

    dim = 2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 2:
            raise ValueError(f"max potential is 2-D, got trailing dim {x.shape[-1]}")
        return np.maximum(np.abs(x[..., 0]), np.abs(x[..., 1]))

    def region(self, x) -> np.ndarray:
        """Region label 1..4; boundary points report 1 by convention."""
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        labels = np.select(
            [x2 > np.abs(x1), x1 < -np.abs(x2), x2 < -np.abs(x1)],
            [2, 3, 4],
            default=1,
        )
        return labels

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        labels = self.region(x)
        g1 = np.select([labels == 1, labels == 3], [1.0, -1.0], default=0.0)
        g2 = np.select([labels == 2, labels == 4], [1.0, -1.0], default=0.0)
        return np.stack([g1, g2], axis=-1)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (2, 2))

    def to_config(self) -> dict:
        return {"family": "max"}


class PowerLawTarget(Potential):
    """Polynomial-tail potential U(x) = (1 + |x|^2)^(a/2) in any dimension."""

    def __init__(self, alpha: float, dim: int):
        alpha = float(alpha)
        if alpha <= 0 or not np.isfinite(alpha):
            raise ValueError(f"power-law exponent must be positive, got {alpha}")
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"dimension must be >= 1, got {dim}")
        self.alpha = alpha
        self.dim = dim

    def _q(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(
                f"power-law potential has d={self.dim}, got trailing dim {x.shape[-1]}")
        return x, 1.0 + np.sum(x * x, axis=-1)

    def value(self, x):
        _, q = self._q(x)
        return q ** (self.alpha / 2.0)

    def gradient(self, x):
        x, q = self._q(x)
        return self.alpha * q[..., None] ** (self.alpha / 2.0 - 1.0) * x

    def hessian(self, x):
        a = self.alpha
        x, q = self._q(x)
        eye = np.eye(self.dim)
        term1 = a * q[..., None, None] ** (a / 2.0 - 1.0) * eye
        outer = x[..., :, None] * x[..., None, :]
        term2 = a * (a - 2.0) * q[..., None, None] ** (a / 2.0 - 2.0) * outer
        return term1 + term2

    def to_config(self) -> dict:
        return {"family": "powerlaw", "alpha": self.alpha, "dim": self.dim}


_FAMILIES = {"gaussian", "ridge", "max", "powerlaw"}


def target_from_config(config: Union[dict, str]) -> Potential:
    """Build a target from a config mapping or its JSON text.

    The mapping must carry "family" (one of gaussian, ridge, max, powerlaw)
    plus that family's parameters: gaussian takes "precision" (row-major
    d x d) and optional "offset", ridge and powerlaw take "alpha", powerlaw
    additionally takes "dim".  Unknown keys are rejected so typos fail fast.
    """
    if isinstance(config, str):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as err:
            raise ValueError(
                f"target config is not valid JSON (line {err.lineno}, "
                f"column {err.colno}): {err.msg}") from None
    if not isinstance(config, dict):
        raise ValueError(f"target config must be a JSON object, got {type(config).__name__}")
    family = config.get("family")
    if family not in _FAMILIES:
        raise ValueError(
            f"unknown target family {family!r}; expected one of {sorted(_FAMILIES)}")
    allowed = {
        "gaussian": {"family", "precision", "offset"},
        "ridge": {"family", "alpha"},
        "max": {"family"},
        "powerlaw": {"family", "alpha", "dim"},
    }[family]
    extra = set(config) - allowed
    if extra:
        raise ValueError(f"unexpected keys for family {family!r}: {sorted(extra)}")
    if family == "gaussian":
        if "precision" not in config:
            raise ValueError('gaussian config requires "precision"')
        return GaussianTarget(config["precision"], config.get("offset"))
    if family == "ridge":
        if "alpha" not in config:
            raise ValueError('ridge config requires "alpha"')
        return RidgeTarget(config["alpha"])
    if family == "max":
        return MaxTarget()
    if "alpha" not in config or "dim" not in config:
        raise ValueError('powerlaw config requires "alpha" and "dim"')
    return PowerLawTarget(config["alpha"], config["dim"])
