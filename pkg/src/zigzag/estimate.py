"""Time-average estimators over simulated trajectories.

Path averages here are exact path integrals divided by elapsed time, not
discretized sums over the event skeleton, so the only error sources are the
quadrature order (exact for polynomial observables up to degree 15 per
segment) and Monte Carlo noise.  batch_means turns one long trajectory into
an asymptotic-variance estimate and a normal confidence interval; the CLT
behind it needs the observable to be square integrable under the target and
the chain to mix, neither of which the code can verify, so treat intervals
on heavy-tailed targets with suspicion.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .simulate import Skeleton, integrate_along

__all__ = ["BatchMeansResult", "ergodic_average", "batch_means"]


def ergodic_average(skel: Skeleton, g) -> float:
    """Path average (1/T) int_0^T g(x(t), theta(t)) dt over the whole skeleton.

    g must be vectorized: (n, d) positions and velocities to (n,) values
    (wrap scalar callables with simulate.pointwise).  Truncated skeletons are
    rejected; a trajectory cut short by an event cap is biased toward its
    start and silently averaging it would hide that.
    """
    if skel.truncated:
        raise ValueError("skeleton was truncated before its horizon; "
                         "rerun with a higher max_events")
    if skel.horizon <= 0:
        raise ValueError("skeleton has zero duration")
    return integrate_along(skel, g, skel.horizon)


@dataclass(frozen=True)
class BatchMeansResult:
    """Batch-means summary of one trajectory.

    sigma_hat estimates the asymptotic standard deviation sqrt(T Var(mean)),
    ci_low/ci_high bound the mean at 95% under a CLT, batch_values holds the
    per-window averages behind the variance estimate.  nonstationary_flag is
    a crude drift alarm: it fires when the window means are strictly
    monotone across all batches, which a mixing chain essentially never
    produces (probability 2/n! under exchangeability).
    """

    mean: float
    sigma_hat: float
    ci_low: float
    ci_high: float
    n_batches: int
    batch_values: tuple
    nonstationary_flag: bool

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sigma_hat": self.sigma_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_batches": self.n_batches,
            "nonstationary_flag": self.nonstationary_flag,
            "batch_values": list(self.batch_values),
        }


def batch_means(skel: Skeleton, g, n_batches: int = 30) -> BatchMeansResult:
    """Split [0, T] into equal windows and estimate mean, variance and a CI.

    With A_k the average of g over window k, the asymptotic variance
    estimate is sigma_hat^2 = (T / n) Var(A_k) (ddof=1), and the interval is
    mean +- 1.96 sigma_hat / sqrt(T).  Windows are contiguous in time, so
    the split costs nothing beyond one pass over the skeleton segments.
    """
    if skel.truncated:
        raise ValueError("skeleton was truncated before its horizon; "
                         "rerun with a higher max_events")
    if n_batches < 2:
        raise ValueError(f"need at least 2 batches, got {n_batches}")
    T = skel.horizon
    if T <= 0:
        raise ValueError("skeleton has zero duration")
    edges = np.linspace(0.0, T, n_batches + 1)
    # integrate_along returns time averages; scale back to raw integrals so
    # window integrals come out as differences
    cum = [0.0] + [integrate_along(skel, g, float(e)) * float(e) for e in edges[1:]]
    width = T / n_batches
    batch = np.diff(cum) / width
    mean = cum[-1] / T

    sigma_hat = float(np.sqrt(width * np.var(batch, ddof=1)))
    half = 1.96 * sigma_hat / np.sqrt(T)

    diffs = np.diff(batch)
    monotone = bool(np.all(diffs > 0) or np.all(diffs < 0))
    if monotone:
        warnings.warn("batch means are strictly monotone; the trajectory "
                      "looks transient, not stationary", RuntimeWarning)
    return BatchMeansResult(
        mean=float(mean),
        sigma_hat=sigma_hat,
        ci_low=float(mean - half),
        ci_high=float(mean + half),
        n_batches=n_batches,
        batch_values=tuple(float(b) for b in batch),
        nonstationary_flag=monotone,
    )
