"""A potential whose crest traps the sampler: switches die on the diagonal."""

import numpy as np

from zigzag import LyapunovParams, RidgeTarget, State, Velocity, drift_scan, rate_vector, simulate_skeleton
from zigzag.simulate import SimConfig

target = RidgeTarget(alpha=0.75)

# U = |x1 - x2|^(3/2) (1 + (x1 + x2)^2) is smooth off the diagonal but its
# gradient vanishes on it, so a trajectory riding the crest with matching
# velocity signs never accumulates switching intensity.

on_crest = State(np.zeros(2), Velocity([1.0, 1.0]))
print("rates on the crest:", rate_vector(target, None, on_crest))

skel = simulate_skeleton(target, None, on_crest,
                         SimConfig(horizon=1000.0, seed=0, method="thinning"))
final = skel.final_state()
print(f"T={skel.horizon:g} from the crest: {skel.n_events} switches, "
      f"final x = {final.x}, |x| = {np.linalg.norm(final.x):.1f}")

# one step off the diagonal everything switches normally
off_crest = State(np.array([0.5, -0.5]), Velocity([1.0, 1.0]))
print("\nrates just off the crest:", np.round(rate_vector(target, None, off_crest), 4))
skel_off = simulate_skeleton(target, None, off_crest,
                             SimConfig(horizon=1000.0, seed=0, method="thinning"))
print(f"same horizon from off-crest: {skel_off.n_events} switches, "
      f"final x = {np.round(skel_off.final_state().x, 3)}")

# no drift certificate can hold.  Exactly on the crest the candidate's
# generator ratio is not even defined (the curvature term hits an infinite
# second derivative), and probes arbitrarily close to it keep the ratio
# positive at every radius, so the scan withholds epsilon
from zigzag import drift_ratio

params = LyapunovParams(0.5, 0.5)
print(f"\n(LV)/V exactly on the crest: "
      f"{drift_ratio(target, None, params, State(np.array([2.0, 2.0]), Velocity([1.0, 1.0])))}")
rep = drift_scan(target, None, params, r_min=1.0,
                 r_max=50.0, n_radial=6, n_angular=8)
print(f"drift scan: epsilon = {rep.epsilon} "
      f"(worst finite ratio {np.nanmax(rep.ratios):+.2e}, stays positive)")

# a constant excess rate patches the trap: switches fire everywhere, at the
# price of extra randomness
from zigzag import ExcessRate

skel_fix = simulate_skeleton(target, ExcessRate.constant(0.2), on_crest,
                             SimConfig(horizon=1000.0, seed=0, method="thinning"))
print(f"\nwith excess rate 0.2 from the crest: {skel_fix.n_events} switches, "
      f"final |x| = {np.linalg.norm(skel_fix.final_state().x):.1f}")
