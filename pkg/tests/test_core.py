import math

import numpy as np
import pytest

from zigzag import (ExcessRate, Skeleton, SkeletonEvent, State, Velocity,
                    canonical_rate, flip, flip_seq, log_density, rate_vector,
                    unnormalized_density)
from conftest import random_state, random_velocity


class TestVelocity:
    def test_valid_signs(self):
        v = Velocity([1.0, -1.0, 1.0])
        assert v.d == 3
        assert v.as_tuple() == (1, -1, 1)

    def test_rejects_non_sign_entries(self):
        with pytest.raises(ValueError):
            Velocity([1.0, 0.5])
        with pytest.raises(ValueError):
            Velocity([0.0])

    def test_immutable(self):
        v = Velocity([1.0, -1.0])
        with pytest.raises(ValueError):
            v.signs[0] = -1.0

    def test_flip_is_new_object(self):
        v = Velocity([1.0, -1.0])
        w = v.flip(1)
        assert w.as_tuple() == (-1, -1)
        assert v.as_tuple() == (1, -1)

    def test_equality_and_hash(self):
        assert Velocity([1.0, -1.0]) == Velocity([1.0, -1.0])
        assert Velocity([1.0, -1.0]) != Velocity([1.0, 1.0])
        assert len({Velocity([1.0]), Velocity([1.0]), Velocity([-1.0])}) == 2


class TestFlip:
    def test_one_based_indices(self):
        v = Velocity([1.0, 1.0, 1.0])
        assert flip(v, 1).as_tuple() == (-1, 1, 1)
        assert flip(v, 3).as_tuple() == (1, 1, -1)

    def test_index_out_of_range(self):
        v = Velocity([1.0, 1.0])
        for bad in (0, 3, -1):
            with pytest.raises(IndexError):
                flip(v, bad)

    def test_flip_seq_applies_in_order(self):
        v = Velocity([1.0, 1.0])
        assert flip_seq(v, (1, 2, 1)).as_tuple() == (1, -1)

    def test_flip_seq_involution(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            d = int(rng.integers(1, 6))
            v = random_velocity(rng, d)
            seq = list(rng.integers(1, d + 1, size=7))
            assert flip_seq(flip_seq(v, seq), seq[::-1]) == v


class TestState:
    def test_requires_finite_position(self):
        with pytest.raises(ValueError):
            State(np.array([1.0, np.inf]), Velocity([1.0, 1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            State(np.array([1.0, 2.0]), Velocity([1.0]))

    def test_theta_coerced_to_velocity(self):
        s = State(np.array([0.0]), [-1.0])
        assert isinstance(s.theta, Velocity)
        assert s.d == 1


class TestExcessRate:
    def test_zero_and_constant(self):
        z = ExcessRate.zero()
        assert z.is_constant and z.constant_value == 0.0
        c = ExcessRate.constant(0.7)
        vals = c.values(np.zeros(3), Velocity([1.0, 1.0, 1.0]))
        assert np.all(vals == 0.7)

    def test_negative_constant_rejected(self):
        with pytest.raises(ValueError):
            ExcessRate.constant(-0.1)

    def test_negative_values_rejected(self):
        bad = ExcessRate(lambda x, th: np.full(np.shape(x), -1.0), gamma_bar=1.0)
        with pytest.raises(ValueError):
            bad.values(np.zeros(2), Velocity([1.0, 1.0]))

    def test_bound_violation_rejected(self):
        liar = ExcessRate(lambda x, th: np.full(np.shape(x), 2.0), gamma_bar=1.0)
        with pytest.raises(ValueError):
            liar.values(np.zeros(2), Velocity([1.0, 1.0]))


class TestRates:
    def test_canonical_rate_positive_part(self, std1d):
        up = State(np.array([2.0]), Velocity([1.0]))
        down = State(np.array([-3.0]), Velocity([1.0]))
        assert canonical_rate(std1d, up, 1) == 2.0
        assert canonical_rate(std1d, down, 1) == 0.0

    def test_rate_vector_adds_excess(self, std2d):
        s = State(np.array([1.0, -2.0]), Velocity([1.0, 1.0]))
        base = rate_vector(std2d, None, s)
        assert np.array_equal(base, [1.0, 0.0])
        shifted = rate_vector(std2d, ExcessRate.constant(0.5), s)
        assert np.array_equal(shifted, [1.5, 0.5])

    def test_rate_difference_identity_all_families(
            self, std1d, coupled2d, ridge, maxpot, powerlaw2, symmetric_excess):
        """lambda_i(x, theta) - lambda_i(x, flip_i theta) = theta_i dU_i(x)."""
        rng = np.random.default_rng(7)
        for pot in (std1d, coupled2d, ridge, maxpot, powerlaw2):
            for _ in range(200):
                s = random_state(rng, pot.dim)
                grad = np.asarray(pot.gradient(s.x), dtype=float)
                lam = rate_vector(pot, symmetric_excess, s)
                for i in range(1, s.d + 1):
                    flipped = State(s.x, flip(s.theta, i))
                    lam_f = rate_vector(pot, symmetric_excess, flipped)
                    lhs = lam[i - 1] - lam_f[i - 1]
                    rhs = s.theta.signs[i - 1] * grad[i - 1]
                    assert abs(lhs - rhs) <= 1e-12

    def test_ridge_crest_rates_vanish(self, ridge):
        s = State(np.array([1.0, 1.0]), Velocity([1.0, -1.0]))
        assert np.array_equal(rate_vector(ridge, None, s), [0.0, 0.0])
        assert canonical_rate(ridge, s, 1) == 0.0


class TestDensity:
    def test_log_density_is_negative_potential(self, std1d):
        assert log_density(std1d, [2.0]) == -2.0

    def test_unnormalized_density_overflow(self, std1d):
        assert unnormalized_density(std1d, [0.0]) == 1.0
        grow = GaussianLike()
        with pytest.raises(OverflowError):
            unnormalized_density(grow, [0.0])


class GaussianLike:
    """Potential stub whose density overflows exp()."""

    dim = 1

    def value(self, x):
        return np.asarray(-800.0)


class TestSkeleton:
    def setup_method(self):
        self.init = State(np.zeros(2), Velocity([1.0, -1.0]))

    def test_array_form_and_derived_flow(self):
        sk = Skeleton(self.init, [1.0, 3.0], [2, 1], horizon=4.0)
        assert sk.n_events == 2
        evs = sk.events
        assert [ev.index for ev in evs] == [2, 1]
        assert np.array_equal(evs[0].x, [1.0, -1.0])
        assert evs[0].theta.as_tuple() == (1, 1)
        assert np.array_equal(evs[1].x, [3.0, 1.0])
        assert evs[1].theta.as_tuple() == (-1, 1)
        final = sk.final_state()
        assert np.array_equal(final.x, [2.0, 2.0])
        assert final.theta.as_tuple() == (-1, 1)

    def test_rejects_nonincreasing_times(self):
        with pytest.raises(ValueError):
            Skeleton(self.init, [1.0, 1.0], [1, 2], horizon=4.0)
        with pytest.raises(ValueError):
            Skeleton(self.init, [0.0], [1], horizon=4.0)

    def test_rejects_times_beyond_horizon(self):
        with pytest.raises(ValueError):
            Skeleton(self.init, [5.0], [1], horizon=4.0)

    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            Skeleton(self.init, [1.0], [0], horizon=4.0)
        with pytest.raises(ValueError):
            Skeleton(self.init, [1.0], [3], horizon=4.0)

    def test_from_events_checks_consistency(self):
        good = [SkeletonEvent(1.0, 2, np.array([1.0, -1.0]), Velocity([1.0, 1.0]))]
        sk = Skeleton.from_events(self.init, good, horizon=2.0)
        assert sk.n_events == 1
        off_flow = [SkeletonEvent(1.0, 2, np.array([9.0, -1.0]), Velocity([1.0, 1.0]))]
        with pytest.raises(ValueError, match="off the linear flow"):
            Skeleton.from_events(self.init, off_flow, horizon=2.0)
        wrong_theta = [SkeletonEvent(1.0, 2, np.array([1.0, -1.0]), Velocity([-1.0, 1.0]))]
        with pytest.raises(ValueError, match="velocity disagrees"):
            Skeleton.from_events(self.init, wrong_theta, horizon=2.0)

    def test_empty_skeleton_final_state(self):
        sk = Skeleton(self.init, [], [], horizon=7.0)
        assert sk.n_events == 0
        assert np.array_equal(sk.final_state().x, [7.0, -7.0])
