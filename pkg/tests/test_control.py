from fractions import Fraction

import numpy as np
import pytest

from zigzag import (ControlSequence, GaussianTarget, State, Velocity,
                    apply_control, build_reach_control, build_reversal_control,
                    check_admissible, concat_controls, escalate_to_flippable,
                    flip_seq, flippable_set, reverse_control, simulate_skeleton)
from zigzag.simulate import SimConfig
from conftest import random_spd, random_velocity


class TestControlSequence:
    def test_shape_validation(self):
        ControlSequence((1.0,), ())
        ControlSequence((1.0, 2.0), (1,))
        with pytest.raises(ValueError):
            ControlSequence((1.0, 2.0), ())        # one duration too many
        with pytest.raises(ValueError):
            ControlSequence((0.0, 2.0), (1,))      # zero duration
        with pytest.raises(ValueError):
            ControlSequence((1.0, 2.0), (0,))      # bad 1-based index

    def test_totals(self):
        u = ControlSequence((1.0, 2.0, 0.5), (2, 1))
        assert u.n_switches == 2
        assert u.total_time == 3.5

    def test_json_round_trip(self):
        u = ControlSequence((1.0, 2.0), (2,))
        v = ControlSequence.from_json_dict(u.to_json_dict())
        assert v.times == u.times and v.indices == u.indices

    def test_json_unknown_keys(self):
        with pytest.raises(ValueError):
            ControlSequence.from_json_dict({"times": [1.0], "indices": [],
                                            "speed": 2})


class TestApplyControl:
    def test_walk_oracle(self):
        s = State(np.array([0.0, 0.0]), Velocity([1.0, -1.0]))
        u = ControlSequence((1.0, 2.0, 1.0), (2, 1))
        end = apply_control(s, u)
        assert np.array_equal(end.x, [2.0, 2.0])
        assert end.theta.as_tuple() == (-1, 1)

    def test_endpoint_is_correctly_rounded(self):
        """fsum accumulation reproduces exact rational arithmetic per axis."""
        rng = np.random.default_rng(31)
        for _ in range(50):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(0, 9))
            times = tuple(float(v) for v in rng.uniform(0.01, 7.0, size=m + 1))
            indices = tuple(int(v) for v in rng.integers(1, d + 1, size=m))
            s = State(rng.standard_normal(d), random_velocity(rng, d))
            end = apply_control(s, ControlSequence(times, indices))
            th = s.theta.as_array()
            for axis in range(d):
                exact = Fraction(float(s.x[axis]))
                sign = Fraction(int(th[axis]))
                for k, t in enumerate(times):
                    exact += sign * Fraction(t)
                    if k < m and indices[k] == axis + 1:
                        sign = -sign
                assert end.x[axis] == float(exact)

    def test_final_velocity_matches_flip_sequence(self):
        s = State(np.zeros(3), Velocity([1.0, 1.0, -1.0]))
        u = ControlSequence((1.0, 1.0, 1.0, 1.0), (3, 1, 3))
        end = apply_control(s, u)
        assert end.theta == flip_seq(s.theta, (3, 1, 3))


class TestAdmissibility:
    def test_switch_rate_oracle(self, coupled2d):
        # from (-2,1) with signs (+1,-1): after t=1 the pre-switch rate of
        # component 2 is (-1) * (A x)_2 = 3 at x = (-1, 0)
        s = State(np.array([-2.0, 1.0]), Velocity([1.0, -1.0]))
        u = ControlSequence((1.0, 1.0), (2,))
        rep = check_admissible(coupled2d, None, s, u)
        assert rep.admissible
        assert rep.min_rate == 3.0
        assert rep.switch_rates == (3.0,)

    def test_zero_rate_switch_is_inadmissible(self, coupled2d):
        # component 2's rate hits zero exactly at t=4 along this ray
        s = State(np.array([-2.0, 1.0]), Velocity([1.0, -1.0]))
        u = ControlSequence((4.0, 1.0), (2,))
        rep = check_admissible(coupled2d, None, s, u)
        assert not rep.admissible
        assert rep.min_rate == 0.0

    def test_empty_control_is_admissible(self, coupled2d):
        s = State(np.zeros(2), Velocity([1.0, 1.0]))
        rep = check_admissible(coupled2d, None, s, ControlSequence((2.0,), ()))
        assert rep.admissible
        assert rep.min_rate == np.inf
        assert rep.switch_rates == ()

    def test_simulated_skeletons_are_admissible_controls(self, coupled2d):
        """Switches sampled by the engine happen at strictly positive rates,
        so every simulated trajectory replays as an admissible control."""
        rng_seeds = (3, 4, 5)
        init = State(np.array([0.5, -0.5]), Velocity([1.0, 1.0]))
        for seed in rng_seeds:
            skel = simulate_skeleton(coupled2d, None, init,
                                     SimConfig(horizon=30.0, seed=seed))
            assert skel.n_events >= 3
            durations = np.diff(np.concatenate(
                ([0.0], skel.event_times, [skel.horizon])))
            u = ControlSequence(tuple(durations), tuple(skel.event_indices))
            rep = check_admissible(coupled2d, None, init, u)
            assert rep.admissible
            assert rep.min_rate > 0.0
            end = apply_control(init, u)
            assert np.allclose(end.x, skel.final_state().x, rtol=0, atol=1e-9)
            assert end.theta == skel.final_state().theta


class TestReversal:
    def test_reverse_twice_is_identity(self):
        u = ControlSequence((1.0, 2.0, 3.0), (1, 2))
        assert reverse_control(reverse_control(u)) == u

    def test_reversed_walk_returns_home(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(0, 7))
            u = ControlSequence(tuple(rng.uniform(0.1, 3.0, size=m + 1)),
                                tuple(int(v) for v in rng.integers(1, d + 1, size=m)))
            s = State(rng.standard_normal(d), random_velocity(rng, d))
            end = apply_control(s, u)
            back = apply_control(State(end.x, Velocity(-end.theta.as_array())),
                                 reverse_control(u))
            assert np.allclose(back.x, s.x, rtol=0, atol=1e-12)
            assert back.theta == Velocity(-s.theta.as_array())

    def test_reversed_switch_rates_match(self, coupled2d):
        """Canonical switch rates are invariant under path reversal."""
        rng = np.random.default_rng(12)
        init = State(np.array([0.5, -0.5]), Velocity([1.0, 1.0]))
        skel = simulate_skeleton(coupled2d, None, init, SimConfig(horizon=20.0, seed=12))
        durations = np.diff(np.concatenate(([0.0], skel.event_times, [skel.horizon])))
        u = ControlSequence(tuple(durations), tuple(skel.event_indices))
        fwd = check_admissible(coupled2d, None, init, u)
        end = skel.final_state()
        rev = check_admissible(coupled2d, None,
                               State(end.x, Velocity(-end.theta.as_array())),
                               reverse_control(u))
        assert rev.admissible == fwd.admissible
        assert np.allclose(rev.switch_rates, fwd.switch_rates[::-1],
                           rtol=1e-9, atol=1e-9)


class TestConcat:
    def test_boundary_durations_merge(self):
        u = ControlSequence((1.0, 2.0), (1,))
        v = ControlSequence((3.0, 0.5), (2,))
        w = concat_controls(u, v)
        assert w.times == (1.0, 5.0, 0.5)
        assert w.indices == (1, 2)
        assert w.total_time == u.total_time + v.total_time

    def test_concat_equals_sequential_application(self):
        rng = np.random.default_rng(14)
        for _ in range(25):
            d = 3
            mk = lambda m: ControlSequence(
                tuple(rng.uniform(0.1, 2.0, size=m + 1)),
                tuple(int(v) for v in rng.integers(1, d + 1, size=m)))
            u, v = mk(int(rng.integers(0, 4))), mk(int(rng.integers(0, 4)))
            s = State(rng.standard_normal(d), random_velocity(rng, d))
            one = apply_control(apply_control(s, u), v)
            two = apply_control(s, concat_controls(u, v))
            assert np.allclose(one.x, two.x, rtol=0, atol=1e-12)
            assert one.theta == two.theta


class TestEscalation:
    def test_flippable_set_oracles(self):
        A = np.array([[6.0, 3.0], [3.0, 2.0]])
        assert flippable_set(A, Velocity([1.0, -1.0])) == (1,)
        assert flippable_set(A, Velocity([-1.0, -1.0])) == (1, 2)
        assert flippable_set(A, Velocity([1.0, 1.0])) == (1, 2)

    def test_escalation_oracle(self):
        A = np.array([[6.0, 3.0], [3.0, 2.0]])
        eta, hist = escalate_to_flippable(A, Velocity([1.0, -1.0]))
        assert eta.as_tuple() == (-1, -1)
        assert hist.steps == ((1,),)
        assert hist.quad_forms == (2.0, 14.0)

    def test_already_flippable_is_a_fixed_point(self):
        A = np.array([[6.0, 3.0], [3.0, 2.0]])
        eta, hist = escalate_to_flippable(A, Velocity([-1.0, -1.0]))
        assert eta.as_tuple() == (-1, -1)
        assert hist.steps == ()
        assert hist.quad_forms == (14.0,)

    def test_quad_forms_strictly_increase(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            d = int(rng.integers(1, 7))
            A = random_spd(rng, d)
            theta = random_velocity(rng, d)
            eta, hist = escalate_to_flippable(A, theta)
            qf = hist.quad_forms
            assert all(a < b for a, b in zip(qf, qf[1:]))
            assert flippable_set(A, eta) == tuple(range(1, d + 1))
            assert len(hist.steps) <= 2 ** d

    def test_non_spd_rejected(self):
        with pytest.raises(ValueError):
            escalate_to_flippable(np.array([[1.0, 2.0], [2.0, 1.0]]),
                                  Velocity([1.0, 1.0]))
        with pytest.raises(ValueError):
            flippable_set(np.array([[0.0]]), Velocity([1.0]))


class TestReversalControl:
    def test_structural_oracle(self):
        u = build_reversal_control(np.eye(2), np.zeros(2), np.zeros(2),
                                   Velocity([1.0, 1.0]), np.array([3.0, 1.0]))
        assert u.indices == (2, 1)          # farthest coordinate flips first
        assert u.times[1] == 1.0            # half the offset spread
        assert u.times[0] - u.times[2] == 2.0
        end = apply_control(State(np.zeros(2), Velocity([1.0, 1.0])), u)
        assert np.array_equal(end.x, [3.0, 1.0])
        assert end.theta.as_tuple() == (-1, -1)

    def test_coincident_offsets_take_detour(self):
        # target straight ahead: equal per-axis travel, served by extra legs
        u = build_reversal_control(np.eye(2), np.zeros(2), np.zeros(2),
                                   Velocity([1.0, 1.0]), np.array([2.0, 2.0]))
        end = apply_control(State(np.zeros(2), Velocity([1.0, 1.0])), u)
        assert np.allclose(end.x, [2.0, 2.0], rtol=0, atol=1e-8)
        assert end.theta.as_tuple() == (-1, -1)
        assert u.n_switches > 2

    def test_requires_fully_flippable_velocity(self):
        A = np.array([[6.0, 3.0], [3.0, 2.0]])
        with pytest.raises(ValueError, match="flippable"):
            build_reversal_control(A, np.zeros(2), np.zeros(2),
                                   Velocity([1.0, -1.0]), np.array([1.0, 2.0]))

    def test_admissible_under_its_own_gaussian(self):
        rng = np.random.default_rng(40)
        for _ in range(40):
            d = int(rng.integers(1, 5))
            A = random_spd(rng, d)
            b = rng.standard_normal(d)
            tgt = GaussianTarget(A, offset=b)
            eta, _ = escalate_to_flippable(A, random_velocity(rng, d))
            x = rng.standard_normal(d)
            x_tgt = rng.standard_normal(d)
            u = build_reversal_control(A, b, x, eta, x_tgt)
            end = apply_control(State(x, eta), u)
            assert np.max(np.abs(end.x - x_tgt)) < 1e-8
            assert end.theta == Velocity(-eta.as_array())
            rep = check_admissible(tgt, None, State(x, eta), u)
            assert rep.admissible and rep.min_rate > 0


class TestReachControl:
    def test_connects_arbitrary_states(self):
        rng = np.random.default_rng(77)
        for _ in range(60):
            d = int(rng.integers(1, 7))
            A = random_spd(rng, d)
            b = rng.standard_normal(d)
            src = State(rng.standard_normal(d), random_velocity(rng, d))
            dst = State(rng.standard_normal(d), random_velocity(rng, d))
            u = build_reach_control(A, b, src, dst)
            end = apply_control(src, u)
            assert np.max(np.abs(end.x - dst.x)) < 1e-8
            assert end.theta == dst.theta
            rep = check_admissible(GaussianTarget(A, offset=b), None, src, u)
            assert rep.admissible and rep.min_rate > 0

    def test_identical_endpoints(self, coupled2d):
        s = State(np.array([1.0, -1.0]), Velocity([1.0, -1.0]))
        u = build_reach_control(coupled2d.A, coupled2d.b, s, s)
        end = apply_control(s, u)
        assert np.max(np.abs(end.x - s.x)) < 1e-8
        assert end.theta == s.theta

    def test_small_initial_guess_still_succeeds(self, coupled2d):
        src = State(np.array([-2.0, 1.0]), Velocity([1.0, -1.0]))
        dst = State(np.array([3.0, 0.5]), Velocity([-1.0, 1.0]))
        u = build_reach_control(coupled2d.A, coupled2d.b, src, dst, T_init=0.125)
        end = apply_control(src, u)
        assert np.max(np.abs(end.x - dst.x)) < 1e-8

    def test_non_spd_rejected(self):
        s = State(np.zeros(2), Velocity([1.0, 1.0]))
        with pytest.raises(ValueError):
            build_reach_control(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2), s, s)
