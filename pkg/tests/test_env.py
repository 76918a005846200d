import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qepi.env import ContState, EnvParams, goal_reached, rollout, step

P = EnvParams()


class TestStep:
    def test_push_right_from_valley_floor(self):
        s, r, done = step(ContState(-0.5, 0.0), 2)
        expected_v = 0.001 - 0.0025 * math.cos(-1.5)
        assert s.velocity == pytest.approx(expected_v, abs=1e-15)
        assert s.velocity == pytest.approx(0.0008232, abs=1e-7)
        assert s.position == pytest.approx(-0.5 + expected_v)
        assert (r, done) == (-1.0, False)

    def test_coast_at_equilibrium(self):
        # cos(3x) = 0 at x = -pi/6, so coasting from rest keeps the car still
        s, r, done = step(ContState(-math.pi / 6, 0.0), 1)
        assert abs(s.velocity) < 1e-15
        assert not done

    def test_goal_is_terminal_with_zero_reward(self):
        s, r, done = step(ContState(0.49, 0.02), 2)
        assert s.position >= 0.5
        assert (r, done) == (0.0, True)

    def test_left_wall_zeroes_velocity(self):
        s, _, _ = step(ContState(-1.19, -0.07), 0)
        assert s.position == P.position_min
        assert s.velocity == 0.0

    def test_left_wall_keeps_velocity_without_reset(self):
        s, _, _ = step(ContState(-1.19, -0.07), 0, EnvParams(wall_reset=False))
        assert s.position == P.position_min
        assert s.velocity < 0

    @pytest.mark.parametrize("a", [-1, 3, 1.5])
    def test_invalid_action(self, a):
        with pytest.raises(ValueError):
            step(ContState(0.0, 0.0), a)


class TestParams:
    def test_rejects_goal_outside_track(self):
        with pytest.raises(ValueError):
            EnvParams(goal_position=1.0)

    def test_round_trip_through_strings(self):
        d = {k: str(v) for k, v in EnvParams(force=0.002).to_dict().items()}
        assert EnvParams.from_dict(d) == EnvParams(force=0.002)


class TestRollout:
    def test_start_at_goal(self):
        traj, total, reached = rollout(lambda s: 1, ContState(0.55, 0.0))
        assert reached and total == 0.0 and len(traj) == 1

    def test_coasting_never_reaches_goal(self):
        traj, total, reached = rollout(lambda s: 1, ContState(-0.5, 0.0), max_steps=50)
        assert not reached
        assert total == -50.0 and len(traj) == 51

    def test_bang_bang_reaches_goal(self):
        policy = lambda s: 2 if s.velocity >= 0 else 0
        _, _, reached = rollout(policy, ContState(-0.5, 0.0), max_steps=400)
        assert reached


@given(
    x=st.floats(-1.2, 0.6),
    v=st.floats(-0.07, 0.07),
    a=st.sampled_from([0, 1, 2]),
)
def test_step_stays_in_bounds(x, v, a):
    s, r, done = step(ContState(x, v), a)
    assert P.position_min <= s.position <= P.position_max
    assert P.velocity_min <= s.velocity <= P.velocity_max
    assert done == goal_reached(s)
    assert r == (0.0 if done else -1.0)
