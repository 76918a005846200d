"""Continuous mountain-car dynamics.

One call to :func:`step` advances the car by a unit time step::

    v' = clip(v + (a - 1) * force - gravity * cos(3 x))
    x' = clip(x + v')

The car is penalized with ``step_reward`` on every step until its position
reaches ``goal_position``; that step yields reward 0 and terminates.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple


ACTIONS = (0, 1, 2)


@dataclass(frozen=True)
class EnvParams:
    force: float = 0.001
    gravity: float = 0.0025
    position_min: float = -1.2
    position_max: float = 0.6
    velocity_min: float = -0.07
    velocity_max: float = 0.07
    goal_position: float = 0.5
    step_reward: float = -1.0
    action_count: int = 3
    wall_reset: bool = True

    def __post_init__(self):
        if not self.position_min < self.goal_position <= self.position_max:
            raise ValueError("goal_position must lie in (position_min, position_max]")
        if not math.isclose(self.velocity_min, -self.velocity_max):
            raise ValueError("velocity range must be symmetric about 0")
        if self.velocity_max <= 0:
            raise ValueError("velocity_max must be positive")
        if self.action_count != 3:
            raise ValueError("mountain car has exactly 3 actions")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvParams":
        """Build from a flat mapping, ignoring unknown keys and coercing strings."""
        kwargs = {}
        for f in fields(cls):
            if f.name in d:
                v = d[f.name]
                if f.name == "action_count":
                    v = int(v)
                elif f.name == "wall_reset":
                    v = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
                else:
                    v = float(v)
                kwargs[f.name] = v
        return cls(**kwargs)


class ContState(NamedTuple):
    position: float
    velocity: float


def _clip(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def goal_reached(s: ContState, params: EnvParams = EnvParams()) -> bool:
    return s.position >= params.goal_position


def step(s: ContState, a: int, params: EnvParams = EnvParams()) -> tuple[ContState, float, bool]:
    """Advance the car by one step.

    Args:
        s: current (position, velocity).
        a: action, 0 = push left, 1 = coast, 2 = push right.
        params: physical constants and bounds.

    Returns:
        (next_state, reward, terminal)

    Raises:
        ValueError: if ``a`` is not one of 0, 1, 2.
    """
    if a not in ACTIONS:
        raise ValueError(f"action must be one of {ACTIONS}, got {a!r}")
    x, v = s
    v = v + (a - 1) * params.force - params.gravity * math.cos(3.0 * x)
    v = _clip(v, params.velocity_min, params.velocity_max)
    x = _clip(x + v, params.position_min, params.position_max)
    if params.wall_reset and x <= params.position_min:
        # inelastic left wall
        v = 0.0
    nxt = ContState(x, v)
    if goal_reached(nxt, params):
        return nxt, 0.0, True
    return nxt, params.step_reward, False


def rollout(policy_fn, start: ContState, params: EnvParams = EnvParams(), max_steps: int = 400):
    """Run ``policy_fn(state) -> action`` from ``start``.

    Returns:
        (trajectory, total_reward, reached_goal). ``trajectory`` includes the
        start state and every visited state.
    """
    traj = [start]
    total = 0.0
    s = start
    if goal_reached(s, params):
        return traj, total, True
    for _ in range(max_steps):
        s, r, done = step(s, int(policy_fn(s)), params)
        traj.append(s)
        total += r
        if done:
            return traj, total, True
    return traj, total, False
