"""Classical dynamic programming on a :class:`~qepi.grid.TransitionModel`.

All sweeps are synchronous: every state is updated from the previous sweep's
values. Terminal states are pinned to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .grid import TransitionModel

# Relative slack under which two action values count as tied.
TIE_RTOL = 1e-10


@dataclass
class ValueFunction:
    values: np.ndarray
    converged: bool = True
    sweeps: int = 0
    deltas: list[float] = field(default_factory=list)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SoftParams:
    sigma: float = 10.0
    truncate: float = 4.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def q_values(model: TransitionModel, values, gamma: float) -> np.ndarray:
    """Action values ``sum p * (r + gamma * V(s'))`` with shape (mu, n_actions)."""
    values = np.asarray(values, dtype=np.float64)
    w = model.prob * (model.reward + gamma * values[model.dest])
    q = np.bincount(model.row_ids(), weights=w, minlength=model.mu * model.n_actions)
    return q.reshape(model.mu, model.n_actions)


def argmax_lowest(q: np.ndarray, rtol: float = TIE_RTOL) -> np.ndarray:
    """Row-wise argmax where near-ties resolve to the lowest column."""
    best = q.max(axis=1, keepdims=True)
    slack = rtol * np.maximum(1.0, np.abs(best))
    return np.argmax(q >= best - slack, axis=1).astype(np.int64)


def _check_gamma(gamma: float) -> None:
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def _iterate(update, model: TransitionModel, sweeps: int, tol: float, v0=None) -> ValueFunction:
    v = np.zeros(model.mu) if v0 is None else np.array(v0, dtype=np.float64)
    v[model.terminal] = 0.0
    deltas = []
    for n in range(1, sweeps + 1):
        new = update(v)
        new[model.terminal] = 0.0
        delta = float(np.max(np.abs(new - v))) if len(v) else 0.0
        deltas.append(delta)
        v = new
        if delta < tol:
            return ValueFunction(v, True, n, deltas)
    return ValueFunction(v, False, sweeps, deltas)


def value_iteration(
    model: TransitionModel, gamma: float, sweeps: int = 100_000, tol: float = 1e-8
) -> ValueFunction:
    """Iterate the Bellman optimality update until the sup-norm change drops below ``tol``."""
    _check_gamma(gamma)
    return _iterate(lambda v: q_values(model, v, gamma).max(axis=1), model, sweeps, tol)


def greedy_policy(model: TransitionModel, values, gamma: float) -> np.ndarray:
    """One-step look-ahead policy; ties go to the lowest action index."""
    return argmax_lowest(q_values(model, values, gamma))


def policy_evaluation_iterative(
    model: TransitionModel, pi, gamma: float, tol: float = 1e-8, sweeps: int = 100_000
) -> ValueFunction:
    _check_gamma(gamma)
    pi = np.asarray(pi, dtype=np.int64)
    rows = np.arange(model.mu)

    def update(v):
        return q_values(model, v, gamma)[rows, pi]

    return _iterate(update, model, sweeps, tol)


def gaussian_kernel(sigma: float, truncate: float = 4.0) -> np.ndarray:
    if sigma == 0:
        return np.ones(1)
    radius = int(math.ceil(truncate * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def blur(field2d: np.ndarray, soft: SoftParams) -> np.ndarray:
    """Separable Gaussian blur with the kernel renormalized at the edges."""
    if soft.sigma == 0:
        return np.array(field2d, dtype=np.float64)
    k = gaussian_kernel(soft.sigma, soft.truncate)
    out = np.asarray(field2d, dtype=np.float64)
    norm = np.ones_like(out)
    for axis in range(out.ndim):
        out = ndimage.correlate1d(out, k, axis=axis, mode="constant", cval=0.0)
        norm = ndimage.correlate1d(norm, k, axis=axis, mode="constant", cval=0.0)
    return out / norm


def _blurred_q(model: TransitionModel, v, gamma: float, soft: SoftParams) -> np.ndarray:
    q = q_values(model, v, gamma)
    n_pos, n_vel = model.shape
    out = np.empty_like(q)
    for a in range(model.n_actions):
        out[:, a] = blur(q[:, a].reshape(n_vel, n_pos), soft).ravel()
    return out


def soft_value_iteration(
    model: TransitionModel,
    gamma: float,
    soft: SoftParams = SoftParams(),
    sweeps: int = 100_000,
    tol: float = 1e-8,
) -> tuple[ValueFunction, np.ndarray]:
    """Value iteration with every action slice of Q blurred over the grid.

    Returns:
        (value function, argmax policy of the blurred Q at the final values)
    """
    _check_gamma(gamma)
    vf = _iterate(lambda v: _blurred_q(model, v, gamma, soft).max(axis=1), model, sweeps, tol)
    policy = argmax_lowest(_blurred_q(model, vf.values, gamma, soft))
    return vf, policy


def count_regions(policy, shape: tuple[int, int]) -> int:
    """Number of 4-connected regions of equal action on the ``(n_pos, n_vel)`` grid."""
    n_pos, n_vel = shape
    grid = np.asarray(policy).reshape(n_vel, n_pos)
    total = 0
    for a in np.unique(grid):
        _, n = ndimage.label(grid == a)
        total += n
    return int(total)
