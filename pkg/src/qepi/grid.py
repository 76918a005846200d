"""State-space discretization and the nearest-vertex band transition tensor.

Grid states sit on a regular ``n_pos x n_vel`` mesh over the (position,
velocity) box, see :class:`GridSpec`. Flat state index ``i = vel_index * n_pos + pos_index``
so that ``values.reshape(n_vel, n_pos)`` puts velocity on rows.

A continuous destination is spread over the four grid vertices surrounding
it with bilinear weights, which keeps every transition inside one mesh cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .env import ContState, EnvParams, goal_reached, step


@dataclass(frozen=True)
class GridSpec:
    """Regular mesh over the (position, velocity) box.

    ``representative="vertex"`` places states on ``n`` evenly spaced points
    spanning each range, endpoints included. ``"center"`` uses the centers of
    ``n`` equal cells instead, which never touches the range edges.
    """

    n_pos: int
    n_vel: int
    env: EnvParams = field(default_factory=EnvParams)
    representative: str = "vertex"

    def __post_init__(self):
        if self.n_pos < 2 or self.n_vel < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if self.representative not in ("vertex", "center"):
            raise ValueError("representative must be 'vertex' or 'center'")

    @property
    def mu(self) -> int:
        return self.n_pos * self.n_vel

    def _axis(self, lo: float, hi: float, n: int) -> tuple[float, float]:
        if self.representative == "vertex":
            return lo, (hi - lo) / (n - 1)
        d = (hi - lo) / n
        return lo + 0.5 * d, d

    @property
    def pos_axis(self) -> tuple[float, float]:
        """(coordinate of the first node, node spacing) along position."""
        return self._axis(self.env.position_min, self.env.position_max, self.n_pos)

    @property
    def vel_axis(self) -> tuple[float, float]:
        return self._axis(self.env.velocity_min, self.env.velocity_max, self.n_vel)

    def positions(self) -> np.ndarray:
        o, d = self.pos_axis
        return o + np.arange(self.n_pos) * d

    def velocities(self) -> np.ndarray:
        o, d = self.vel_axis
        return o + np.arange(self.n_vel) * d

    def index(self, ip: int, iv: int) -> int:
        return iv * self.n_pos + ip

    def center(self, i: int) -> ContState:
        """Continuous state represented by grid state ``i``."""
        (po, pd), (vo, vd) = self.pos_axis, self.vel_axis
        return ContState(po + (i % self.n_pos) * pd, vo + (i // self.n_pos) * vd)

    def nearest(self, s: ContState) -> int:
        """Flat index of the grid state closest to ``s``."""
        (po, pd), (vo, vd) = self.pos_axis, self.vel_axis
        ip = min(max(int(round((s.position - po) / pd)), 0), self.n_pos - 1)
        iv = min(max(int(round((s.velocity - vo) / vd)), 0), self.n_vel - 1)
        return self.index(ip, iv)

    @classmethod
    def parse(cls, text: str, env: EnvParams | None = None, representative: str = "vertex") -> "GridSpec":
        """Parse ``"64x64"`` (positions x velocities)."""
        try:
            a, b = text.lower().split("x")
            return cls(int(a), int(b), env or EnvParams(), representative)
        except ValueError as exc:
            raise ValueError(f"bad grid size {text!r}, expected e.g. 64x64") from exc


def corner_probs(x: float, y: float) -> tuple[float, float, float, float]:
    """Bilinear hopping weights onto the corners of the unit cell.

    Returns:
        Probabilities of (xi00, xi01, xi10, xi11), where the first digit is
        the x offset and the second the y offset of the corner.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"local coordinates must lie in [0, 1], got ({x}, {y})")
    return ((1 - x) * (1 - y), (1 - x) * y, x * (1 - y), x * y)


@dataclass
class TransitionModel:
    """Sparse p(s', r | s, a) stored as one adjacency row per (state, action).

    Row ``i * n_actions + a`` spans ``dest[indptr[r]:indptr[r + 1]]`` with
    matching ``prob`` and ``reward`` entries. Terminal states have empty rows.
    ``shape`` is ``(n_pos, n_vel)``; 1-D toy chains use ``(mu, 1)``.
    """

    shape: tuple[int, int]
    n_actions: int
    indptr: np.ndarray
    dest: np.ndarray
    prob: np.ndarray
    reward: np.ndarray
    terminal: np.ndarray
    clamp_count: int = 0
    grid: GridSpec | None = None
    bandwidth: int = field(init=False, default=0)

    def __post_init__(self):
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.dest = np.asarray(self.dest, dtype=np.int64)
        self.prob = np.asarray(self.prob, dtype=np.float64)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        if len(self.indptr) != self.mu * self.n_actions + 1:
            raise ValueError("indptr length does not match mu * n_actions + 1")
        if len(self.terminal) != self.mu:
            raise ValueError("terminal mask length does not match mu")
        self.bandwidth = bandwidth_of(self) if len(self.dest) else 0

    @property
    def mu(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def rho(self) -> int:
        return int(len(np.unique(self.reward))) if len(self.reward) else 0

    @property
    def n_branches(self) -> int:
        return int(len(self.dest))

    def row_ids(self) -> np.ndarray:
        """Row (``i * n_actions + a``) of every stored branch."""
        return np.repeat(np.arange(self.mu * self.n_actions), np.diff(self.indptr))

    def source(self) -> np.ndarray:
        return self.row_ids() // self.n_actions

    def multi_index(self, i) -> tuple[np.ndarray, np.ndarray]:
        i = np.asarray(i)
        return i % self.shape[0], i // self.shape[0]

    def row(self, i: int, a: int):
        r = i * self.n_actions + a
        sl = slice(self.indptr[r], self.indptr[r + 1])
        return self.dest[sl], self.prob[sl], self.reward[sl]

    def row_sums(self) -> np.ndarray:
        """Total probability per (state, action), shape (mu, n_actions)."""
        sums = np.bincount(self.row_ids(), weights=self.prob, minlength=self.mu * self.n_actions)
        return sums.reshape(self.mu, self.n_actions)

    @classmethod
    def from_branches(
        cls,
        n_states: int,
        n_actions: int,
        branches: Iterable[tuple[int, int, int, float, float]],
        terminal: Iterable[int] = (),
        shape: tuple[int, int] | None = None,
    ) -> "TransitionModel":
        """Build a model from ``(i, a, j, prob, reward)`` tuples."""
        rows: list[list[tuple[int, float, float]]] = [[] for _ in range(n_states * n_actions)]
        for i, a, j, p, r in branches:
            if not (0 <= i < n_states and 0 <= j < n_states and 0 <= a < n_actions):
                raise ValueError(f"branch index out of range: {(i, a, j)}")
            if p > 0:
                rows[i * n_actions + a].append((int(j), float(p), float(r)))
        term = np.zeros(n_states, dtype=bool)
        term[list(terminal)] = True
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        dest, prob, reward = [], [], []
        for r, items in enumerate(rows):
            if term[r // n_actions]:
                items = []
            indptr[r + 1] = indptr[r] + len(items)
            for j, p, rw in items:
                dest.append(j)
                prob.append(p)
                reward.append(rw)
        return cls(
            shape=shape or (n_states, 1),
            n_actions=n_actions,
            indptr=indptr,
            dest=dest,
            prob=prob,
            reward=reward,
            terminal=term,
        )

    def dump(self, path) -> None:
        """Write the line-oriented text format read by :func:`load_model`."""
        lines = [
            "# qepi transition model",
            f"mu {self.mu} alpha {self.n_actions} k {self.bandwidth} "
            f"n_pos {self.shape[0]} n_vel {self.shape[1]} clamps {self.clamp_count}",
            f"branches {self.n_branches}",
        ]
        rows = self.row_ids()
        for t in range(self.n_branches):
            i, a = divmod(int(rows[t]), self.n_actions)
            lines.append(f"{i} {a} {self.dest[t]} {float(self.prob[t])!r} {float(self.reward[t])!r}")
        lines.append("terminal " + " ".join(str(i) for i in np.flatnonzero(self.terminal)))
        Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> TransitionModel:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    head = lines[0].split()
    meta = dict(zip(head[::2], head[1::2]))
    mu, alpha = int(meta["mu"]), int(meta["alpha"])
    shape = (int(meta["n_pos"]), int(meta["n_vel"]))
    n = int(lines[1].split()[1])
    branches = []
    for ln in lines[2 : 2 + n]:
        i, a, j, p, r = ln.split()
        branches.append((int(i), int(a), int(j), float(p), float(r)))
    terminal = [int(t) for t in lines[2 + n].split()[1:]]
    model = TransitionModel.from_branches(mu, alpha, branches, terminal, shape=shape)
    model.clamp_count = int(meta.get("clamps", 0))
    if model.bandwidth != int(meta["k"]):
        raise ValueError("stored bandwidth does not match the branches")
    return model


def _locate(value: float, origin: float, width: float, n: int) -> tuple[int, float, bool]:
    """Lower mesh vertex and local coordinate of ``value`` along one axis."""
    f = (value - origin) / width
    clamped = f < 0.0 or f > n - 1
    f = min(max(f, 0.0), float(n - 1))
    i0 = min(int(math.floor(f)), n - 2)
    return i0, min(max(f - i0, 0.0), 1.0), clamped


def build_transition_model(grid: GridSpec) -> TransitionModel:
    """Discretize the mountain car on ``grid``.

    Each nonterminal grid state is stepped once per action through the continuous
    dynamics; the destination is spread over the four surrounding vertices.
    Destinations beyond the outermost grid states are clamped onto the boundary
    cell and counted in ``clamp_count``.
    """
    env = grid.env
    mu, alpha = grid.mu, env.action_count
    p0, dp = grid.pos_axis
    v0, dv = grid.vel_axis
    terminal = np.array([goal_reached(grid.center(i), env) for i in range(mu)])

    counts = np.zeros(mu * alpha, dtype=np.int64)
    dest, prob, reward = [], [], []
    clamps = 0
    for i in range(mu):
        if terminal[i]:
            continue
        s = grid.center(i)
        for a in range(alpha):
            (x, v), r, done = step(s, a, env)
            ip, tx, cx = _locate(x, p0, dp, grid.n_pos)
            iv, ty, cv = _locate(v, v0, dv, grid.n_vel)
            clamps += cx or cv
            corners = (
                grid.index(ip, iv),
                grid.index(ip, iv + 1),
                grid.index(ip + 1, iv),
                grid.index(ip + 1, iv + 1),
            )
            for j, p in zip(corners, corner_probs(tx, ty)):
                if p <= 0.0:
                    continue
                dest.append(j)
                prob.append(p)
                reward.append(0.0 if done or terminal[j] else r)
                counts[i * alpha + a] += 1

    indptr = np.concatenate([[0], np.cumsum(counts)])
    return TransitionModel(
        shape=(grid.n_pos, grid.n_vel),
        n_actions=alpha,
        indptr=indptr,
        dest=dest,
        prob=prob,
        reward=reward,
        terminal=terminal,
        clamp_count=clamps,
        grid=grid,
    )


def bandwidth_of(model: TransitionModel) -> int:
    """Largest L-infinity multi-index jump over all stored transitions."""
    if model.n_branches == 0:
        raise ValueError("model has no stored transitions")
    si, sj = model.multi_index(model.source())
    di, dj = model.multi_index(model.dest)
    return int(np.max(np.maximum(np.abs(si - di), np.abs(sj - dj))))
