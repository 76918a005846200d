"""Quantum-enhanced policy iteration and its accuracy experiment.

Each policy update evaluates the current policy by solving the QUBO form of
its linear system, decodes the value function from the best bitstring, and
improves the policy greedily.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .annealer import AnnealParams, RemoteSolver, solve
from .dp import greedy_policy, value_iteration
from .grid import TransitionModel
from .qubo import BinaryEncoding, build_qubo, decode
from .sle import build_sle, residual

log = logging.getLogger(__name__)

SOLVERS = ("simulated", "brute-force", "remote")


@dataclass(frozen=True)
class QepiConfig:
    gamma: float = 0.99
    encoding: BinaryEncoding = field(default_factory=BinaryEncoding)
    anneal: AnnealParams = field(default_factory=AnnealParams)
    max_policy_updates: int = 10
    solver: str = "simulated"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.max_policy_updates < 1:
            raise ValueError("max_policy_updates must be at least 1")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")


@dataclass
class UpdateRecord:
    policy: np.ndarray  # policy after the improvement step
    values: np.ndarray  # decoded value of the evaluated policy
    objective: float
    residual: float
    changes: int
    saturated: bool
    solve_time: float


@dataclass
class QepiHistory:
    updates: list[UpdateRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def warnings(self) -> list[str]:
        return [
            f"update {k}: decoded values hit the encoding range limit; x_min may be too small"
            for k, u in enumerate(self.updates)
            if u.saturated
        ]

    def __len__(self):
        return len(self.updates)


def derive_seed(master: int, *keys: int) -> int:
    """Independent 63-bit seed for the stream addressed by ``keys``."""
    state = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in keys)).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def run_qepi(
    model: TransitionModel,
    cfg: QepiConfig,
    remote: RemoteSolver | None = None,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray, QepiHistory]:
    """Policy iteration with QUBO-based policy evaluation.

    Starts from the all-zeros policy and stops when an improvement step
    leaves the policy unchanged or after ``cfg.max_policy_updates`` updates.

    Returns:
        (final policy, decoded value function of the last evaluation, history)
    """
    enc = cfg.encoding
    pi = np.zeros(model.mu, dtype=np.int64)
    x = np.zeros(model.mu)
    history = QepiHistory()
    for k in range(cfg.max_policy_updates):
        sys = build_sle(model, pi, cfg.gamma)
        q = build_qubo(sys, enc)
        params = replace(cfg.anneal, seed=derive_seed(cfg.anneal.seed, k))
        result = solve(q, cfg.solver, params, remote=remote, workers=workers)
        x = decode(result.best_y, enc, model.mu)
        saturated = bool(np.any(x <= -enc.kappa * enc.max_level))
        new_pi = greedy_policy(model, x, cfg.gamma)
        changes = int(np.count_nonzero(new_pi != pi))
        history.updates.append(
            UpdateRecord(new_pi, x, result.best_objective, residual(sys, x), changes, saturated, result.wall_time)
        )
        if saturated:
            log.warning("update %d: decoded values saturate the encoding (x_min=%g)", k, enc.x_min)
        pi = new_pi
        if changes == 0:
            history.converged = True
            break
    return pi, x, history


def reference_policy(model: TransitionModel, gamma: float) -> np.ndarray:
    vf = value_iteration(model, gamma)
    return greedy_policy(model, vf.values, gamma)


@dataclass
class AccuracyTable:
    durations: list[int]
    anneals: list[int]
    runs: int
    accuracy: np.ndarray  # shape (len(durations), len(anneals))
    updates: np.ndarray  # mean executed policy updates per cell

    def to_csv(self) -> str:
        head = "duration\\anneals," + ",".join(str(a) for a in self.anneals)
        rows = [
            f"{d}," + ",".join(repr(float(v)) for v in self.accuracy[i])
            for i, d in enumerate(self.durations)
        ]
        return "\n".join([head, *rows]) + "\n"


def accuracy_experiment(
    model: TransitionModel,
    cfg: QepiConfig,
    durations: list[int],
    anneals: list[int],
    runs: int,
    master_seed: int,
    workers: int = 1,
) -> AccuracyTable:
    """Fraction of QEPI runs whose final policy equals the value-iteration policy everywhere."""
    ref = reference_policy(model, cfg.gamma)
    acc = np.zeros((len(durations), len(anneals)))
    upd = np.zeros_like(acc)
    for di, d in enumerate(durations):
        for ai, n in enumerate(anneals):
            cell = di * len(anneals) + ai
            hits = 0
            for r in range(runs):
                params = replace(cfg.anneal, duration_steps=d, num_anneals=n, seed=derive_seed(master_seed, cell, r))
                pi, _, hist = run_qepi(model, replace(cfg, anneal=params), workers=workers)
                hits += bool(np.array_equal(pi, ref))
                upd[di, ai] += len(hist) / runs
            acc[di, ai] = hits / runs
            log.info("duration=%d anneals=%d accuracy=%.3f", d, n, acc[di, ai])
    return AccuracyTable(list(durations), list(anneals), runs, acc, upd)


def pi_update_upper_bound(bits: float, epsilon: float, gamma: float) -> float:
    """Upper bound on policy-iteration updates for an epsilon-optimal solution (natural logs)."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return (bits + math.log(1.0 / epsilon) + math.log(1.0 / (1.0 - gamma) + 1.0)) / (1.0 - gamma)
