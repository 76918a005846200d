"""Operation and memory instrumentation for one QEPI policy update.

The sparse path runs the production builders with exact counters. The
dense path materializes the full transition tensor and dense matrices and
counts every multiply-add a textbook implementation performs, including
those on structural zeros.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .annealer import AnnealParams, simulated_anneal
from .counters import OpCounters
from .dp import greedy_policy
from .grid import GridSpec, TransitionModel, build_transition_model
from .qubo import BinaryEncoding, build_qubo, decode, encode
from .sle import build_sle, classical_solve

PHASES = ("rl_to_sle", "sle_to_qubo", "recovery", "policy_update")
DENSE_MAX_MU = 512


@dataclass
class ScalingReport:
    path: str
    n_b: int
    mus: list[int]
    bandwidths: list[int]
    counters: list[OpCounters]
    slopes: dict[str, float] = field(default_factory=dict)
    memory_ratio: list[float] = field(default_factory=list)

    def rows(self):
        for mu, k, c in zip(self.mus, self.bandwidths, self.counters):
            for ph in (*PHASES, "solve"):
                yield {
                    "path": self.path,
                    "mu": mu,
                    "k": k,
                    "phase": ph,
                    "ops": c.ops.get(ph, 0),
                    "entries": c.entries.get(ph, 0),
                    "wall_time": c.wall_time.get(ph, 0.0),
                }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["path", "mu", "k", "phase", "ops", "entries", "wall_time"],
                           lineterminator="\n")
        w.writeheader()
        for r in self.rows():
            w.writerow(r)
        return buf.getvalue()


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


class _Timer:
    def __init__(self, counter: OpCounters, phase: str):
        self.counter, self.phase = counter, phase

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.counter.wall_time[self.phase] += time.perf_counter() - self.t0


def sparse_update(model: TransitionModel, pi, gamma: float, enc: BinaryEncoding,
                  anneal: AnnealParams | None = None) -> OpCounters:
    c = OpCounters()
    with _Timer(c, "rl_to_sle"):
        sys = build_sle(model, pi, gamma, counter=c)
    with _Timer(c, "sle_to_qubo"):
        q = build_qubo(sys, enc, counter=c)
    if anneal is not None:
        res = simulated_anneal(q, anneal)
        c.wall_time["solve"] = res.wall_time
        y = res.best_y
    else:
        y = encode(classical_solve(sys), enc)
    with _Timer(c, "recovery"):
        x = decode(y, enc, model.mu)
        c.add("recovery", model.mu * enc.n_b)
        c.alloc("recovery", model.mu * enc.n_b)
    with _Timer(c, "policy_update"):
        greedy_policy(model, x, gamma)
        c.add("policy_update", model.n_branches)
    c.alloc("model", 3 * model.n_branches + len(model.indptr))
    return c


def dense_tensor(model: TransitionModel) -> tuple[np.ndarray, np.ndarray]:
    """Full p(s', r | s, a) as an array of shape (alpha, mu, mu, rho) plus reward values."""
    rewards = np.unique(model.reward) if model.n_branches else np.zeros(1)
    T = np.zeros((model.n_actions, model.mu, model.mu, len(rewards)))
    rows = model.row_ids()
    ri = np.searchsorted(rewards, model.reward)
    np.add.at(T, (rows % model.n_actions, rows // model.n_actions, model.dest, ri), model.prob)
    return T, rewards


def dense_update(model: TransitionModel, pi, gamma: float, enc: BinaryEncoding) -> tuple[OpCounters, np.ndarray]:
    """Same update as :func:`sparse_update` using dense storage throughout.

    Returns:
        (counters, dense QUBO matrix) so callers can cross-check the sparse builder.
    """
    mu, alpha = model.mu, model.n_actions
    if mu > DENSE_MAX_MU:
        raise ValueError(f"dense path is limited to mu <= {DENSE_MAX_MU}")
    c = OpCounters()
    T, rewards = dense_tensor(model)
    rho = len(rewards)
    c.alloc("model", T.size)
    pi = np.asarray(pi)
    nonterm = ~model.terminal

    with _Timer(c, "rl_to_sle"):
        Tpi = T[pi, np.arange(mu)]  # (mu, mu, rho)
        b = (Tpi @ rewards).sum(axis=1)
        A = np.eye(mu) - gamma * Tpi.sum(axis=2) * nonterm[None, :]
        b[model.terminal] = 0.0
        A[model.terminal] = np.eye(mu)[model.terminal]
        c.add("rl_to_sle", 2 * rho * mu * mu)
        c.alloc("rl_to_sle", mu * mu + mu)

    with _Timer(c, "sle_to_qubo"):
        ata = A.T @ A
        c.add("sle_to_qubo", mu**3)
        btA = b @ A
        c.add("sle_to_qubo", mu * mu)
        w = enc.weights
        P = np.kron(enc.kappa**2 * np.outer(w, w), ata)
        c.add("sle_to_qubo", enc.n_b**2 * mu * mu)
        p = np.concatenate([2.0 ** (j + 1) * enc.kappa * btA for j in range(enc.n_b)])
        c.add("sle_to_qubo", mu * enc.n_b)
        Q = P + np.diag(p)
        c.add("sle_to_qubo", mu * enc.n_b)
        c.alloc("sle_to_qubo", ata.size + P.size + mu + p.size + Q.size)

    x_ref = np.linalg.solve(A, b)
    y = encode(x_ref, enc)
    with _Timer(c, "recovery"):
        x = -enc.kappa * (w @ y.reshape(enc.n_b, mu))
        c.add("recovery", mu * enc.n_b)
        c.alloc("recovery", mu * enc.n_b)

    with _Timer(c, "policy_update"):
        q = (T * (rewards[None, None, None, :] + gamma * x[None, None, :, None])).sum(axis=(2, 3))
        q[:, model.terminal] = 0.0
        _ = np.argmax(q, axis=0)
        c.add("policy_update", alpha * rho * mu * mu)
    return c, Q


def memory_bound(path: str, mu: int, k: int, n_b: int, alpha: int, rho: int, N: int = 2) -> float:
    a, cc = (2 * k + 1) ** N, (4 * k + 1) ** N
    if path == "sparse":
        return (alpha * rho * a + cc * n_b**2) * mu
    return (n_b**2 + alpha * rho) * mu**2


def measure_scaling(
    grids: list[GridSpec],
    n_b: int = 4,
    gamma: float = 0.99,
    path: str = "sparse",
    x_min: float = -100.0,
    anneal: AnnealParams | None = None,
) -> ScalingReport:
    """Count one policy update at each grid size and fit log-log slopes per phase."""
    if len(grids) < 3:
        raise ValueError("need at least 3 grid sizes to fit a slope")
    if path not in ("sparse", "dense"):
        raise ValueError("path must be 'sparse' or 'dense'")
    enc = BinaryEncoding(n_b, x_min)
    mus, ks, counters, ratios = [], [], [], []
    for g in grids:
        model = build_transition_model(g)
        pi = np.zeros(model.mu, dtype=np.int64)
        if path == "sparse":
            c = sparse_update(model, pi, gamma, enc, anneal)
        else:
            c, _ = dense_update(model, pi, gamma, enc)
        peak = max(c.entries.values())
        ratios.append(peak / memory_bound(path, model.mu, model.bandwidth, n_b, model.n_actions, max(model.rho, 1)))
        mus.append(model.mu)
        ks.append(model.bandwidth)
        counters.append(c)
    slopes = {ph: loglog_slope(mus, [c.ops[ph] for c in counters]) for ph in PHASES}
    return ScalingReport(path, n_b, mus, ks, counters, slopes, ratios)
