"""QUBO solvers sharing one result type.

``simulated_anneal`` stands in for the quantum annealer: single-bit-flip
Metropolis sweeps over a linear inverse-temperature ramp, restarted
``num_anneals`` times from random bitstrings. Anneal ``r`` draws all of its
randomness from ``SeedSequence(seed, spawn_key=(r,))`` so the outcome does
not depend on how anneals are scheduled across workers.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np
import requests

from .qubo import CapacityError, QuboProblem, objective

BRUTE_FORCE_MAX = 24


class RemoteSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnnealParams:
    duration_steps: int = 1280
    num_anneals: int = 100
    seed: int = 0
    beta_start: float | None = None
    beta_end: float | None = None

    def __post_init__(self):
        if self.duration_steps < 1:
            raise ValueError("duration_steps must be at least 1")
        if self.num_anneals < 1:
            raise ValueError("num_anneals must be at least 1")
        if self.beta_start is not None and self.beta_end is not None:
            if not self.beta_start < self.beta_end:
                raise ValueError("beta_start must be below beta_end")


@dataclass
class SolverResult:
    best_y: np.ndarray
    best_objective: float
    anneal_objectives: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    solver: str = ""


def default_betas(q: QuboProblem) -> tuple[float, float]:
    """Ramp endpoints from the coefficient scale of ``Q``.

    Starts hot enough that the largest coefficient is crossed with
    probability ``e**-10`` and ends at ``1 / m``, ``m`` the median nonzero
    ``|Q|`` entry.
    """
    data = np.abs(q.Q.data[q.Q.data != 0])
    if len(data) == 0:
        return 0.1, 1.0
    med, top = float(np.median(data)), float(np.max(data))
    return min(10.0 / top, 0.1 / med), 1.0 / med


def schedule(q: QuboProblem, params: AnnealParams) -> np.ndarray:
    b0, b1 = default_betas(q)
    b0 = params.beta_start if params.beta_start is not None else b0
    b1 = params.beta_end if params.beta_end is not None else b1
    if params.duration_steps == 1:
        return np.array([b1])
    return np.linspace(b0, b1, params.duration_steps)


@nb.njit(cache=True, nogil=True)
def _local_fields(indptr, indices, data, y):
    n = len(y)
    h = np.zeros(n)
    for t in range(n):
        if y[t]:
            for idx in range(indptr[t], indptr[t + 1]):
                j = indices[idx]
                if j != t:
                    h[j] += data[idx]
    return h


@nb.njit(cache=True, nogil=True)
def _anneal(indptr, indices, data, diag, betas, y, rng):
    """Metropolis sweeps in fixed bit order; returns (best_y, best_E, final_E)."""
    n = len(y)
    h = _local_fields(indptr, indices, data, y)
    energy = 0.0
    for t in range(n):
        if y[t]:
            energy += diag[t] + h[t]
    best = energy
    best_y = y.copy()
    for s in range(len(betas)):
        beta = betas[s]
        for t in range(n):
            delta = (1 - 2 * y[t]) * (diag[t] + 2.0 * h[t])
            if delta > 0.0:
                # exp(-40) is below the resolution of rng.random()
                if beta * delta > 40.0 or rng.random() >= np.exp(-beta * delta):
                    continue
            y[t] = 1 - y[t]
            sign = 2.0 * y[t] - 1.0
            for idx in range(indptr[t], indptr[t + 1]):
                j = indices[idx]
                if j != t:
                    h[j] += sign * data[idx]
            energy += delta
            if energy < best:
                best = energy
                best_y[:] = y
    return best_y, best, energy


def _csr_parts(q: QuboProblem):
    Q = q.Q
    return Q.indptr.astype(np.int64), Q.indices.astype(np.int64), Q.data, Q.diagonal().copy()


def anneal_stream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def run_anneal(q: QuboProblem, betas: np.ndarray, seed: int, index: int):
    """One restart; returns (best_y, incrementally tracked best, final y, tracked final energy)."""
    indptr, indices, data, diag = _csr_parts(q)
    rng = anneal_stream(seed, index)
    y = rng.integers(0, 2, q.dimension).astype(np.int8)
    best_y, best, final = _anneal(indptr, indices, data, diag, betas, y, rng)
    return best_y, best, y, final


def simulated_anneal(q: QuboProblem, params: AnnealParams, workers: int = 1) -> SolverResult:
    t0 = time.perf_counter()
    betas = schedule(q, params)
    indptr, indices, data, diag = _csr_parts(q)

    def one(r):
        rng = anneal_stream(params.seed, r)
        y = rng.integers(0, 2, q.dimension).astype(np.int8)
        best_y, _, _ = _anneal(indptr, indices, data, diag, betas, y, rng)
        return best_y, objective(q, best_y)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            runs = list(ex.map(one, range(params.num_anneals)))
    else:
        runs = [one(r) for r in range(params.num_anneals)]
    energies = [e for _, e in runs]
    k = int(np.argmin(energies))  # first minimum: ties go to the lowest anneal index
    return SolverResult(
        best_y=runs[k][0].astype(np.int8),
        best_objective=energies[k],
        anneal_objectives=energies,
        wall_time=time.perf_counter() - t0,
        solver="simulated",
    )


@nb.njit(cache=True)
def _gray_enumerate(Q):
    n = Q.shape[0]
    y = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)  # sum_{j != t} Q_tj y_j
    energy = 0.0
    best = 0.0
    best_y = y.copy()
    scale = 1.0 + np.sum(np.abs(Q))
    tol = 1e-12 * scale
    for m in range(1, 1 << n):
        # bit flipped between Gray codes m-1 and m
        t = 0
        while not (m >> t) & 1:
            t += 1
        delta = (1 - 2 * y[t]) * (Q[t, t] + 2.0 * h[t])
        y[t] = 1 - y[t]
        sign = 2.0 * y[t] - 1.0
        for j in range(n):
            if j != t:
                h[j] += sign * Q[j, t]
        energy += delta
        if energy < best - tol:
            best = energy
            best_y[:] = y
        elif energy <= best + tol:
            for j in range(n):
                if y[j] != best_y[j]:
                    if y[j] < best_y[j]:
                        best_y[:] = y
                        if energy < best:
                            best = energy
                    break
    return best_y


def brute_force(q: QuboProblem) -> SolverResult:
    """Exhaustive minimum; ties go to the lexicographically smallest bitstring."""
    if q.dimension > BRUTE_FORCE_MAX:
        raise CapacityError(f"brute force is capped at {BRUTE_FORCE_MAX} bits, got {q.dimension}")
    t0 = time.perf_counter()
    y = _gray_enumerate(np.ascontiguousarray(q.dense()))
    e = objective(q, y)
    return SolverResult(y, e, [e], time.perf_counter() - t0, "brute-force")


@dataclass(frozen=True)
class RemoteSolver:
    """Client for an HTTP annealing service.

    Request body: ``{"dimension", "triplets": [[i, j, v], ...], "num_reads",
    "duration"}``; response: ``{"solutions": [bits, ...], "energies": [...]}``
    where ``bits`` is a list of 0/1 or a ``"0101..."`` string.
    """

    url: str
    timeout: float = 30.0
    retries: int = 2

    def payload(self, q: QuboProblem, params: AnnealParams) -> dict:
        return {
            "dimension": q.dimension,
            "triplets": [[i, j, v] for i, j, v in q.upper_triplets()],
            "num_reads": params.num_anneals,
            "duration": params.duration_steps,
        }

    def solve(self, q: QuboProblem, params: AnnealParams) -> SolverResult:
        t0 = time.perf_counter()
        body = self.payload(q, params)
        last = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(self.url, json=body, timeout=self.timeout)
                resp.raise_for_status()
                data = resp.json()
                break
            except (requests.RequestException, ValueError) as exc:
                last = exc
        else:
            raise RemoteSolverError(f"remote solver failed after {self.retries + 1} attempts: {last}")

        sols = data.get("solutions") or []
        if not sols:
            raise RemoteSolverError("remote solver returned no solutions")
        ys = []
        for s in sols:
            y = np.array([int(c) for c in s] if isinstance(s, str) else s, dtype=np.int8)
            if y.shape != (q.dimension,) or np.any((y != 0) & (y != 1)):
                raise RemoteSolverError("malformed bitstring in remote response")
            ys.append(y)
        # trust our own objective over reported energies
        energies = [objective(q, y) for y in ys]
        k = int(np.argmin(energies))
        return SolverResult(ys[k], energies[k], energies, time.perf_counter() - t0, "remote")


def solve(q: QuboProblem, solver: str, params: AnnealParams, remote: RemoteSolver | None = None,
          workers: int = 1) -> SolverResult:
    if solver == "simulated":
        return simulated_anneal(q, params, workers=workers)
    if solver == "brute-force":
        return brute_force(q)
    if solver == "remote":
        if remote is None:
            raise ValueError("remote solver selected but no endpoint configured")
        return remote.solve(q, params)
    raise ValueError(f"unknown solver {solver!r}")
