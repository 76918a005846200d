"""Policy evaluation as a sparse linear system ``A x = b``.

Row ``i`` of ``A`` is ``e_i - gamma * p(. | s_i, pi(s_i))`` restricted to
nonterminal destinations; terminal states get identity rows and ``b_i = 0``
so that their value is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .counters import NULL
from .grid import TransitionModel

DENSE_SOLVE_MAX = 4096


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearSystem:
    A: sp.csr_matrix
    b: np.ndarray
    shape: tuple[int, int]

    @property
    def mu(self) -> int:
        return len(self.b)

    @property
    def bandwidth(self) -> int:
        return matrix_bandwidth(self.A, self.shape)


def matrix_bandwidth(M, shape: tuple[int, int]) -> int:
    """Largest L-infinity multi-index distance between row and column of a stored entry."""
    coo = sp.coo_matrix(M)
    mask = coo.data != 0
    r, c = coo.row[mask], coo.col[mask]
    if len(r) == 0:
        return 0
    n = shape[0]
    return int(np.max(np.maximum(np.abs(r % n - c % n), np.abs(r // n - c // n))))


def build_sle(model: TransitionModel, pi, gamma: float, counter=NULL) -> LinearSystem:
    mu, alpha = model.mu, model.n_actions
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (mu,) or np.any(pi < 0) or np.any(pi >= alpha):
        raise ValueError("policy must hold one valid action per state")

    rows = np.arange(mu) * alpha + pi
    starts, stops = model.indptr[rows], model.indptr[rows + 1]
    lengths = stops - starts
    src = np.repeat(np.arange(mu), lengths)
    first = np.cumsum(lengths) - lengths
    idx = np.arange(lengths.sum()) - np.repeat(first - starts, lengths)
    dest, prob, rew = model.dest[idx], model.prob[idx], model.reward[idx]
    counter.add("rl_to_sle", 2 * len(idx))

    b = np.bincount(src, weights=prob * rew, minlength=mu)
    keep = ~model.terminal[dest]
    A = sp.coo_matrix(
        (
            np.concatenate([np.ones(mu), -gamma * prob[keep]]),
            (np.concatenate([np.arange(mu), src[keep]]), np.concatenate([np.arange(mu), dest[keep]])),
        ),
        shape=(mu, mu),
    ).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    b[model.terminal] = 0.0
    counter.alloc("rl_to_sle", A.nnz + mu)
    return LinearSystem(A, b, model.shape)


def residual(sys: LinearSystem, x) -> float:
    """Squared residual ``||A x - b||^2``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != sys.b.shape:
        raise ValueError(f"expected vector of length {sys.mu}, got shape {x.shape}")
    r = sys.A @ x - sys.b
    return float(r @ r)


def diagonal_dominance_margin(sys: LinearSystem) -> float:
    """min_i (|A_ii| - sum_{j != i} |A_ij|); positive means strictly dominant."""
    absA = abs(sys.A)
    diag = absA.diagonal()
    off = np.asarray(absA.sum(axis=1)).ravel() - diag
    return float(np.min(diag - off)) if sys.mu else 0.0


def classical_solve(sys: LinearSystem) -> np.ndarray:
    """Reference solution: dense LU up to 4096 states, BiCGSTAB beyond."""
    mu = sys.mu
    if mu <= DENSE_SOLVE_MAX:
        dense = sys.A.toarray()
        try:
            x = np.linalg.solve(dense, sys.b)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular system (cond={np.linalg.cond(dense):.3e})") from exc
    else:
        x, info = spla.bicgstab(sys.A, sys.b, rtol=1e-12, atol=0.0, maxiter=20 * mu)
        if info != 0:
            raise SolverError(f"BiCGSTAB did not converge (info={info})")
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution")
    bb = float(sys.b @ sys.b)
    res = residual(sys, x)
    if res > max(1e-12 * mu * bb, 1e-300) and mu <= DENSE_SOLVE_MAX:
        cond = np.linalg.cond(sys.A.toarray())
        raise SolverError(f"ill-conditioned system: residual {res:.3e}, cond {cond:.3e}")
    return x


def dump_triplets(sys: LinearSystem, a_path, b_path) -> None:
    coo = sys.A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.row[t]} {coo.col[t]} {float(coo.data[t])!r}" for t in order]
    Path(a_path).write_text(f"{sys.mu} {sys.mu} {coo.nnz}\n" + "\n".join(lines) + "\n")
    Path(b_path).write_text("\n".join(repr(float(v)) for v in sys.b) + "\n")


def load_triplets(a_path, b_path, shape: tuple[int, int] | None = None) -> LinearSystem:
    lines = Path(a_path).read_text().split("\n")
    n, m, nnz = (int(t) for t in lines[0].split())
    trip = [ln.split() for ln in lines[1 : 1 + nnz]]
    r = np.array([int(t[0]) for t in trip], dtype=np.int64)
    c = np.array([int(t[1]) for t in trip], dtype=np.int64)
    v = np.array([float(t[2]) for t in trip])
    A = sp.csr_matrix((v, (r, c)), shape=(n, m))
    b = np.array([float(t) for t in Path(b_path).read_text().split()])
    return LinearSystem(A, b, shape or (n, 1))
