"""Fixed-point binary encoding of the policy-evaluation system as a QUBO.

Each state value is a nonpositive fixed-point number

    x_i = -kappa * sum_j 2**j * y[i + mu * j],   kappa = |x_min| / 2**(n_b - 1)

so bit ``j`` of every state lives in the ``j``-th block of ``mu`` variables.
Substituting into ``||A x - b||^2`` gives ``y^T P y + p^T y + ||b||^2`` with

    P[block j, block l] = 2**(j + l) * kappa**2 * A^T A
    p[block j]          = 2**(j + 1) * kappa * A^T b

and the linear part is folded onto the diagonal, ``Q = P + diag(p)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .counters import NULL
from .sle import LinearSystem, matrix_bandwidth

MAX_DIMENSION = 1 << 22


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryEncoding:
    n_b: int = 10
    x_min: float = -100.0

    def __post_init__(self):
        if self.n_b < 1:
            raise ValueError("n_b must be at least 1")
        if not self.x_min < 0:
            raise ValueError("x_min must be negative")

    @property
    def kappa(self) -> float:
        return abs(self.x_min) / 2 ** (self.n_b - 1)

    @property
    def max_level(self) -> int:
        return 2**self.n_b - 1

    @property
    def weights(self) -> np.ndarray:
        return 2.0 ** np.arange(self.n_b)


@dataclass(frozen=True)
class QuboProblem:
    Q: sp.csr_matrix
    encoding: BinaryEncoding
    mu: int
    offset: float
    ata: sp.csr_matrix
    shape: tuple[int, int]

    @property
    def dimension(self) -> int:
        return self.Q.shape[0]

    def dense(self) -> np.ndarray:
        return self.Q.toarray()

    def upper_triplets(self) -> list[tuple[int, int, float]]:
        """``(i, j, v)`` with ``i <= j`` such that energy = sum v * y_i * y_j."""
        up = sp.triu(self.Q, format="coo")
        vals = np.where(up.row == up.col, up.data, 2.0 * up.data)
        order = np.lexsort((up.col, up.row))
        return [(int(up.row[t]), int(up.col[t]), float(vals[t])) for t in order]

    def header(self) -> dict:
        return {
            "dimension": self.dimension,
            "mu": self.mu,
            "n_b": self.encoding.n_b,
            "x_min": self.encoding.x_min,
            "kappa": self.encoding.kappa,
            "offset": self.offset,
            "convention": "upper triangle, energy = sum v*y_i*y_j",
        }

    def export(self, path) -> None:
        """Write a JSON header line followed by ``i j value`` lines."""
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [f"{i} {j} {v!r}" for i, j, v in self.upper_triplets()]
        Path(path).write_text("\n".join(lines) + "\n")


def build_qubo(
    sys: LinearSystem, enc: BinaryEncoding, counter=NULL, max_dimension: int = MAX_DIMENSION
) -> QuboProblem:
    mu, nb, kappa = sys.mu, enc.n_b, enc.kappa
    if mu * nb > max_dimension:
        raise CapacityError(f"QUBO dimension {mu * nb} exceeds the cap {max_dimension}")
    A = sys.A.tocsr()

    row_nnz = np.diff(A.indptr)
    counter.add("sle_to_qubo", int(np.sum(row_nnz.astype(np.int64) ** 2)))
    ata = (A.T @ A).tocsr()
    ata.sum_duplicates()
    ata.eliminate_zeros()
    counter.add("sle_to_qubo", A.nnz)
    atb = A.T @ sys.b

    w = enc.weights
    P = sp.kron(sp.csr_matrix(kappa**2 * np.outer(w, w)), ata, format="csr")
    counter.add("sle_to_qubo", nb * nb * ata.nnz)
    p = np.concatenate([2.0 ** (j + 1) * kappa * atb for j in range(nb)])
    counter.add("sle_to_qubo", 2 * mu * nb)
    Q = (P + sp.diags(p)).tocsr()
    Q.sum_duplicates()
    Q.eliminate_zeros()
    counter.alloc("sle_to_qubo", ata.nnz + P.nnz + mu + mu * nb + Q.nnz)
    return QuboProblem(Q, enc, mu, float(sys.b @ sys.b), ata, sys.shape)


def decode(y, enc: BinaryEncoding, mu: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (mu * enc.n_b,):
        raise ValueError(f"expected {mu * enc.n_b} bits, got shape {y.shape}")
    return -enc.kappa * (enc.weights @ y.reshape(enc.n_b, mu))


def encode(x, enc: BinaryEncoding) -> np.ndarray:
    """Bits of the nearest representable vector to ``x`` (componentwise)."""
    x = np.asarray(x, dtype=np.float64)
    levels = np.clip(np.rint(-x / enc.kappa), 0, enc.max_level).astype(np.int64)
    bits = (levels[None, :] >> np.arange(enc.n_b)[:, None]) & 1
    return bits.ravel().astype(np.int8)


def objective(q: QuboProblem, y) -> float:
    """``y^T Q y``, equal to ``y^T P y + p^T y`` for binary ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (q.dimension,):
        raise ValueError(f"expected {q.dimension} bits, got shape {y.shape}")
    return float(y @ (q.Q @ y))


def sparsity_and_qubits(q: QuboProblem, k: int, state_dim: int = 2) -> dict:
    """Measured sparsity of Q against its band bound, plus qubit counts."""
    dim = q.dimension
    c = (4 * k + 1) ** state_dim
    sparsity = 1.0 - q.Q.count_nonzero() / float(dim * dim)
    bound = 1.0 - c / q.mu
    if q.mu > c and sparsity < bound:
        raise AssertionError(f"sparsity {sparsity} below band bound {bound}")
    return {
        "sparsity": sparsity,
        "bound": bound,
        "c": c,
        "bound_applies": q.mu > c,
        "ata_bandwidth": matrix_bandwidth(q.ata, q.shape),
        "qubits_literal": math.ceil(math.log2(q.encoding.n_b) + math.log2(q.mu)),
        "qubits_bits": q.mu * q.encoding.n_b,
    }
