import numpy as np
import pytest
import scipy.sparse as sp

from qepi.sle import LinearSystem


def random_banded_system(rng: np.random.Generator, n_pos: int, n_vel: int, k: int, gamma: float = 0.9):
    """Random diagonally dominant system whose couplings stay within L-inf distance k.

    Rows look like policy-evaluation rows: unit diagonal, off-diagonals
    -gamma * p with p a probability vector over the k-neighbourhood.
    """
    mu = n_pos * n_vel
    rows, cols, vals = [], [], []
    for i in range(mu):
        ip, iv = i % n_pos, i // n_pos
        nbrs = [
            jv * n_pos + jp
            for jv in range(max(0, iv - k), min(n_vel, iv + k + 1))
            for jp in range(max(0, ip - k), min(n_pos, ip + k + 1))
        ]
        m = rng.integers(1, min(4, len(nbrs)) + 1)
        chosen = rng.choice(nbrs, size=m, replace=False)
        p = rng.dirichlet(np.ones(m))
        rows += [i] + [i] * m
        cols += [i] + list(chosen)
        vals += [1.0] + list(-gamma * p)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(mu, mu))
    A.sum_duplicates()
    b = -rng.uniform(0.0, 1.0, mu)
    return LinearSystem(A, b, (n_pos, n_vel))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain3():
    """0 -> 1 -> 2 (terminal), reward -1 per step, one action."""
    from qepi.grid import TransitionModel

    return TransitionModel.from_branches(3, 1, [(0, 0, 1, 1.0, -1.0), (1, 0, 2, 1.0, -1.0)], terminal=[2])
