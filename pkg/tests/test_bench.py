import numpy as np
import pytest

from qepi.bench import PHASES, dense_update, loglog_slope, measure_scaling, memory_bound, sparse_update
from qepi.counters import OpCounters
from qepi.env import EnvParams
from qepi.grid import GridSpec, build_transition_model
from qepi.qubo import BinaryEncoding, build_qubo
from qepi.sle import build_sle

FLAT = EnvParams(wall_reset=False)


def ops(model, path, n_b=4):
    pi = np.zeros(model.mu, dtype=int)
    enc = BinaryEncoding(n_b)
    if path == "sparse":
        return sparse_update(model, pi, 0.99, enc)
    return dense_update(model, pi, 0.99, enc)[0]


class TestCounters:
    def test_add_and_peak(self):
        c = OpCounters()
        c.add("a", 3)
        c.add("a", 4)
        c.alloc("a", 10)
        c.alloc("a", 5)
        assert c.ops["a"] == 7 and c.entries["a"] == 10


class TestRatios:
    def test_sparse_doubling_is_linear(self):
        small = build_transition_model(GridSpec(32, 16, FLAT))
        big = build_transition_model(GridSpec(32, 32, FLAT))
        assert small.bandwidth == big.bandwidth
        a, b = ops(small, "sparse"), ops(big, "sparse")
        for ph in PHASES:
            assert 1.8 <= b.ops[ph] / a.ops[ph] <= 2.2, ph

    def test_dense_doubling_is_cubic(self):
        a = ops(build_transition_model(GridSpec(8, 8)), "dense")
        b = ops(build_transition_model(GridSpec(16, 8)), "dense")
        assert 7 <= b.ops["sle_to_qubo"] / a.ops["sle_to_qubo"] <= 9

    def test_sparse_q_memory(self):
        m = build_transition_model(GridSpec(16, 16, FLAT))
        q = build_qubo(build_sle(m, np.zeros(m.mu, dtype=int), 0.99), BinaryEncoding(4))
        assert q.Q.nnz <= (4 * m.bandwidth + 1) ** 2 * m.mu * 16


def test_dense_and_sparse_build_same_qubo():
    m = build_transition_model(GridSpec(6, 6))
    pi = np.random.default_rng(0).integers(0, 3, m.mu)
    enc = BinaryEncoding(3)
    _, Qd = dense_update(m, pi, 0.95, enc)
    Qs = build_qubo(build_sle(m, pi, 0.95), enc).dense()
    assert np.allclose(Qd, Qs)


def test_dense_cap():
    with pytest.raises(ValueError):
        dense_update(build_transition_model(GridSpec(32, 32)), np.zeros(1024, dtype=int), 0.9, BinaryEncoding(2))


def test_slope_fit():
    x = np.array([10, 20, 40, 80])
    assert loglog_slope(x, 3 * x**2) == pytest.approx(2.0)


def test_memory_bound():
    assert memory_bound("sparse", 100, 1, 2, 3, 2) == (3 * 2 * 9 + 25 * 4) * 100
    assert memory_bound("dense", 100, 1, 2, 3, 2) == (4 + 6) * 100**2


def test_measure_scaling_report():
    grids = [GridSpec(n, n, FLAT) for n in (8, 12, 16)]
    rep = measure_scaling(grids, n_b=3)
    assert rep.mus == [64, 144, 256]
    assert set(rep.slopes) == set(PHASES)
    rows = rep.to_csv().splitlines()
    assert rows[0] == "path,mu,k,phase,ops,entries,wall_time"
    assert len(rows) == 1 + 3 * (len(PHASES) + 1)
    with pytest.raises(ValueError):
        measure_scaling(grids[:2])
