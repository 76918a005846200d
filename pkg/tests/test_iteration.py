import math

import numpy as np
import pytest

from qepi.annealer import AnnealParams
from qepi.dp import value_iteration
from qepi.grid import GridSpec, TransitionModel, build_transition_model
from qepi.iteration import (
    QepiConfig,
    accuracy_experiment,
    derive_seed,
    pi_update_upper_bound,
    reference_policy,
    run_qepi,
)
from qepi.qubo import BinaryEncoding


@pytest.fixture(scope="module")
def grid4():
    return build_transition_model(GridSpec(4, 4))


class TestRunQepi:
    def test_chain_with_brute_force(self, chain3):
        cfg = QepiConfig(0.99, BinaryEncoding(6, -4.0), solver="brute-force")
        pi, x, hist = run_qepi(chain3, cfg)
        assert hist.converged
        assert np.array_equal(pi, reference_policy(chain3, 0.99))
        assert np.max(np.abs(x - [-1.99, -1.0, 0.0])) <= cfg.encoding.kappa

    def test_all_terminal(self):
        m = TransitionModel.from_branches(3, 2, [], terminal=[0, 1, 2])
        pi, x, hist = run_qepi(m, QepiConfig(0.9, BinaryEncoding(3, -4.0), solver="brute-force"))
        assert len(hist) == 1 and hist.converged
        assert np.all(x == 0.0)

    def test_saturation_warning(self, chain3):
        # the range [-0.75, 0] cannot hold -1.99
        cfg = QepiConfig(0.99, BinaryEncoding(2, -0.5), solver="brute-force")
        _, _, hist = run_qepi(chain3, cfg)
        assert hist.warnings

    def test_update_cap(self, grid4):
        cfg = QepiConfig(0.99, anneal=AnnealParams(1, 1), max_policy_updates=2)
        _, _, hist = run_qepi(grid4, cfg)
        assert len(hist) <= 2

    def test_matches_vi_on_4x4(self, grid4):
        cfg = QepiConfig(0.99, anneal=AnnealParams(1280, 100, seed=7))
        pi, _, hist = run_qepi(grid4, cfg)
        assert hist.converged
        assert np.array_equal(pi, reference_policy(grid4, 0.99))

    def test_deterministic(self, grid4):
        cfg = QepiConfig(0.99, anneal=AnnealParams(64, 4, seed=3))
        a = run_qepi(grid4, cfg)
        b = run_qepi(grid4, cfg)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    @pytest.mark.parametrize("kw", [{"gamma": 1.0}, {"max_policy_updates": 0}, {"solver": "magic"}])
    def test_bad_config(self, kw):
        with pytest.raises(ValueError):
            QepiConfig(**kw)


class TestAccuracy:
    def test_brute_force_is_exact(self, chain3):
        cfg = QepiConfig(0.99, BinaryEncoding(6, -4.0), solver="brute-force")
        t = accuracy_experiment(chain3, cfg, [1, 16], [1, 4], runs=3, master_seed=0)
        assert np.all(t.accuracy == 1.0)
        assert t.to_csv().splitlines()[0] == "duration\\anneals,1,4"

    @pytest.mark.slow
    def test_weak_solver_is_worse(self, grid4):
        cfg = QepiConfig(0.99)
        # the 50-run version of this comparison lives in the acceptance suite
        t = accuracy_experiment(grid4, cfg, [1, 1280], [1, 100], runs=10, master_seed=5)
        assert t.accuracy[0, 0] < t.accuracy[1, 1]
        assert t.accuracy[1, 1] >= 0.8


class TestSeeds:
    def test_distinct_and_stable(self):
        seeds = {derive_seed(0, c, r) for c in range(4) for r in range(50)}
        assert len(seeds) == 200
        assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
        assert derive_seed(0, 1, 2) != derive_seed(1, 1, 2)


class TestBound:
    def test_worked_value(self):
        assert pi_update_upper_bound(16, 0.01, 0.9) == pytest.approx(230.03, abs=0.01)

    def test_gamma_zero(self):
        assert pi_update_upper_bound(4, 0.5, 0.0) == pytest.approx(4 + math.log(2) + math.log(2))

    def test_monotone_in_gamma(self):
        vals = [pi_update_upper_bound(8, 0.1, g) for g in np.linspace(0, 0.99, 20)]
        assert np.all(np.diff(vals) > 0)

    @pytest.mark.parametrize("args", [(8, 0.0, 0.5), (8, 0.1, 1.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            pi_update_upper_bound(*args)
