import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qepi.dp import (
    SoftParams,
    argmax_lowest,
    blur,
    count_regions,
    gaussian_kernel,
    greedy_policy,
    policy_evaluation_iterative,
    q_values,
    soft_value_iteration,
    value_iteration,
)
from qepi.grid import GridSpec, TransitionModel, build_transition_model
from qepi.sle import build_sle, residual


def chain2():
    return TransitionModel.from_branches(2, 1, [(0, 0, 1, 1.0, -1.0)], terminal=[1])


def choice2():
    # a=0 self-loops, a=1 stays too but costs more, a=2 reaches the terminal state
    return TransitionModel.from_branches(
        2, 3, [(0, 0, 0, 1.0, -1.0), (0, 1, 0, 1.0, -1.0), (0, 2, 1, 1.0, -1.0)], terminal=[1]
    )


class TestValueIteration:
    def test_two_state_chain(self):
        assert value_iteration(chain2(), 0.99).values == pytest.approx([-1.0, 0.0])

    def test_three_state_chain(self, chain3):
        vf = value_iteration(chain3, 0.99)
        assert vf.converged
        assert vf.values == pytest.approx([-1.99, -1.0, 0.0], abs=1e-12)

    def test_gamma_zero_is_expected_reward(self):
        m = build_transition_model(GridSpec(6, 6))
        v = value_iteration(m, 0.0).values
        q0 = q_values(m, np.zeros(m.mu), 0.0).max(axis=1)
        q0[m.terminal] = 0.0
        assert np.allclose(v, q0)

    def test_bad_gamma(self, chain3):
        with pytest.raises(ValueError):
            value_iteration(chain3, 1.0)

    def test_sweep_cap_reports_not_converged(self):
        m = build_transition_model(GridSpec(8, 8))
        vf = value_iteration(m, 0.99, sweeps=3)
        assert not vf.converged and vf.sweeps == 3


class TestGreedy:
    def test_reaching_terminal_wins(self):
        m = choice2()
        v = value_iteration(m, 0.99).values
        assert greedy_policy(m, v, 0.99)[0] == 2

    def test_identical_actions_tie_to_zero(self):
        m = TransitionModel.from_branches(
            2, 3, [(0, a, 1, 1.0, -1.0) for a in range(3)], terminal=[1]
        )
        assert greedy_policy(m, [-5.0, 0.0], 0.9)[0] == 0

    def test_constant_shift_keeps_policy(self):
        m = build_transition_model(GridSpec(8, 8))
        v = value_iteration(m, 0.99).values
        live = ~m.terminal
        a = greedy_policy(m, v, 0.99)
        # only the stochastic rows of nonterminal destinations are shift-invariant
        shifted = v + 3.0 * live
        b = greedy_policy(m, shifted, 0.99)
        into_terminal = np.bincount(m.row_ids(), weights=m.prob * m.terminal[m.dest], minlength=m.mu * 3)
        clean = np.all(into_terminal.reshape(m.mu, 3) == 0, axis=1)
        assert np.array_equal(a[clean], b[clean])

    def test_argmax_lowest(self):
        q = np.array([[1.0, 1.0 + 1e-13, 0.5], [0.0, 2.0, 2.0]])
        assert list(argmax_lowest(q)) == [0, 1]


class TestPolicyEvaluation:
    def test_terminal_only(self):
        m = TransitionModel.from_branches(3, 1, [], terminal=[0, 1, 2])
        vf = policy_evaluation_iterative(m, [0, 0, 0], 0.9)
        assert np.all(vf.values == 0.0)

    def test_three_state_chain(self, chain3):
        vf = policy_evaluation_iterative(chain3, [0, 0, 0], 0.99)
        assert vf.values == pytest.approx([-1.99, -1.0, 0.0])

    def test_satisfies_linear_system(self):
        m = build_transition_model(GridSpec(8, 8))
        pi = np.random.default_rng(0).integers(0, 3, m.mu)
        tol = 1e-10
        vf = policy_evaluation_iterative(m, pi, 0.9, tol=tol)
        assert residual(build_sle(m, pi, 0.9), vf.values) <= tol * m.mu


class TestSoft:
    def test_kernel(self):
        k = gaussian_kernel(2.0, 4.0)
        assert len(k) == 17
        assert k.sum() == pytest.approx(1.0)
        assert np.allclose(k, k[::-1])

    def test_sigma_zero_is_plain_vi(self):
        m = build_transition_model(GridSpec(16, 16))
        vf = value_iteration(m, 0.99)
        sf, pi = soft_value_iteration(m, 0.99, SoftParams(0.0))
        assert np.array_equal(sf.values, vf.values)
        assert np.array_equal(pi, greedy_policy(m, vf.values, 0.99))

    @settings(max_examples=25, deadline=None)
    @given(c=st.floats(-100, 100), sigma=st.floats(0.3, 5), n=st.integers(2, 12), m=st.integers(2, 12))
    def test_blur_keeps_constants(self, c, sigma, n, m):
        out = blur(np.full((n, m), c), SoftParams(sigma))
        assert np.allclose(out, c, atol=1e-9 * (1 + abs(c)))

    def test_blur_matches_direct_convolution(self, rng):
        f = rng.normal(size=(9, 7))
        k = gaussian_kernel(1.5, 2.0)
        r = len(k) // 2
        ref = np.zeros_like(f)
        for i in range(9):
            for j in range(7):
                num = den = 0.0
                for di in range(-r, r + 1):
                    for dj in range(-r, r + 1):
                        if 0 <= i + di < 9 and 0 <= j + dj < 7:
                            w = k[di + r] * k[dj + r]
                            num += w * f[i + di, j + dj]
                            den += w
                ref[i, j] = num / den
        assert np.allclose(blur(f, SoftParams(1.5, 2.0)), ref)

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            SoftParams(-1.0)


def test_count_regions():
    pol = np.array([[0, 0, 1], [2, 0, 1], [2, 2, 0]]).ravel()
    # zeros split into two pieces, ones and twos one piece each
    assert count_regions(pol, (3, 3)) == 4
