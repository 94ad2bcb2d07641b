import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sosfri.errors import SosFriError
from sosfri.signal import PulseShape
from sosfri.waterfilling import effective_gains, kkt_residual, mse_objective, optimal_coefficients, waterfill

pytest.importorskip("cvxpy")

from oracles import convex_oracle, projected_gradient, random_instance  # noqa: E402


def test_matches_convex_oracle_on_random_instances():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        h, s2, N = random_instance(rng)
        sol = waterfill(h, s2, N)
        ref = convex_oracle(np.abs(h) ** 2, N / s2)
        worst = max(worst, np.max(np.abs(sol.beta - ref)))
        assert sol.objective() <= mse_objective(ref, sol.h_tilde, sol.gain) + 1e-12
        assert abs(sol.beta.sum() - 1) <= 1e-10 and sol.beta.min() >= 0
        assert kkt_residual(sol) < 1e-8
    assert worst < 1e-6


def test_dirac_gives_uniform_split_exactly():
    ks = np.arange(-5, 6)
    sol = optimal_coefficients(PulseShape.dirac(), 1.0, ks, 3, 1.0, 0.1, 11)
    assert np.all(sol.beta == 1 / 11)


def test_single_index():
    sol = waterfill([0.3 + 0.1j], 0.5, 4)
    assert sol.beta[0] == 1.0


def test_gaussian_example_matches_projected_gradient():
    ks = np.arange(-5, 6)
    shape = PulseShape.gaussian(7e-3)
    sol = optimal_coefficients(shape, 1.0, ks, 5, 1.0, 0.01, 11)
    q = np.abs(effective_gains(shape, 1.0, ks, 5, 1.0)) ** 2
    ref = projected_gradient(q, 11 / 0.01)
    assert np.max(np.abs(sol.beta - ref)) < 1e-6
    assert mse_objective(sol.beta, sol.h_tilde, sol.gain) <= mse_objective(ref, sol.h_tilde, sol.gain) + 1e-12


def test_strongly_decaying_gains_switch_indices_off():
    ks = np.arange(-5, 6)
    shape = PulseShape.gaussian(0.08)
    sol = optimal_coefficients(shape, 1.0, ks, 2, 1.0, 1.0, 11)
    assert sol.n_inactive > 0
    assert np.all(sol.beta[[0, -1]] == 0) and sol.beta[5] == sol.beta.max()
    q = np.abs(sol.h_tilde) ** 2
    ref = projected_gradient(q, sol.gain)
    assert np.max(np.abs(sol.beta - ref)) < 1e-6


def test_invalid_inputs():
    with pytest.raises(SosFriError):
        waterfill([1, 1], 0.0, 3)
    with pytest.raises(SosFriError):
        waterfill([1, 0], 1.0, 3)


gains = st.lists(st.floats(0.05, 20), min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(gains, st.floats(1e-3, 10), st.integers(1, 100))
def test_constraints_and_kkt(h, s2, N):
    sol = waterfill(np.array(h), s2, N)
    assert abs(sol.beta.sum() - 1) <= 1e-10
    assert np.all(sol.beta >= 0)
    assert kkt_residual(sol) < 1e-8


@settings(max_examples=150, deadline=None)
@given(gains, st.floats(1e-3, 10), st.integers(1, 100))
def test_monotone_activation(h, s2, N):
    h = np.array(h)
    sol = waterfill(h, s2, N)
    for i in np.nonzero(sol.beta > 0)[0]:
        assert np.all(sol.beta[h >= h[i]] > 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.05, 20), min_size=2, max_size=6), st.integers(1, 3), st.floats(1e-2, 10))
def test_equal_gains_get_equal_energy(levels, reps, s2):
    h = np.repeat(levels, reps)
    sol = waterfill(h, s2, 7)
    for v in np.unique(h):
        group = sol.beta[h == v]
        assert np.allclose(group, group[0], rtol=1e-12, atol=1e-15)


def test_stable_tie_order_is_deterministic():
    h = np.array([1.0, 2.0, 1.0, 2.0])
    a = waterfill(h, 0.3, 5)
    b = waterfill(h, 0.3, 5)
    assert np.array_equal(a.beta, b.beta)
