import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sosfri.errors import KernelDomainError, SosFriError
from sosfri.kernels import (
    CustomWindow,
    LowpassKernel,
    PeriodicExtensionKernel,
    SosKernel,
    eval_kernel_freq,
    eval_kernel_time,
    hamming_coefficients,
    kernel_from_dict,
    load_kernel,
    make_periodic_extension,
    replica_count,
    save_kernel,
    verify_condition,
)


def direct_sum(b, ks, t, tau):
    return sum(bk * np.exp(2j * np.pi * k * t / tau) for k, bk in zip(ks, b))


def test_dirichlet_peak():
    g = SosKernel.dirichlet(1.0, 10)
    assert eval_kernel_time(g, 0.0) == pytest.approx(21)


def test_outside_support_and_half_open_boundary():
    g = SosKernel.hamming(1.0, 11)
    assert eval_kernel_time(g, 0.7) == 0
    assert eval_kernel_time(g, 0.5) == 0
    assert eval_kernel_time(g, -0.5) != 0


def test_hamming_coefficients():
    b = hamming_coefficients(11)
    n = np.arange(11)
    assert np.allclose(b, 0.54 - 0.46 * np.cos(2 * np.pi * n / 10), atol=1e-15)
    assert np.array_equal(b, b[::-1])
    assert hamming_coefficients(1)[0] == 1


def test_hamming_time_value_against_direct_sum():
    g = SosKernel.hamming(2.0, 11)
    assert eval_kernel_time(g, 0.0) == pytest.approx(np.sum(g.b), rel=1e-14)
    t = np.linspace(-0.99, 0.99, 37)
    assert np.allclose(eval_kernel_time(g, t), direct_sum(g.b, g.ks, t, 2.0), atol=1e-12)


def test_frequency_sifting():
    g = SosKernel.dirichlet(1.0, 2)
    assert eval_kernel_freq(g, 2 * np.pi * 1.0) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert eval_kernel_freq(g, 2 * np.pi * 7.0) == 0
    h = SosKernel.hamming(0.5, 9)
    vals = eval_kernel_freq(h, 2 * np.pi * h.ks / 0.5)
    assert np.array_equal(vals, 0.5 / np.sqrt(2 * np.pi) * h.b)


def test_frequency_between_harmonics_matches_quadrature():
    tau = 1.0
    g = SosKernel.hamming(tau, 11)
    for w in (2 * np.pi * 0.37, 2 * np.pi * 3.5, 2 * np.pi * 8.21):
        f = lambda t: eval_kernel_time(g, t) * np.exp(-1j * w * t)  # noqa: E731
        re = quad(lambda t: f(t).real, -tau / 2, tau / 2, limit=400, epsabs=1e-13)[0]
        im = quad(lambda t: f(t).imag, -tau / 2, tau / 2, limit=400, epsabs=1e-13)[0]
        plain = eval_kernel_freq(g, w, unitary=False)
        assert abs(plain - (re + 1j * im)) <= 1e-8 * abs(plain)
        assert eval_kernel_freq(g, w) == pytest.approx(plain / np.sqrt(2 * np.pi))


def test_condition_passes_for_sos():
    g = SosKernel.hamming(1.0, 11)
    rep = verify_condition(g.ctft, g.ks, 1.0, range(-20, 21))
    assert rep.passed and not rep.failures and not rep.inconclusive


def test_condition_passes_for_ideal_lowpass():
    M, tau = 11, 1.0
    B = M / tau
    S = lambda w: np.where(np.abs(w) < np.pi * B, 1.0, 0.0) / np.sqrt(2 * np.pi)  # noqa: E731
    assert verify_condition(S, range(-5, 6), tau, range(-20, 21)).passed
    assert verify_condition(LowpassKernel(tau, M).ctft, range(-5, 6), tau, range(-20, 21)).passed


def test_condition_fails_for_zeroed_coefficient():
    b = np.ones(11)
    b[7] = 0
    g = SosKernel(1.0, np.arange(-5, 6), b)
    rep = verify_condition(g.ctft, g.ks, 1.0, range(-20, 21))
    assert not rep.passed and rep.failures == [2]


def test_condition_reports_gray_zone():
    b = np.ones(5)
    b[0] = 1e-7
    g = SosKernel(1.0, np.arange(-2, 3), b)
    rep = verify_condition(g.ctft, g.ks, 1.0, range(-5, 6))
    assert rep.inconclusive == [-2] and not rep.passed


def test_condition_probe_must_cover_index_set():
    g = SosKernel.dirichlet(1.0, 3)
    with pytest.raises(SosFriError):
        verify_condition(g.ctft, g.ks, 1.0, range(-2, 3))


def brute_force_r(R, tau, rng):
    # widest kernel argument t - nT for samples and pulse support inside [0, tau)
    n = rng.uniform(0, tau, 4000)
    t_l = rng.uniform(0, tau, 4000)
    u = rng.uniform(-R / 2, R / 2, 4000)
    reach = np.max(np.abs(np.concatenate([t_l + u - n, [tau + R / 2 - 1e-9, -tau - R / 2 + 1e-9]])))
    r = 0
    while (2 * r + 1) * tau / 2 < reach:
        r += 1
    return r


@pytest.mark.parametrize("R", [0.0, 0.3, 1.0, 2.5, 4.2, 7.0])
def test_replica_count(R):
    assert replica_count(R, 1.0) == brute_force_r(R, 1.0, np.random.default_rng(0))


def test_replica_count_examples():
    assert replica_count(0.0, 1.0) == 1
    assert replica_count(0.9, 1.0) == 1
    assert replica_count(2.5, 1.0) == 2
    assert make_periodic_extension(SosKernel.dirichlet(1.0, 2), 1.0).r == 1


@settings(max_examples=60, deadline=None)
@given(st.floats(-2.0, 2.0), st.integers(0, 3), st.integers(1, 6))
def test_extension_equals_replica_sum(t, r, p):
    g = PeriodicExtensionKernel(SosKernel.hamming(1.0, 2 * p + 1), r)
    assert np.allclose(g(t), g.replica_sum(t), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 2.0), min_size=1, max_size=6), st.lists(st.floats(-np.pi, np.pi), min_size=6, max_size=6))
def test_real_kernel_has_negligible_imaginary_part(mags, phases):
    p = len(mags)
    half = np.array(mags) * np.exp(1j * np.array(phases[:p]))
    b = np.concatenate([np.conj(half[::-1]), [1.0], half])
    g = SosKernel(1.0, np.arange(-p, p + 1), b)
    assert g.is_real
    v = eval_kernel_time(g, np.linspace(-0.5, 0.49, 301))
    assert np.max(np.abs(v.imag)) < 1e-12 * np.max(np.abs(v))


def test_is_real_flag():
    assert SosKernel.hamming(1.0, 11).is_real
    assert not SosKernel(1.0, np.arange(0, 3), np.ones(3)).is_real
    assert not SosKernel(1.0, np.arange(-1, 2), [1, 1, 2]).is_real


def test_custom_window_is_frequency_only():
    win = CustomWindow(lambda x: np.sinc(x) ** 2)
    assert win.check()
    g = SosKernel(1.0, np.arange(-2, 3), np.ones(5), window=win)
    assert eval_kernel_freq(g, 2 * np.pi * 1.0, unitary=False) == pytest.approx(1.0)
    assert eval_kernel_freq(g, 2 * np.pi * 1.5, unitary=False) == pytest.approx(np.sum(np.sinc(1.5 - g.ks) ** 2))
    with pytest.raises(KernelDomainError):
        eval_kernel_time(g, 0.0)
    tri = CustomWindow(lambda x: np.sinc(x) ** 2, time_fn=lambda t: np.maximum(1 - np.abs(t), 0), support=2.0)
    g2 = SosKernel(1.0, np.arange(-2, 3), np.ones(5), window=tri)
    assert eval_kernel_time(g2, 0.0) == pytest.approx(5)


def test_invalid_kernels():
    with pytest.raises(SosFriError):
        SosKernel(1.0, [0, 2], [1, 1])
    with pytest.raises(SosFriError):
        SosKernel(0.0, [0], [1])
    with pytest.raises(SosFriError):
        PeriodicExtensionKernel(SosKernel.dirichlet(1.0, 1), -1)


def test_json_roundtrip(tmp_path):
    g = make_periodic_extension(SosKernel(2.0, np.arange(-2, 3), [1, 2j, 3, -2j, 1]), 3.0)
    save_kernel(g, tmp_path / "k.json")
    back = load_kernel(tmp_path / "k.json")
    assert isinstance(back, PeriodicExtensionKernel) and back.r == g.r
    assert np.array_equal(back.base.b, g.base.b) and back.tau == 2.0
    doc = g.to_dict()
    assert doc["window"] == "rect-sinc" and doc["coefficients"][1] == {"k": -1, "re": 0.0, "im": 2.0}
    assert isinstance(kernel_from_dict(SosKernel.dirichlet(1.0, 2).to_dict()), SosKernel)


def test_normalized_has_unit_energy():
    g = SosKernel.hamming(1.0, 7).normalized()
    assert np.sum(np.abs(g.b) ** 2) == pytest.approx(1.0)


def test_extension_ctft_at_harmonics():
    g = PeriodicExtensionKernel(SosKernel.hamming(1.0, 5), 1)
    w = 2 * np.pi * g.ks
    assert np.allclose(g.ctft(w), 3 * g.base.b)
