import numpy as np
import pytest
from scipy.integrate import quad

from sosfri.bursts import (
    BurstPlan,
    acquire_bursts,
    detect_bursts,
    rate_accounting,
    read_burst_csv,
    recover_bursts,
    segment_and_recover,
    spacing_threshold,
    validate_plan,
    write_burst_csv,
)
from sosfri.kernels import SosKernel, make_periodic_extension
from sosfri.sampling import SampleSet
from sosfri.signal import PulseShape, PulseStream

LOCAL = [np.array([0.05, 0.21, 0.4, 0.63, 0.88]), np.array([0.1, 0.3, 0.52, 0.7, 0.93]), np.array([0.02, 0.37, 0.5, 0.66, 0.81])]
AMPS = [np.array([1.0, -0.5, 0.8, 1.2, -1.1]), np.array([0.7, 0.9, -1.3, 0.6, 1.0]), np.array([-0.4, 1.5, 0.9, -0.8, 1.1])]


def dirac_bursts(starts, zero=None, keep=None):
    keep = range(len(starts)) if keep is None else keep
    d = np.concatenate([starts[i] + LOCAL[i] for i in keep])
    a = np.concatenate([AMPS[i] * (0 if i == zero else 1) for i in keep])
    return PulseStream(PulseShape.dirac(), d, a, "bursty", 1.0, [starts[i] for i in keep])


def test_dirac_spacing_threshold():
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    assert spacing_threshold(gr, 0.0) == 1.5
    ok = validate_plan(dirac_bursts([0.0, 2.6]), gr)
    assert ok.passed and ok.margins[0] == pytest.approx(0.1)
    bad = validate_plan(dirac_bursts([0.0, 2.4]), gr)
    assert not bad.passed and bad.margins[0] == pytest.approx(-0.1)


def leakage(gr, shape, pulse_at, n_probe=60):
    """Largest |<g_r(t - t_n), h(t - pulse_at)>| over instants t_n in [0, tau)."""
    half = shape.support / 2
    worst = 0.0
    for tn in np.linspace(0, 1 - 1e-9, n_probe):
        f = lambda t: shape(np.array([t - pulse_at]))[0] * np.conj(gr(np.array([t - tn]))[0])  # noqa: E731
        lo, hi = pulse_at - half, pulse_at + half
        re = quad(lambda t: f(t).real, lo, hi, limit=200, epsabs=1e-16)[0]
        im = quad(lambda t: f(t).imag, lo, hi, limit=200, epsabs=1e-16)[0]
        worst = max(worst, abs(re + 1j * im))
    return worst


def test_gaussian_threshold_matches_leakage():
    R = 0.5
    shape = PulseShape.gaussian(R / 16)
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 3), R)
    assert gr.r == 1
    thr = spacing_threshold(gr, R)
    assert thr == pytest.approx(1.75)
    # a pulse sitting at the start of the next burst window
    assert leakage(gr, shape, 1.0 + thr + 1e-6) < 1e-10
    assert leakage(gr, shape, 1.0 + thr - 0.1) > 1e-10


def test_three_bursts_exact():
    starts = [0.0, 2.6, 5.3]
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    out = segment_and_recover(dirac_bursts(starts), gr, 11, 5)
    assert len(out) == 3
    for i, res in enumerate(out):
        assert res.error is None and res.options["burst_start"] == starts[i]
        assert np.max(np.abs(res.delays - (starts[i] + LOCAL[i]))) < 1e-7
        assert np.max(np.abs(res.amplitudes - AMPS[i])) < 1e-7


def test_empty_burst_list():
    s = PulseStream(PulseShape.dirac(), [], [], "bursty", 1.0, [])
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 2), 0.0)
    assert segment_and_recover(s, gr, 5, 2) == []


def test_zeroed_burst_is_degenerate_and_isolated():
    starts = [0.0, 2.6, 5.3]
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    out = segment_and_recover(dirac_bursts(starts, zero=1), gr, 11, 5)
    assert out[1].annihilator.degenerate and out[1].annihilator.effective_rank == 0
    for i in (0, 2):
        assert np.max(np.abs(out[i].delays - (starts[i] + LOCAL[i]))) < 1e-7


def test_isolation_is_bit_identical():
    starts = [0.0, 2.6, 5.3]
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    full = segment_and_recover(dirac_bursts(starts), gr, 11, 5)
    for i in range(3):
        alone = segment_and_recover(dirac_bursts(starts, keep=[i]), gr, 11, 5)[0]
        assert np.array_equal(alone.delays, full[i].delays)
        assert np.array_equal(alone.amplitudes, full[i].amplitudes)


def test_failing_burst_does_not_abort_others():
    starts = [0.0, 2.6]
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    sets = acquire_bursts(dirac_bursts(starts, keep=[0, 1]), gr, 11)
    broken = SampleSet(sets[1].instants[:3], sets[1].values[:3], sets[1].values[:3])
    out = recover_bursts([sets[0], broken], starts, gr, PulseShape.dirac(), 5)
    assert out[0].error is None and out[1].error is not None
    assert np.max(np.abs(out[0].delays - LOCAL[0])) < 1e-7


def test_max_pulses_check():
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    s = dirac_bursts([0.0, 2.6])
    assert validate_plan(s, gr, max_pulses=5).passed
    rep = validate_plan(s, gr, max_pulses=4)
    assert not rep.passed and rep.pulses_per_burst == [5, 5]


def test_rate_accounting():
    acc = rate_accounting(5, 1.0)
    assert acc["sampling_rate"] == 10
    assert acc["innovation_rate"] == pytest.approx(10 / 2.5)
    assert acc["oversampling"] == pytest.approx(2.5)


def test_plan_configs_and_document():
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 2), 0.0)
    plan = BurstPlan(np.array([0.0, 3.0]), 1.0, gr, 0.0, 5)
    cfgs = plan.configs()
    assert [c.window_start for c in cfgs] == [0.0, 3.0] and cfgs[1].times[0] == 3.0
    doc = plan.to_dict()
    assert doc["r"] == 1 and doc["threshold"] == 1.5


def test_burst_csv_roundtrip(tmp_path):
    gr = make_periodic_extension(SosKernel.dirichlet(1.0, 5), 0.0)
    sets = acquire_bursts(dirac_bursts([0.0, 2.6]), gr, 11)
    write_burst_csv(tmp_path / "b.csv", sets, burst_ids=[4, 9])
    back = read_burst_csv(tmp_path / "b.csv")
    assert sorted(back) == [4, 9]
    assert np.array_equal(back[9].values, sets[1].values)
    assert np.array_equal(back[4].instants, sets[0].instants)


def test_detector_finds_starts():
    t = np.arange(0, 10, 0.01)
    v = np.where(((t >= 1) & (t < 2)) | ((t >= 5) & (t < 6)), 1.0, 0.0)
    assert np.allclose(detect_bursts(t, v, 1.0), [1.0, 5.0])
