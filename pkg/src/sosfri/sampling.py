"""
Acquisition chain: filter with ``s*(-t)``, sample, optionally add noise.

Samples are inner products ``c[n] = <s(t - t_n), x(t)> = int x(t) s*(t - t_n) dt``.
Kernels are stored as ``s`` (``g`` or ``g_r``) and conjugated here.

Two routes compute the integral:

* analytic -- Diracs give ``c[n] = sum_l a_l s*(t_l - t_n)``; Gaussians against
  a rect-windowed trigonometric polynomial reduce to complex error functions;
* quadrature -- the signal is rendered on a fine grid over the kernel support
  and summed.  The grid is half-open and uniform, so the sum is the
  trapezoidal rule for integrands that vanish or wrap at the ends, which is
  the case for every kernel/stream pairing accepted here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import erf

from .errors import BurstSpacingError, GridResolutionError, SosFriError, SupportMismatchError
from .kernels import LowpassKernel, PeriodicExtensionKernel, SosKernel, replica_count
from .signal import PulseStream, _accumulate_pulses

Kernel = Union[SosKernel, PeriodicExtensionKernel, LowpassKernel]

DEFAULT_GRID_FACTOR = 1000


@dataclass(frozen=True)
class AcquisitionConfig:
    """Sampling setup.

    Uniform instants are ``window_start + n T`` for ``n = 0..N-1`` with
    ``T = tau / N`` unless given.  Passing ``instants`` switches to
    nonuniform sampling and overrides ``N``/``T``.
    """

    kernel: Kernel
    N: int
    T: Optional[float] = None
    window_start: float = 0.0
    instants: Optional[np.ndarray] = None
    grid_factor: int = DEFAULT_GRID_FACTOR
    method: str = "auto"

    def __post_init__(self):
        if self.instants is not None:
            inst = np.atleast_1d(np.asarray(self.instants, dtype=float))
            object.__setattr__(self, "instants", inst)
            object.__setattr__(self, "N", len(inst))
        if self.N < 1:
            raise SosFriError("N must be at least 1")
        if self.T is not None and not self.T > 0:
            raise SosFriError("T must be positive")
        if self.method not in ("auto", "analytic", "quadrature"):
            raise SosFriError(f"unknown acquisition method {self.method!r}")

    @property
    def period(self) -> float:
        return self.T if self.T is not None else self.kernel.tau / self.N

    @property
    def times(self) -> np.ndarray:
        if self.instants is not None:
            return self.instants
        return self.window_start + self.period * np.arange(self.N)

    def describe(self) -> dict:
        k = self.kernel
        d = {
            "N": self.N,
            "T": self.period,
            "window_start": self.window_start,
            "uniform": self.instants is None,
            "grid_factor": self.grid_factor,
            "method": self.method,
        }
        if isinstance(k, LowpassKernel):
            d["kernel"] = {"lowpass": True, "tau": k.tau, "M": k.M, "truncation": k.truncation}
        else:
            d["kernel"] = k.to_dict()
        return d


@dataclass(frozen=True)
class SampleSet:
    """Sample instants and values, with the noiseless values kept alongside."""

    instants: np.ndarray
    values: np.ndarray
    clean_values: np.ndarray
    noise_sigma: float = 0.0
    snr_db: Optional[float] = None
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.instants) == len(self.values) == len(self.clean_values)):
            raise SosFriError("instants, values and clean values must have equal length")

    @property
    def N(self) -> int:
        return len(self.values)

    def with_values(self, values, **meta) -> "SampleSet":
        return replace(self, values=np.asarray(values), meta={**self.meta, **meta})

    def to_csv(self, path) -> None:
        """Write ``instant, re, im, clean_re, clean_im`` rows and a JSON sidecar."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["instant", "re", "im", "clean_re", "clean_im"])
            for t, v, c in zip(self.instants, self.values, self.clean_values):
                w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag)), repr(float(c.real)), repr(float(c.imag))])
        side = {
            "noise_sigma": self.noise_sigma,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "meta": self.meta,
        }
        with open(_sidecar(path), "w") as f:
            json.dump(side, f, indent=2, default=_json_default)

    @classmethod
    def from_csv(cls, path) -> "SampleSet":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = {}
        try:
            with open(_sidecar(path)) as f:
                side = json.load(f)
        except FileNotFoundError:
            pass
        return cls(
            instants=rows[:, 0],
            values=rows[:, 1] + 1j * rows[:, 2],
            clean_values=rows[:, 3] + 1j * rows[:, 4],
            noise_sigma=side.get("noise_sigma", 0.0),
            snr_db=side.get("snr_db"),
            seed=side.get("seed"),
            meta=side.get("meta", {}),
        )


def _sidecar(path) -> str:
    path = str(path)
    return (path[:-4] if path.endswith(".csv") else path) + ".json"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating)):
        return o.item()
    raise TypeError(type(o))


def _check_compatibility(stream: PulseStream, config: AcquisitionConfig) -> None:
    kernel = config.kernel
    if isinstance(kernel, SosKernel) and kernel.window is not None and kernel.window.time_fn is None:
        raise SupportMismatchError("custom-window kernel has no time-domain form to sample with")
    if stream.kind == "periodic":
        if isinstance(kernel, PeriodicExtensionKernel):
            raise SupportMismatchError("periodic streams are sampled with the base kernel g, not g_r")
        return
    if isinstance(kernel, SosKernel):
        raise SupportMismatchError(f"{stream.kind} streams need the periodic extension g_r")
    if isinstance(kernel, PeriodicExtensionKernel):
        need = replica_count(stream.shape.support, stream.tau)
        if kernel.r < need:
            raise SupportMismatchError(f"pulse support {stream.shape.support:g} needs r >= {need}, got {kernel.r}")
        if abs(kernel.tau - stream.tau) > 1e-12 * stream.tau:
            raise SupportMismatchError("kernel period differs from stream window")
    if stream.kind == "finite":
        t = config.times
        if np.any(t < 0) or np.any(t >= stream.tau):
            raise SupportMismatchError("finite-stream samples must be taken inside [0, tau)")
    if stream.kind == "bursty":
        from .bursts import validate_plan

        if isinstance(kernel, PeriodicExtensionKernel):
            report = validate_plan(stream, kernel)
            if not report.passed:
                raise BurstSpacingError(f"burst spacing below threshold {report.threshold:g}: margins {report.margins}")


def _within_reach(stream: PulseStream, kernel: Kernel, t: np.ndarray):
    """Delays and amplitudes of the pulses that can touch some sample.

    Dropping the others keeps far-away bursts out of the sums entirely, so
    in-burst samples are bit-identical with or without them.
    """
    if stream.kind == "periodic" or not np.isfinite(kernel.support):
        return stream.delays, stream.amplitudes
    reach = kernel.support / 2 + stream.shape.support / 2
    keep = (stream.delays > t.min() - reach) & (stream.delays < t.max() + reach)
    return stream.delays[keep], stream.amplitudes[keep]


def _dirac_samples(stream: PulseStream, kernel: Kernel, t: np.ndarray) -> np.ndarray:
    delays, a = _within_reach(stream, kernel, t)
    diff = np.subtract.outer(delays, t)  # t_l - t_n, shape (L, N)
    if stream.kind == "periodic":
        if isinstance(kernel, SosKernel):
            # one replica of each Dirac falls in the half-open support of g
            tau = stream.tau
            diff = np.mod(diff + tau / 2, tau) - tau / 2
            return a @ np.conj(kernel(diff))
        m = np.arange(-kernel.truncation, kernel.truncation + 1) * stream.tau
        vals = np.conj(kernel(diff[..., None] + m)).sum(axis=-1)
        return a @ vals
    return a @ np.conj(kernel(diff))


def _gaussian_trig_integral(center, lo, hi, sigma, omega):
    """``int_lo^hi h(t - center) exp(-j omega (t - center)) dt`` for a unit-area Gaussian."""
    s2 = np.sqrt(2) * sigma
    shift = 1j * omega * sigma**2
    return 0.5 * np.exp(-0.5 * (omega * sigma) ** 2) * (erf((hi - center + shift) / s2) - erf((lo - center + shift) / s2))


def _gaussian_samples(stream: PulseStream, kernel: Kernel, t: np.ndarray) -> np.ndarray:
    base = kernel.base if isinstance(kernel, PeriodicExtensionKernel) else kernel
    if not isinstance(base, SosKernel) or base.window is not None:
        raise SosFriError("analytic Gaussian sampling needs a rect-sinc SoS kernel")
    tau = stream.tau
    sigma = stream.shape.sigma
    half = kernel.support / 2
    ks = base.ks
    omega = 2 * np.pi * ks / tau
    delays, amplitudes = _within_reach(stream, kernel, t)
    out = np.zeros(len(t), dtype=complex)
    if len(delays) == 0:
        return out
    for n, tn in enumerate(t):
        lo, hi = tn - half, tn + half
        centers = delays
        amps = amplitudes
        if stream.kind == "periodic":
            reach = stream.shape.support / 2
            ms = np.arange(np.floor((lo - reach - centers.max()) / tau), np.ceil((hi + reach - centers.min()) / tau) + 1)
            centers = (centers[:, None] + ms * tau).ravel()
            amps = np.repeat(amps, len(ms))
        # conj(g(t - t_n)) = sum_k conj(b_k) exp(-j w_k (t - t_n)) on [lo, hi)
        I = _gaussian_trig_integral(centers[:, None], lo, hi, sigma, omega[None, :])
        phase = np.exp(-1j * omega[None, :] * (centers[:, None] - tn))
        out[n] = amps @ ((I * phase) @ np.conj(base.b))
    return out


def _quadrature_samples(stream: PulseStream, kernel: Kernel, t: np.ndarray, T: float, factor: int) -> np.ndarray:
    if stream.shape.kind == "dirac":
        raise SosFriError("Dirac streams can only be sampled analytically")
    support = kernel.support
    if not np.isfinite(support):
        raise SosFriError("kernel support must be finite for quadrature")
    n_pts = int(np.ceil(support / (T / factor)))
    dt = support / n_pts
    if dt > stream.shape.min_feature() / 4:
        raise GridResolutionError(f"quadrature grid {dt:g} too coarse for pulse feature {stream.shape.min_feature():g}")
    u = -support / 2 + dt * np.arange(n_pts)
    weights = np.conj(kernel(u)) * dt
    out = np.zeros(len(t), dtype=complex)
    for n, tn in enumerate(t):
        out[n] = _accumulate_pulses(stream, tn + u) @ weights
    return out


def acquire(stream: PulseStream, config: AcquisitionConfig) -> SampleSet:
    """Noiseless samples ``c[n] = <s(t - t_n), x(t)>``.

    Raises
    ------
    SupportMismatchError
        The kernel cannot sample this stream kind (wrong kernel type, too few
        replicas, or finite-stream instants outside ``[0, tau)``).
    BurstSpacingError
        A bursty stream violates the isolation spacing for the kernel.
    GridResolutionError
        The quadrature grid does not resolve the pulse.
    """
    _check_compatibility(stream, config)
    kernel = config.kernel
    t = config.times
    method = config.method
    if method == "auto":
        method = "analytic" if stream.shape.kind == "dirac" else "quadrature"
    if stream.L == 0:
        values = np.zeros(len(t), dtype=complex)
    elif stream.shape.kind == "dirac":
        values = _dirac_samples(stream, kernel, t)
    elif method == "analytic":
        if stream.shape.kind != "gaussian":
            raise SosFriError("analytic sampling supports Dirac and Gaussian pulses only")
        values = _gaussian_samples(stream, kernel, t)
    else:
        values = _quadrature_samples(stream, kernel, t, config.period, config.grid_factor)
    values = np.asarray(values, dtype=complex)
    meta = config.describe()
    meta["method_used"] = "analytic" if stream.shape.kind == "dirac" else method
    meta["stream_kind"] = stream.kind
    return SampleSet(t.copy(), values, values.copy(), meta=meta)


def noise_sigma_for_snr(clean, snr_db: float) -> float:
    """``sigma_n`` such that ``(||c||^2 / N) / sigma_n^2`` equals the target SNR."""
    clean = np.asarray(clean)
    power = np.sum(np.abs(clean) ** 2) / len(clean)
    return float(np.sqrt(power / 10 ** (snr_db / 10)))


def _is_real(values, tol: float = 1e-12) -> bool:
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        return True
    scale = np.max(np.abs(values)) if values.size else 0.0
    return bool(np.all(np.abs(values.imag) <= tol * max(scale, np.finfo(float).tiny)))


def add_noise(samples: SampleSet, target_snr_db: float, rng_seed=None, complex_noise: Optional[bool] = None) -> SampleSet:
    """Add white Gaussian noise at a target SNR.

    Noise is real for real clean samples and circular complex otherwise
    (total variance ``sigma_n^2`` either way) unless ``complex_noise`` says
    otherwise.  ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    if target_snr_db is None or np.isinf(target_snr_db):
        return replace(samples, values=samples.clean_values.copy(), noise_sigma=0.0, snr_db=None)
    clean = samples.clean_values
    sigma = noise_sigma_for_snr(clean, target_snr_db)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if complex_noise is None:
        complex_noise = not _is_real(clean)
    if complex_noise:
        w = (rng.standard_normal(len(clean)) + 1j * rng.standard_normal(len(clean))) * (sigma / np.sqrt(2))
    else:
        w = rng.standard_normal(len(clean)) * sigma
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return replace(samples, values=clean + w, noise_sigma=sigma, snr_db=float(target_snr_db), seed=seed)
