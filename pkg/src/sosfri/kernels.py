"""
Sum-of-Sincs (SoS) sampling kernels.

A SoS kernel is a trigonometric polynomial windowed to one period,

    g(t) = rect(t / tau) * sum_{k in K} b_k exp(j 2 pi k t / tau),

whose spectrum is a sum of shifted sincs centred on the harmonics ``2 pi k / tau``.
It vanishes at every harmonic outside ``K`` and equals ``tau * b_k`` at the
harmonics inside, so it passes exactly the Fourier coefficients indexed by
``K``.  :class:`PeriodicExtensionKernel` stacks ``2r + 1`` periods of ``g`` and
is what finite and bursty streams are sampled with.

The support of ``rect`` is the half-open interval ``[-tau/2, tau/2)``, which
makes replicas in the periodic extension tile the line exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import KernelDomainError, SosFriError

EPS_ZERO = 1e-9
EPS_NONZERO = 1e-6


def index_set(k_min: int, k_max: int) -> np.ndarray:
    """Consecutive integer indices ``k_min..k_max``."""
    if k_max < k_min:
        raise SosFriError("index set must be non-empty")
    return np.arange(int(k_min), int(k_max) + 1)


def symmetric_index_set(M: int) -> np.ndarray:
    """``{-(M//2), ..., M//2}`` for odd ``M``; even ``M`` drops the top index."""
    p = M // 2
    return index_set(-p, -p + M - 1)


def hamming_coefficients(M: int) -> np.ndarray:
    """Length-``M`` symmetric Hamming window ``0.54 - 0.46 cos(2 pi n / (M - 1))``.

    The symmetric form keeps ``b_k == b_{-k}`` so the kernel is real.
    """
    if M == 1:
        return np.ones(1)
    w = np.hamming(M)
    return (w + w[::-1]) / 2


@dataclass(frozen=True)
class CustomWindow:
    """Smooth replacement ``phi`` for the sinc in the SoS spectrum.

    ``phi`` must satisfy ``phi(0) = 1`` and ``phi(n) = 0`` for nonzero integers.
    ``time_fn`` optionally supplies the matching time-domain window ``w(t)`` so
    that ``g(t) = w(t) * sum_k b_k exp(j 2 pi k t / tau)``; without it the kernel
    is frequency-domain only.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    time_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support: float = np.inf

    def check(self, probe: int = 20, tol: float = 1e-9) -> bool:
        n = np.arange(-probe, probe + 1)
        v = np.asarray(self.phi(n.astype(float)))
        return abs(v[probe] - 1) < tol and np.all(np.abs(np.delete(v, probe)) < tol)

    @classmethod
    def tabulated(cls, u, values, time_fn=None, support=np.inf) -> "CustomWindow":
        u = np.asarray(u, dtype=float)
        values = np.asarray(values, dtype=float)
        return cls(lambda x: np.interp(x, u, values, left=0.0, right=0.0), time_fn, support)


@dataclass(frozen=True)
class SosKernel:
    """SoS kernel with period ``tau``, index set ``ks`` and coefficients ``b``."""

    tau: float
    ks: np.ndarray
    b: np.ndarray
    window: Optional[CustomWindow] = None

    def __post_init__(self):
        ks = np.asarray(self.ks, dtype=int)
        b = np.asarray(self.b, dtype=complex)
        object.__setattr__(self, "ks", ks)
        object.__setattr__(self, "b", b)
        if not self.tau > 0:
            raise SosFriError("tau must be positive")
        if ks.ndim != 1 or ks.size < 1 or np.any(np.diff(ks) != 1):
            raise SosFriError("index set must be consecutive integers")
        if b.shape != ks.shape:
            raise SosFriError("one coefficient per index is required")

    @classmethod
    def from_coefficients(cls, tau: float, k_min: int, b, window=None) -> "SosKernel":
        b = np.asarray(b)
        return cls(tau, index_set(k_min, k_min + len(b) - 1), b, window)

    @classmethod
    def dirichlet(cls, tau: float, p: int) -> "SosKernel":
        """All coefficients one on ``{-p..p}``; time shape is ``D_p(2 pi t / tau)``."""
        ks = index_set(-p, p)
        return cls(tau, ks, np.ones(len(ks)))

    @classmethod
    def hamming(cls, tau: float, M: int) -> "SosKernel":
        return cls(tau, symmetric_index_set(M), hamming_coefficients(M))

    @property
    def M(self) -> int:
        return len(self.ks)

    @property
    def k_min(self) -> int:
        return int(self.ks[0])

    @property
    def k_max(self) -> int:
        return int(self.ks[-1])

    @property
    def support(self) -> float:
        if self.window is not None:
            return self.window.support
        return self.tau

    @property
    def is_real(self) -> bool:
        """Real-valued iff ``K`` is symmetric and ``b_k = conj(b_{-k})``."""
        return self.k_min == -self.k_max and np.allclose(self.b, np.conj(self.b[::-1]), rtol=1e-12, atol=1e-15)

    def coefficient(self, k) -> np.ndarray:
        """``b_k`` for each ``k``; zero outside the index set."""
        k = np.asarray(k, dtype=int)
        inside = (k >= self.k_min) & (k <= self.k_max)
        idx = np.clip(k - self.k_min, 0, self.M - 1)
        return np.where(inside, self.b[idx], 0)

    def __call__(self, t) -> np.ndarray:
        return eval_kernel_time(self, t)

    def ctft(self, omega) -> np.ndarray:
        """True CTFT ``G(w) = tau * sum_k b_k phi(w tau / 2 pi - k)``."""
        return eval_kernel_freq(self, omega, unitary=False)

    def normalized(self) -> "SosKernel":
        """Copy scaled to unit energy ``sum |b_k|^2 = 1``."""
        return SosKernel(self.tau, self.ks, self.b / np.linalg.norm(self.b), self.window)

    def to_dict(self, r: Optional[int] = None) -> dict:
        d = {
            "tau": self.tau,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "coefficients": [{"k": int(k), "re": float(b.real), "im": float(b.imag)} for k, b in zip(self.ks, self.b)],
            "window": "rect-sinc" if self.window is None else "custom",
        }
        if r is not None:
            d["r"] = int(r)
        return d


def _trig_poly(kernel: SosKernel, t: np.ndarray) -> np.ndarray:
    # Evaluated as exp(j 2 pi k_min t / tau) * polyval in z = exp(j 2 pi t / tau).
    z = np.exp(2j * np.pi * t / kernel.tau)
    acc = np.zeros(t.shape, dtype=complex)
    for bk in kernel.b[::-1]:
        acc = acc * z + bk
    return acc * np.exp(2j * np.pi * kernel.k_min * t / kernel.tau)


def eval_kernel_time(kernel: SosKernel, t) -> np.ndarray:
    """Evaluate ``g(t)``; zero outside ``[-tau/2, tau/2)``."""
    t = np.asarray(t, dtype=float)
    if kernel.window is not None:
        if kernel.window.time_fn is None:
            raise KernelDomainError("custom-window kernel has no time-domain form; supply time_fn")
        return kernel.window.time_fn(t) * _trig_poly(kernel, t)
    half = kernel.tau / 2
    inside = (t >= -half) & (t < half)
    return np.where(inside, _trig_poly(kernel, t), 0.0)


def eval_kernel_freq(kernel: SosKernel, omega, unitary: bool = True) -> np.ndarray:
    """Spectrum of a SoS kernel.

    With ``unitary=True`` (default) this is
    ``G(w) = tau / sqrt(2 pi) * sum_k b_k phi(w / (2 pi / tau) - k)``, the
    customary normalisation of the SoS family.  ``unitary=False`` drops the
    ``1 / sqrt(2 pi)`` and gives the plain CTFT of :func:`eval_kernel_time`,
    which is what the sampling equations need.
    """
    omega = np.asarray(omega, dtype=float)
    u = omega * kernel.tau / (2 * np.pi)
    arg = np.subtract.outer(u, kernel.ks)
    if kernel.window is None:
        phi = np.sinc(arg)
        # exact sifting at harmonics; sin(pi n) is only ~1e-16 in floating point
        near = np.abs(arg - np.round(arg)) < 1e-12
        phi = np.where(near, (np.round(arg) == 0).astype(float), phi)
    else:
        phi = np.asarray(kernel.window.phi(arg))
    g = kernel.tau * (phi @ kernel.b)
    return g / np.sqrt(2 * np.pi) if unitary else g


@dataclass(frozen=True)
class PeriodicExtensionKernel:
    """``g_r(t) = sum_{m=-r}^{r} g(t + m tau)``, support ``(2r + 1) tau``."""

    base: SosKernel
    r: int

    def __post_init__(self):
        if self.r < 0:
            raise SosFriError("replica count must be non-negative")
        if self.base.window is not None:
            raise KernelDomainError("periodic extension requires the rect-sinc window")

    @property
    def tau(self) -> float:
        return self.base.tau

    @property
    def ks(self) -> np.ndarray:
        return self.base.ks

    @property
    def support(self) -> float:
        return (2 * self.r + 1) * self.base.tau

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        half = self.support / 2
        inside = (t >= -half) & (t < half)
        return np.where(inside, _trig_poly(self.base, t), 0.0)

    def replica_sum(self, t) -> np.ndarray:
        """Direct replica summation, independent of :meth:`__call__`."""
        t = np.asarray(t, dtype=float)
        return sum(eval_kernel_time(self.base, t + m * self.tau) for m in range(-self.r, self.r + 1))

    def ctft(self, omega) -> np.ndarray:
        # At harmonics this equals (2r+1) tau b_k; kept general for off-grid use.
        omega = np.asarray(omega, dtype=float)
        shifts = np.arange(-self.r, self.r + 1)
        phase = np.exp(1j * np.multiply.outer(omega, shifts) * self.tau).sum(axis=-1)
        return phase * self.base.ctft(omega)

    def to_dict(self) -> dict:
        return self.base.to_dict(r=self.r)


@dataclass(frozen=True)
class LowpassKernel:
    """Ideal lowpass ``s(t) = B sinc(B t)`` with ``B = M / tau``.

    Its CTFT is ``rect(w / (2 pi B))``.  The infinite support is truncated to
    ``2 * truncation + 1`` periods whenever it must be handled in time.
    """

    tau: float
    M: int
    truncation: int = 50

    @property
    def bandwidth(self) -> float:
        return self.M / self.tau

    @property
    def ks(self) -> np.ndarray:
        return symmetric_index_set(self.M)

    @property
    def support(self) -> float:
        return (2 * self.truncation + 1) * self.tau

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        B = self.bandwidth
        return (B * np.sinc(B * t)).astype(complex)

    def ctft(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return np.where(np.abs(omega) < np.pi * self.bandwidth, 1.0, 0.0).astype(complex)


def kernel_from_dict(d: dict):
    """Rebuild a kernel from its JSON document."""
    if d.get("window", "rect-sinc") != "rect-sinc":
        raise KernelDomainError("custom windows cannot be restored from JSON")
    coeffs = sorted(d["coefficients"], key=lambda c: c["k"])
    ks = np.array([c["k"] for c in coeffs])
    if ks[0] != d["k_min"] or ks[-1] != d["k_max"]:
        raise SosFriError("coefficient list does not match k_min/k_max")
    b = np.array([complex(c["re"], c["im"]) for c in coeffs])
    base = SosKernel(float(d["tau"]), ks, b)
    if d.get("r") is not None:
        return PeriodicExtensionKernel(base, int(d["r"]))
    return base


def save_kernel(kernel, path) -> None:
    with open(path, "w") as f:
        json.dump(kernel.to_dict(), f, indent=2)


def load_kernel(path):
    with open(path) as f:
        return kernel_from_dict(json.load(f))


def replica_count(R: float, tau: float) -> int:
    """``r = ceil((R / tau + 3) / 2) - 1``: periods of ``g`` needed for support ``R``."""
    if not (R >= 0 and np.isfinite(R)):
        raise SosFriError("pulse support must be finite and non-negative")
    return math.ceil((R / tau + 3) / 2) - 1


def make_periodic_extension(kernel: SosKernel, R: float) -> PeriodicExtensionKernel:
    """Extension ``g_r`` wide enough for pulses of support ``R``."""
    return PeriodicExtensionKernel(kernel, replica_count(R, kernel.tau))


@dataclass
class ConditionReport:
    """Per-harmonic outcome of the sampling-kernel condition check."""

    ks: np.ndarray
    magnitudes: np.ndarray
    status: list = field(default_factory=list)
    expected: list = field(default_factory=list)
    eps_zero: float = 0.0
    eps_nonzero: float = 0.0

    @property
    def passed(self) -> bool:
        return all(s == e for s, e in zip(self.status, self.expected))

    @property
    def inconclusive(self) -> list:
        return [int(k) for k, s in zip(self.ks, self.status) if s == "inconclusive"]

    @property
    def failures(self) -> list:
        return [int(k) for k, s, e in zip(self.ks, self.status, self.expected) if s != e]


def verify_condition(S: Callable, ks, tau: float, probe_range) -> ConditionReport:
    """Check that ``S`` vanishes on harmonics outside ``ks`` and not inside.

    ``|S| < eps_zero`` counts as zero, ``|S| > eps_nonzero`` as nonzero, with
    both thresholds relative to ``max |S|`` over ``ks``.  Values in between
    are reported as inconclusive and count as failures.
    """
    ks = np.asarray(ks, dtype=int)
    probe = np.asarray(probe_range, dtype=int)
    if not set(ks.tolist()) <= set(probe.tolist()):
        raise SosFriError("probe range must contain the index set")
    mags = np.abs(np.asarray(S(2 * np.pi * probe / tau)))
    ref = np.abs(np.asarray(S(2 * np.pi * ks / tau))).max()
    eps_zero, eps_nonzero = EPS_ZERO * ref, EPS_NONZERO * ref
    in_set = np.isin(probe, ks)
    status = []
    for m in mags:
        if m <= eps_zero:
            status.append("zero")
        elif m > eps_nonzero:
            status.append("nonzero")
        else:
            status.append("inconclusive")
    expected = ["nonzero" if i else "zero" for i in in_set]
    return ConditionReport(probe, mags, status, expected, eps_zero, eps_nonzero)
