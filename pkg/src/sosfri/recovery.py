"""
From samples to delays and amplitudes.

The chain is

1. ``x = S^-1 V^+(-t_s) c``: Fourier coefficients from samples (or
   ``S^-1 DFT{c}`` when ``N = M`` and ``T = tau / N``);
2. ``y = H^-1 x``: remove the pulse spectrum, leaving
   ``y_k = sum_l a_l u_l^k`` with ``u_l = exp(-j 2 pi t_l / tau)``;
3. optional Cadzow denoising of ``y``;
4. annihilating filter (exact or TLS), its roots give the delays;
5. least squares on ``y`` gives the amplitudes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConditioningWarning, RankDeficientError, SosFriError
from .kernels import PeriodicExtensionKernel, SosKernel
from .sampling import SampleSet
from .signal import FourierCoeffVector, PulseShape, pulse_diagonal

RANK_TOL = 1e-10
H_WARN = 1e-8


@dataclass(frozen=True)
class CoefficientSystem:
    """Linear model ``c = V(-t_s) S x`` tying samples to Fourier coefficients."""

    ks: np.ndarray
    tau: float
    instants: np.ndarray
    s_diag: np.ndarray
    h_diag: np.ndarray

    def __post_init__(self):
        if len(self.instants) < len(self.ks):
            raise SosFriError(f"need N >= M samples, got N={len(self.instants)} < M={len(self.ks)}")
        if np.any(self.s_diag == 0):
            raise SosFriError("sampling correction S has a zero on the index set")

    @classmethod
    def build(cls, kernel, instants, shape: PulseShape, ks=None) -> "CoefficientSystem":
        """Assemble the system for a kernel, sample instants and pulse.

        For SoS kernels ``S*(2 pi k / tau) = tau conj(b_k)``; a periodic
        extension produces the same samples as its base kernel on a periodic
        stream, so it shares the base diagonal.
        """
        base = kernel.base if isinstance(kernel, PeriodicExtensionKernel) else kernel
        tau = base.tau
        if ks is None:
            ks = base.ks
        ks = np.asarray(ks, dtype=int)
        if isinstance(base, SosKernel):
            s = np.conj(tau * base.coefficient(ks))
        else:
            s = np.conj(base.ctft(2 * np.pi * ks / tau))
        h = pulse_diagonal(shape, ks, tau)
        return cls(ks, tau, np.asarray(instants, dtype=float), s, h)

    @property
    def M(self) -> int:
        return len(self.ks)

    @property
    def N(self) -> int:
        return len(self.instants)

    def vandermonde(self) -> np.ndarray:
        """``V(-t_s)`` with entries ``exp(j 2 pi k t_n / tau)``, shape ``(N, M)``."""
        return np.exp(2j * np.pi * np.outer(self.instants, self.ks) / self.tau)

    def dft_applicable(self, tol: float = 1e-12) -> bool:
        if self.N != self.M:
            return False
        d = np.diff(self.instants)
        return bool(np.all(np.abs(d - self.tau / self.N) <= tol * self.tau))


def _values(samples) -> np.ndarray:
    return np.asarray(samples.values if isinstance(samples, SampleSet) else samples, dtype=complex)


def extract_coefficients(samples, system: CoefficientSystem, method: str = "auto") -> FourierCoeffVector:
    """Estimate ``x`` from samples.

    ``method`` is ``"lstsq"`` (pseudo-inverse, any instants), ``"dft"`` (only
    when ``N = M`` and the instants are ``t_0 + n tau / N``) or ``"auto"``.
    """
    c = _values(samples)
    if len(c) != system.N:
        raise SosFriError("sample count does not match the system")
    if method == "auto":
        method = "dft" if system.dft_applicable() else "lstsq"
    if method == "dft":
        if not system.dft_applicable():
            raise SosFriError("DFT path needs N = M and T = tau / N")
        N = system.N
        t0 = system.instants[0]
        spectrum = np.fft.fft(c) / N
        sx = spectrum[np.mod(system.ks, N)] * np.exp(-2j * np.pi * system.ks * t0 / system.tau)
    elif method == "lstsq":
        V = system.vandermonde()
        sx, _, rank, _ = np.linalg.lstsq(V, c, rcond=None)
        if rank < system.M:
            raise RankDeficientError(f"V(-t_s) has rank {rank} < M={system.M}; instants repeat modulo tau")
    else:
        raise SosFriError(f"unknown extraction method {method!r}")
    return FourierCoeffVector(system.ks, sx / system.s_diag, system.tau, h_diag=system.h_diag, s_diag=system.s_diag)


def deconvolve_pulse(x: FourierCoeffVector, h_diag=None) -> np.ndarray:
    """``y = H^-1 x``; warns when some ``|H|`` is tiny relative to the largest."""
    h = np.asarray(x.h_diag if h_diag is None else h_diag, dtype=complex)
    mag = np.abs(h)
    if np.any(mag == 0):
        raise SosFriError("pulse spectrum vanishes on the index set")
    if mag.min() < H_WARN * mag.max():
        warnings.warn(f"pulse correction ill-conditioned: min|H|/max|H| = {mag.min() / mag.max():.2e}", ConditioningWarning, stacklevel=2)
    return np.asarray(x.values) / h


@dataclass
class AnnihilatorResult:
    filter: np.ndarray
    roots: np.ndarray
    delays: np.ndarray
    amplitudes: np.ndarray
    residual: float
    effective_rank: int
    degenerate: bool = False
    root_collision: bool = False
    tie: bool = False

    @property
    def root_moduli(self) -> np.ndarray:
        return np.abs(self.roots)


def annihilation_matrix(y, L: int) -> np.ndarray:
    """Toeplitz ``A`` of shape ``(M - L, L + 1)`` with ``A[r, i] = y[r + L - i]``."""
    y = np.asarray(y)
    M = len(y)
    rows = np.arange(M - L)[:, None] + L - np.arange(L + 1)[None, :]
    return y[rows]


def vandermonde_fit(y, ks, delays, tau: float):
    """Least-squares amplitudes of ``y_k = sum_l a_l exp(-j 2 pi k t_l / tau)``."""
    V = np.exp(-2j * np.pi * np.outer(ks, delays) / tau)
    a, *_ = np.linalg.lstsq(V, y, rcond=None)
    return a, float(np.linalg.norm(V @ a - y))


def _finish(h, y, ks, tau, L, A, s, tie=False) -> AnnihilatorResult:
    roots = np.roots(h)
    if len(roots) < L:
        roots = np.concatenate([roots, np.zeros(L - len(roots))])
    # delays depend only on the root phase (roots projected to the unit circle)
    phase = np.angle(roots)
    delays = np.mod(-tau * phase / (2 * np.pi), tau)
    delays = np.where(delays >= tau, delays - tau, delays)
    order = np.argsort(delays, kind="stable")
    delays, roots = delays[order], roots[order]
    amps, res = vandermonde_fit(y, ks, delays, tau)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    collision = False
    if L > 1:
        u = np.exp(1j * phase[order])
        gaps = np.abs(np.diff(np.concatenate([u, u[:1]])))
        collision = bool(np.min(gaps) < 1e-8)
    return AnnihilatorResult(h, roots, delays, amps, res, rank, rank < L, collision, tie)


def annihilating_filter(y, L: int, tau: float = 1.0, ks=None) -> AnnihilatorResult:
    """Exact annihilating filter with leading coefficient 1.

    Solves ``A[:, 1:] h[1:] = -A[:, 0]`` in the least-squares sense, roots
    ``h``, maps each root ``u`` to ``t = -tau arg(u) / 2 pi`` in ``[0, tau)`` and
    fits the amplitudes on ``y``.  A Toeplitz rank below ``L`` is reported via
    ``degenerate``/``effective_rank`` rather than raised.
    """
    y = np.asarray(y, dtype=complex)
    M = len(y)
    if L < 1 or M < 2 * L:
        raise SosFriError(f"need M >= 2L, got M={M}, L={L}")
    ks = np.arange(M) if ks is None else np.asarray(ks)
    A = annihilation_matrix(y, L)
    s = np.linalg.svd(A, compute_uv=False)
    h = np.ones(L + 1, dtype=complex)
    h[1:] = np.linalg.lstsq(A[:, 1:], -A[:, 0], rcond=None)[0]
    return _finish(h, y, ks, tau, L, A, s)


def annihilating_filter_tls(y, L: int, tau: float = 1.0, ks=None) -> AnnihilatorResult:
    """Total-least-squares annihilating filter.

    The filter is the right singular vector of ``A`` for its smallest singular
    value (unit norm).  Needs ``M > 2L`` so that ``A`` has more rows than the
    ``L`` nonzero singular values.
    """
    y = np.asarray(y, dtype=complex)
    M = len(y)
    if L < 1 or M <= 2 * L:
        raise SosFriError(f"TLS needs M > 2L, got M={M}, L={L}")
    ks = np.arange(M) if ks is None else np.asarray(ks)
    A = annihilation_matrix(y, L)
    _, s, vh = np.linalg.svd(A)
    tie = bool(L + 1 >= 2 and s.size == L + 1 and s[-1] > 0 and (s[-2] - s[-1]) <= 1e-12 * s[0])
    h = np.conj(vh[-1])
    return _finish(h, y, ks, tau, L, A, s, tie=tie)


def _cadzow_shape(M: int) -> int:
    """Columns minus one of the most square Toeplitz matrix built from ``M`` values."""
    return M // 2


def _diagonal_average(T: np.ndarray, P: int) -> np.ndarray:
    rows, cols = T.shape
    M = rows + cols - 1
    idx = np.arange(rows)[:, None] + P - np.arange(cols)[None, :]
    out = np.zeros(M, dtype=complex)
    np.add.at(out, idx, T)
    counts = np.bincount(idx.ravel(), minlength=M)
    return out / counts


def cadzow_denoise(y, L: int, iterations: int = 20, stop_ratio: float = 1e-12):
    """Cadzow's alternating projection onto rank-``L`` Toeplitz matrices.

    The Toeplitz matrix is as square as possible: ``P + 1 = M // 2 + 1``
    columns.  Iteration stops early once the ``(L+1)``-th singular value falls
    below ``stop_ratio`` times the largest.  Returns the denoised sequence.
    """
    y = np.asarray(y, dtype=complex).copy()
    M = len(y)
    if iterations <= 0:
        return y
    if M <= 2 * L:
        raise SosFriError(f"Cadzow needs M > 2L, got M={M}, L={L}")
    P = _cadzow_shape(M)
    for _ in range(iterations):
        T = annihilation_matrix(y, P)
        u, s, vh = np.linalg.svd(T, full_matrices=False)
        if s[0] == 0 or s[L] < stop_ratio * s[0]:
            break
        T = (u[:, :L] * s[:L]) @ vh[:L]
        y = _diagonal_average(T, P)
    return y


def toeplitz_singular_ratio(y, L: int) -> float:
    """``sigma_{L+1} / sigma_1`` of the Cadzow-shaped Toeplitz matrix of ``y``."""
    s = np.linalg.svd(annihilation_matrix(np.asarray(y), _cadzow_shape(len(y))), compute_uv=False)
    return float(s[L] / s[0])


def estimate_order(y, max_order: Optional[int] = None) -> int:
    """Model order from the largest gap in the log singular values."""
    y = np.asarray(y)
    P = _cadzow_shape(len(y))
    s = np.linalg.svd(annihilation_matrix(y, P), compute_uv=False)
    if max_order is not None:
        s = s[: max_order + 1]
    s = np.maximum(s, s[0] * 1e-300)
    gaps = np.log(s[:-1]) - np.log(s[1:])
    return int(np.argmax(gaps) + 1)


@dataclass
class RecoveryResult:
    """Recovered delays/amplitudes together with every intermediate."""

    delays: np.ndarray
    amplitudes: np.ndarray
    x: FourierCoeffVector
    y: np.ndarray
    y_used: np.ndarray
    annihilator: AnnihilatorResult
    options: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def residual(self) -> float:
        return self.annihilator.residual

    def to_dict(self) -> dict:
        ann = self.annihilator
        return {
            "delays": self.delays.tolist(),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
            "residual": self.residual,
            "roots": [[float(r.real), float(r.imag)] for r in ann.roots],
            "root_moduli": ann.root_moduli.tolist(),
            "effective_rank": ann.effective_rank,
            "degenerate": ann.degenerate,
            "root_collision": ann.root_collision,
            "options": self.options,
            "error": self.error,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


def recover(
    samples,
    system: CoefficientSystem,
    L: int,
    tls: bool = False,
    cadzow_iters: int = 0,
    method: str = "auto",
) -> RecoveryResult:
    """Full recovery: extract, deconvolve, (denoise), annihilate, fit amplitudes.

    Parameters
    ----------
    samples : SampleSet or array_like
        Sample values aligned with ``system.instants``.
    system : CoefficientSystem
        Built from the kernel, instants and pulse shape.
    L : int
        Number of pulses (assumed known).
    tls : bool
        Use the TLS annihilator (needs ``M > 2L``).
    cadzow_iters : int
        Cadzow iterations before annihilation; 0 disables denoising.
    method : str
        Coefficient extraction route, see :func:`extract_coefficients`.
    """
    if not system.N >= system.M >= 2 * L:
        raise SosFriError(f"need N >= M >= 2L, got N={system.N}, M={system.M}, L={L}")
    x = extract_coefficients(samples, system, method=method)
    y = deconvolve_pulse(x)
    y_used = cadzow_denoise(y, L, cadzow_iters) if cadzow_iters > 0 else y
    solver = annihilating_filter_tls if tls else annihilating_filter
    ann = solver(y_used, L, system.tau, system.ks)
    opts = {"L": L, "tls": tls, "cadzow_iters": cadzow_iters, "cadzow_columns": _cadzow_shape(len(y)) + 1}
    return RecoveryResult(ann.delays, ann.amplitudes, x, y, y_used, ann, opts)


def delay_error(true_delays, est_delays) -> float:
    """``||t - t_hat||^2`` between delay vectors sorted increasingly."""
    return float(np.sum((np.sort(true_delays) - np.sort(est_delays)) ** 2))


def amplitude_error(true_delays, true_amps, est_delays, est_amps) -> float:
    """``||a - a_hat||^2`` with both sides ordered by their delays."""
    a = np.asarray(true_amps)[np.argsort(true_delays)]
    b = np.asarray(est_amps)[np.argsort(est_delays)]
    return float(np.sum(np.abs(a - b) ** 2))
