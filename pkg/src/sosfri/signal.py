"""
Pulse shapes, pulse streams and their Fourier-series coefficients.

A stream is a sum of delayed and weighted copies of one known pulse ``h(t)``.
Three stream kinds are supported:

``periodic``
    ``x(t) = sum_m sum_l a_l h(t - t_l - m tau)`` with ``t_l`` in ``[0, tau)``.
``finite``
    ``x(t) = sum_l a_l h(t - t_l)`` with ``t_l`` in ``[0, tau)``.
``bursty``
    an (in practice truncated) infinite stream made of bursts of duration at
    most ``tau``; each burst starts at a known time.

The CTFT convention is ``X(w) = int x(t) exp(-j w t) dt`` everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import GridResolutionError, SosFriError

# Gaussian pulses are treated as compactly supported on [-8 sigma, 8 sigma];
# the tail beyond is below exp(-32) ~ 1.3e-14 of the peak.
GAUSSIAN_HALF_WIDTH = 8.0

PULSE_KINDS = ("dirac", "gaussian", "tabulated")
STREAM_KINDS = ("periodic", "finite", "bursty")


@dataclass(frozen=True)
class PulseShape:
    """Known pulse shape ``h(t)``.

    Use the :meth:`dirac`, :meth:`gaussian` and :meth:`tabulated` constructors.
    Tabulated pulses are symmetric samples centred on ``t = 0`` and are
    linearly interpolated between nodes.
    """

    kind: str
    sigma: float = 0.0
    samples: Optional[np.ndarray] = None
    spacing: float = 0.0

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise SosFriError(f"unknown pulse kind {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise SosFriError("Gaussian pulse needs sigma > 0")
        if self.kind == "tabulated":
            if self.samples is None or len(self.samples) < 2:
                raise SosFriError("tabulated pulse needs at least two samples")
            if not self.spacing > 0:
                raise SosFriError("tabulated pulse needs spacing > 0")
            object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    @classmethod
    def dirac(cls) -> "PulseShape":
        return cls("dirac")

    @classmethod
    def gaussian(cls, sigma: float) -> "PulseShape":
        return cls("gaussian", sigma=float(sigma))

    @classmethod
    def tabulated(cls, samples: Sequence[float], spacing: float) -> "PulseShape":
        return cls("tabulated", samples=np.asarray(samples, dtype=float), spacing=float(spacing))

    @property
    def support(self) -> float:
        """Support length ``R`` (effective support for Gaussians)."""
        if self.kind == "dirac":
            return 0.0
        if self.kind == "gaussian":
            return 2 * GAUSSIAN_HALF_WIDTH * self.sigma
        return (len(self.samples) - 1) * self.spacing

    @property
    def support_policy(self) -> str:
        if self.kind == "gaussian":
            return f"effective: +-{GAUSSIAN_HALF_WIDTH:g} sigma"
        return "exact"

    def _nodes(self) -> np.ndarray:
        n = len(self.samples)
        return (np.arange(n) - (n - 1) / 2) * self.spacing

    def __call__(self, t) -> np.ndarray:
        """Evaluate ``h(t)`` pointwise (not defined for Diracs)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "dirac":
            raise SosFriError("Dirac pulses cannot be evaluated pointwise")
        if self.kind == "gaussian":
            s = self.sigma
            return np.exp(-(t**2) / (2 * s * s)) / np.sqrt(2 * np.pi * s * s)
        return np.interp(t, self._nodes(), self.samples, left=0.0, right=0.0)

    def ctft(self, omega) -> np.ndarray:
        """CTFT ``H(w)`` of the pulse."""
        return ctft_pulse(self, omega)

    def min_feature(self) -> float:
        """Smallest time scale the pulse has; fine grids must resolve it."""
        if self.kind == "gaussian":
            return self.sigma
        if self.kind == "tabulated":
            return self.spacing
        return 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "gaussian":
            d["sigma"] = self.sigma
        elif self.kind == "tabulated":
            d["samples"] = self.samples.tolist()
            d["spacing"] = self.spacing
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PulseShape":
        kind = d["kind"]
        if kind == "gaussian":
            return cls.gaussian(d["sigma"])
        if kind == "tabulated":
            return cls.tabulated(d["samples"], d["spacing"])
        return cls(kind)


def ctft_pulse(shape: PulseShape, omega) -> np.ndarray:
    """Continuous-time Fourier transform of a pulse shape.

    Parameters
    ----------
    shape : PulseShape
    omega : float or array_like
        Angular frequency in rad/s.

    Returns
    -------
    ndarray
        ``H(omega)``.  Diracs give 1, the unit-area Gaussian gives
        ``exp(-omega**2 sigma**2 / 2)``, tabulated pulses are integrated with
        the trapezoidal rule over their nodes.
    """
    omega = np.asarray(omega, dtype=float)
    if shape.kind == "dirac":
        return np.ones_like(omega, dtype=complex)
    if shape.kind == "gaussian":
        return np.exp(-0.5 * (omega * shape.sigma) ** 2).astype(complex)
    nodes = shape._nodes()
    w = np.full(len(nodes), shape.spacing)
    w[0] = w[-1] = shape.spacing / 2
    phase = np.exp(-1j * np.multiply.outer(omega, nodes))
    return phase @ (w * shape.samples)


def _as_amplitudes(values) -> np.ndarray:
    a = np.asarray(values)
    if np.iscomplexobj(a):
        return a.astype(complex)
    return a.astype(float)


@dataclass(frozen=True)
class PulseStream:
    """A stream of pulses with known shape and unknown delays/amplitudes.

    ``delays`` are absolute times in seconds.  For ``bursty`` streams each
    delay must fall inside one burst window ``[start, start + tau)``.
    """

    shape: PulseShape
    delays: np.ndarray
    amplitudes: np.ndarray
    kind: str
    tau: float
    burst_starts: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        delays = np.atleast_1d(np.asarray(self.delays, dtype=float))
        amps = np.atleast_1d(_as_amplitudes(self.amplitudes))
        starts = np.atleast_1d(np.asarray(self.burst_starts, dtype=float))
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "burst_starts", starts)
        if self.kind not in STREAM_KINDS:
            raise SosFriError(f"unknown stream kind {self.kind!r}")
        if not self.tau > 0:
            raise SosFriError("tau must be positive")
        if delays.shape != amps.shape:
            raise SosFriError("delays and amplitudes must have the same length")
        if delays.size < 1 and self.kind != "bursty":
            raise SosFriError("a stream needs at least one pulse")
        if len(np.unique(delays)) != len(delays):
            raise SosFriError("delays must be pairwise distinct")
        if self.kind in ("periodic", "finite"):
            if np.any(delays < 0) or np.any(delays >= self.tau):
                raise SosFriError("delays must lie in [0, tau)")
        else:
            if np.any(np.diff(starts) <= 0):
                raise SosFriError("burst starts must be strictly increasing")
            if delays.size and self.burst_index(delays).min() < 0:
                raise SosFriError("every delay must fall inside a burst window")

    @property
    def L(self) -> int:
        return len(self.delays)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.amplitudes)

    def burst_index(self, t) -> np.ndarray:
        """Index of the burst window containing each time, -1 if none."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.burst_starts, t, side="right") - 1
        inside = (idx >= 0) & (t < self.burst_starts[np.maximum(idx, 0)] + self.tau)
        return np.where(inside, idx, -1)

    def burst(self, i: int) -> "PulseStream":
        """Burst ``i`` as a finite stream with delays relative to its start."""
        sel = self.burst_index(self.delays) == i
        start = self.burst_starts[i]
        return PulseStream(self.shape, self.delays[sel] - start, self.amplitudes[sel], "finite", self.tau)

    def periodized(self) -> "PulseStream":
        return PulseStream(self.shape, self.delays, self.amplitudes, "periodic", self.tau)

    def with_amplitudes(self, amplitudes) -> "PulseStream":
        return PulseStream(self.shape, self.delays, amplitudes, self.kind, self.tau, self.burst_starts)

    def to_dict(self) -> dict:
        amps = self.amplitudes
        if np.iscomplexobj(amps):
            amp_list = [[float(a.real), float(a.imag)] for a in amps]
        else:
            amp_list = [float(a) for a in amps]
        d = {
            "shape": self.shape.to_dict(),
            "tau": self.tau,
            "kind": self.kind,
            "delays": self.delays.tolist(),
            "amplitudes": amp_list,
        }
        if self.kind == "bursty":
            d["burst_starts"] = self.burst_starts.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PulseStream":
        amps = d["amplitudes"]
        if amps and isinstance(amps[0], (list, tuple)):
            amps = np.array([complex(re, im) for re, im in amps])
        return cls(
            shape=PulseShape.from_dict(d["shape"]),
            delays=d["delays"],
            amplitudes=amps,
            kind=d["kind"],
            tau=d["tau"],
            burst_starts=d.get("burst_starts", []),
        )

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_json(cls, path) -> "PulseStream":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class FineGrid:
    """Uniform grid ``t0 + i dt`` used to mimic analog signals."""

    t0: float
    dt: float
    n_points: int

    def __post_init__(self):
        if not self.dt > 0:
            raise GridResolutionError("grid spacing must be positive")
        if self.n_points < 2:
            raise GridResolutionError("grid needs at least two points")

    @classmethod
    def covering(cls, start: float, stop: float, dt: float) -> "FineGrid":
        """Half-open grid over ``[start, stop)``."""
        n = int(round((stop - start) / dt))
        return cls(start, (stop - start) / n, n)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_points)

    def check_period(self, T: float, factor: float = 100.0) -> None:
        """Raise unless the grid is at least ``factor`` times finer than ``T``."""
        if self.dt * factor > T * (1 + 1e-12):
            raise GridResolutionError(f"grid spacing {self.dt:g} is not {factor:g}x finer than T={T:g}")


def _replica_offsets(stream: PulseStream, lo: float, hi: float) -> np.ndarray:
    """Periods ``m`` whose replica of some pulse intersects ``[lo, hi]``."""
    if stream.kind != "periodic":
        return np.zeros(1, dtype=int)
    half = stream.shape.support / 2
    tau = stream.tau
    m_lo = int(np.floor((lo - half - stream.delays.max()) / tau))
    m_hi = int(np.ceil((hi + half - stream.delays.min()) / tau))
    return np.arange(m_lo, m_hi + 1)


def _accumulate_pulses(stream: PulseStream, t: np.ndarray) -> np.ndarray:
    """Sum of pulses on a uniform time vector, touching only each pulse's support."""
    amps = stream.amplitudes
    out = np.zeros(t.shape, dtype=complex if np.iscomplexobj(amps) else float)
    if t.size == 0 or stream.L == 0:
        return out
    dt = t[1] - t[0] if t.size > 1 else 1.0
    half = stream.shape.support / 2
    for m in _replica_offsets(stream, t[0], t[-1]):
        for tl, al in zip(stream.delays, amps):
            c = tl + m * stream.tau
            i0 = max(int(np.floor((c - half - t[0]) / dt)), 0)
            i1 = min(int(np.ceil((c + half - t[0]) / dt)) + 1, t.size)
            if i1 <= i0:
                continue
            seg = t[i0:i1] - c
            out[i0:i1] += al * np.where(np.abs(seg) <= half, stream.shape(seg), 0.0)
    return out


def evaluate_stream(stream: PulseStream, grid: FineGrid) -> np.ndarray:
    """Evaluate a stream on a fine grid.

    Periodic replicas are included when their pulse support intersects the
    grid window.  Dirac streams are rejected because they have no pointwise
    values; use the analytic sampling path for them instead.
    """
    shape = stream.shape
    if shape.kind == "dirac":
        raise SosFriError("Dirac streams are handled analytically and cannot be rendered on a grid")
    if grid.dt > shape.min_feature() / 4:
        raise GridResolutionError(f"grid spacing {grid.dt:g} too coarse for pulse feature {shape.min_feature():g}")
    return _accumulate_pulses(stream, grid.t)


@dataclass(frozen=True)
class FourierCoeffVector:
    """Fourier-series coefficients ``X[k]`` for consecutive ``k``.

    ``h_diag`` holds ``H(2 pi k / tau) / tau`` and ``s_diag`` the sampling
    correction ``S*(2 pi k / tau)`` when they are known.
    """

    ks: np.ndarray
    values: np.ndarray
    tau: float
    h_diag: Optional[np.ndarray] = None
    s_diag: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.ks)


def pulse_diagonal(shape: PulseShape, ks, tau: float) -> np.ndarray:
    """Entries ``H(2 pi k / tau) / tau`` of the pulse correction matrix."""
    ks = np.asarray(ks)
    return ctft_pulse(shape, 2 * np.pi * ks / tau) / tau


def exact_fourier_coeffs(stream: PulseStream, ks) -> FourierCoeffVector:
    """Closed-form Fourier-series coefficients of a periodic stream.

    ``X[k] = H(2 pi k / tau) / tau * sum_l a_l exp(-j 2 pi k t_l / tau)``.
    Finite streams are treated as one period of their periodized version.
    """
    ks = np.asarray(ks, dtype=int)
    tau = stream.tau
    phases = np.exp(-2j * np.pi * np.outer(ks, stream.delays) / tau)
    h = pulse_diagonal(stream.shape, ks, tau)
    return FourierCoeffVector(ks, h * (phases @ stream.amplitudes), tau, h_diag=h)
