"""
Simulation protocols and result tables.

Every scenario is driven by an :class:`ExperimentSpec` and returns a
:class:`ResultTable` whose rows depend only on the spec (run times are kept
out of the rows so that repeated runs compare equal).  Noise for trial ``i``
at SNR index ``j`` is drawn from ``SeedSequence([seed, j, i])``.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import ultrasound as us
from .bursts import rate_accounting, segment_and_recover, validate_plan
from .kernels import SosKernel, hamming_coefficients, index_set, make_periodic_extension
from .recovery import CoefficientSystem, amplitude_error, delay_error, recover
from .sampling import AcquisitionConfig, acquire, add_noise
from .signal import PulseShape, PulseStream, pulse_diagonal
from .waterfilling import effective_gains, optimal_coefficients

SCENARIOS = (
    "periodic_demo",
    "periodic_noisy",
    "finite_demo",
    "finite_noisy",
    "high_order",
    "oversampling",
    "infinite_demo",
    "ultrasound",
)
KERNELS = ("dirichlet", "hamming", "optimal")


@dataclass
class ExperimentSpec:
    scenario: str
    L: int = 2
    tau: float = 1.0
    k_min: Optional[int] = None
    k_max: Optional[int] = None
    N: Optional[int] = None
    kernel: str = "dirichlet"
    pulse: dict = field(default_factory=lambda: {"kind": "dirac"})
    delays: Optional[list] = None
    amplitudes: Optional[list] = None
    snr_db: list = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    tls: bool = False
    cadzow_iters: int = 0
    factors: list = field(default_factory=lambda: [1])
    metric: str = "delay"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not all(np.isfinite(s) for s in self.snr_db):
            raise ValueError("SNR grid must be finite")
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")

    @property
    def ks(self) -> np.ndarray:
        k_min = -self.L if self.k_min is None else self.k_min
        k_max = self.L if self.k_max is None else self.k_max
        return index_set(k_min, k_max)

    @property
    def shape(self) -> PulseShape:
        return PulseShape.from_dict(self.pulse)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def preset(cls, scenario: str, **overrides) -> "ExperimentSpec":
        """Default parameters for each scenario."""
        presets = {
            "periodic_demo": dict(L=5, pulse={"kind": "gaussian", "sigma": 7e-3}, kernel="hamming", N=11),
            "periodic_noisy": dict(
                L=2, delays=[1 / 3, 2 / 3], amplitudes=[1.0, 1.0], N=5, snr_db=[5, 10, 15, 20, 25, 30], trials=1000
            ),
            "finite_demo": dict(L=5),
            "finite_noisy": dict(L=2, delays=[1 / 3, 2 / 3], amplitudes=[1.0, 1.0], snr_db=[5, 10, 15, 20, 25, 30], trials=200),
            "high_order": dict(L=20),
            "oversampling": dict(
                L=2,
                delays=[1 / 3, 2 / 3],
                amplitudes=[1.0, 1.0],
                snr_db=[5, 10, 15, 20, 25, 30],
                trials=1000,
                factors=[1, 2, 4, 8],
                tls=True,
                cadzow_iters=20,
            ),
            "infinite_demo": dict(L=5, options={"bursts": 3, "gap": 1.6}),
            "ultrasound": dict(L=4, snr_db=[20], trials=10, options={"N": [17, 33], "threshold": [0.1, 0.0]}),
        }
        return cls(scenario=scenario, **{**presets[scenario], **overrides})


@dataclass
class ResultTable:
    """Rows of results plus the spec that produced them."""

    columns: list
    rows: list
    config: dict
    timing: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=self.columns)
            w.writeheader()
            for r in self.rows:
                w.writerow({c: r.get(c) for c in self.columns})

    def to_json(self, path) -> None:
        doc = {"config": self.config, "columns": self.columns, "rows": self.rows, "timing": self.timing}
        Path(path).write_text(json.dumps(doc, indent=2, default=_json_default))

    def to_dat(self, path, x: str, ys, group: Optional[str] = None) -> None:
        """gnuplot data file; one block per ``group`` value, separated by two blank lines."""
        ys = [ys] if isinstance(ys, str) else list(ys)
        groups = sorted({r[group] for r in self.rows}) if group else [None]
        with open(path, "w") as f:
            f.write(f"# {x} " + " ".join(ys) + "\n")
            for g in groups:
                if g is not None:
                    f.write(f"# {group} = {g}\n")
                for r in self.rows:
                    if g is None or r[group] == g:
                        f.write(" ".join(repr(float(r[c])) for c in [x, *ys]) + "\n")
                f.write("\n\n")

    def write(self, outdir, stem: str) -> list:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{stem}.csv", out / f"{stem}.json"]
        self.to_csv(paths[0])
        self.to_json(paths[1])
        return paths


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer, np.floating, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def trial_rng(seed: int, snr_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, trial]))


def random_delays(rng, L: int, tau: float, min_sep: float = 0.0) -> np.ndarray:
    """Sorted uniform delays in ``[0, tau)`` with circular spacing at least ``min_sep``."""
    for _ in range(10000):
        d = np.sort(rng.uniform(0, tau, L))
        gaps = np.diff(np.concatenate([d, [d[0] + tau]]))
        if L == 1 or gaps.min() >= min_sep:
            return d
    raise RuntimeError("could not place delays with the requested separation")


def build_kernel(name: str, tau: float, ks, shape: Optional[PulseShape] = None, L: int = 1, noise_var: float = 1.0, N: Optional[int] = None) -> SosKernel:
    ks = np.asarray(ks)
    M = len(ks)
    if name == "dirichlet":
        b = np.ones(M)
    elif name == "hamming":
        b = hamming_coefficients(M)
    elif name == "optimal":
        sol = optimal_coefficients(shape or PulseShape.dirac(), tau, ks, L, 1.0, noise_var, N or M)
        b = sol.b
    else:
        raise ValueError(f"unknown kernel {name!r}")
    return SosKernel(tau, ks, b)


def _spec_signal(spec: ExperimentSpec, rng=None, kind: str = "periodic") -> PulseStream:
    shape = spec.shape
    if spec.delays is not None:
        d = np.asarray(spec.delays, dtype=float) * spec.tau
    else:
        rng = rng or np.random.default_rng(spec.seed)
        d = random_delays(rng, spec.L, spec.tau, spec.options.get("min_sep", spec.tau / (10 * (2 * spec.L + 1))))
    if spec.amplitudes is not None:
        a = np.asarray(spec.amplitudes, dtype=float)
    else:
        rng = rng or np.random.default_rng(spec.seed)
        a = rng.uniform(0.5, 1.5, spec.L)
    return PulseStream(shape, d, a, kind, spec.tau)


def _one_shot(stream: PulseStream, kernel, N: int, L: int, **opts) -> dict:
    ss = acquire(stream, AcquisitionConfig(kernel, N))
    res = recover(ss, CoefficientSystem.build(kernel, ss.instants, stream.shape), L, **opts)
    return {
        "L": L,
        "N": N,
        "delay_error": delay_error(stream.delays, res.delays),
        "amplitude_error": amplitude_error(stream.delays, stream.amplitudes, res.delays, res.amplitudes),
        "max_delay_dev": float(np.max(np.abs(np.sort(stream.delays) - res.delays))),
        "max_amp_rel_dev": float(np.max(np.abs(stream.amplitudes[np.argsort(stream.delays)] - res.amplitudes) / np.abs(stream.amplitudes[np.argsort(stream.delays)]))),
    }


def _noise_sweep(spec: ExperimentSpec, stream: PulseStream, kernel, N: int, extra: Optional[dict] = None) -> list:
    clean = acquire(stream, AcquisitionConfig(kernel, N))
    system = CoefficientSystem.build(kernel, clean.instants, stream.shape)
    rows = []
    for j, snr in enumerate(spec.snr_db):
        derr, aerr, failures = [], [], 0
        for i in range(spec.trials):
            noisy = add_noise(clean, snr, trial_rng(spec.seed, j, i))
            try:
                res = recover(noisy, system, spec.L, tls=spec.tls, cadzow_iters=spec.cadzow_iters)
            except Exception:
                failures += 1
                continue
            derr.append(delay_error(stream.delays, res.delays))
            aerr.append(amplitude_error(stream.delays, stream.amplitudes, res.delays, res.amplitudes))
        rows.append(
            {
                **(extra or {}),
                "snr_db": float(snr),
                "N": N,
                "M": len(system.ks),
                "trials": spec.trials,
                "failures": failures,
                "delay_error": float(np.mean(derr)) if derr else float("nan"),
                "amplitude_error": float(np.mean(aerr)) if aerr else float("nan"),
            }
        )
    return rows


def _run_periodic_demo(spec):
    stream = _spec_signal(spec)
    kernel = build_kernel(spec.kernel, spec.tau, spec.ks, stream.shape, spec.L)
    return [_one_shot(stream, kernel, spec.N or len(spec.ks), spec.L)]


def _run_periodic_noisy(spec):
    stream = _spec_signal(spec)
    kernel = build_kernel(spec.kernel, spec.tau, spec.ks, stream.shape, spec.L)
    return _noise_sweep(spec, stream, kernel, spec.N or len(spec.ks))


def _finite_kernel(spec, stream):
    base = build_kernel(spec.kernel, spec.tau, spec.ks, stream.shape, spec.L)
    return make_periodic_extension(base, stream.shape.support)


def _run_finite_demo(spec):
    rows = []
    for L in spec.options.get("orders", [spec.L]):
        sub = ExperimentSpec(**{**spec.to_dict(), "L": L, "k_min": None, "k_max": None})
        stream = _spec_signal(sub, kind="finite")
        rows.append(_one_shot(stream, _finite_kernel(sub, stream), 2 * L + 1, L))
    return rows


def _run_finite_noisy(spec):
    stream = _spec_signal(spec, kind="finite")
    return _noise_sweep(spec, stream, _finite_kernel(spec, stream), spec.N or len(spec.ks))


def _run_high_order(spec):
    L = spec.L
    d = (np.arange(L) + 0.5) * spec.tau / L
    stream = PulseStream(spec.shape, d, np.ones(L), "finite", spec.tau)
    return [_one_shot(stream, _finite_kernel(spec, stream), 2 * L + 1, L)]


def _run_oversampling(spec):
    stream = _spec_signal(spec)
    rows = []
    for f in spec.factors:
        ks = index_set(-f * spec.L, f * spec.L)
        kernel = build_kernel(spec.kernel, spec.tau, ks, stream.shape, spec.L)
        rows += _noise_sweep(spec, stream, kernel, len(ks), {"factor": f})
    return rows


def _run_infinite_demo(spec):
    n_bursts = spec.options.get("bursts", 3)
    gap = spec.options.get("gap", 1.6) * spec.tau
    rng = np.random.default_rng(spec.seed)
    starts = np.arange(n_bursts) * (spec.tau + gap)
    delays, amps = [], []
    for s in starts:
        delays.append(s + random_delays(rng, spec.L, spec.tau, spec.tau / (10 * (2 * spec.L + 1))))
        amps.append(rng.uniform(0.5, 1.5, spec.L))
    stream = PulseStream(spec.shape, np.concatenate(delays), np.concatenate(amps), "bursty", spec.tau, starts)
    base = build_kernel(spec.kernel, spec.tau, index_set(-spec.L, spec.L), stream.shape, spec.L)
    kernel = make_periodic_extension(base, stream.shape.support)
    plan = validate_plan(stream, kernel)
    results = segment_and_recover(stream, kernel, 2 * spec.L + 1, spec.L)
    rates = rate_accounting(spec.L, spec.tau)
    rows = []
    for i, res in enumerate(results):
        true = stream.delays[stream.burst_index(stream.delays) == i]
        rows.append(
            {
                "burst": i,
                "start": float(starts[i]),
                "delay_error": delay_error(true, res.delays) if res.error is None else float("nan"),
                "margin": plan.margins[i] if i < len(plan.margins) else float("nan"),
                "error": res.error or "",
                **rates,
            }
        )
    return rows


def _run_ultrasound(spec):
    Ns = spec.options.get("N", [17, 33])
    ths = spec.options.get("threshold", [0.1, 0.0])
    stage = spec.options.get("threshold_stage", "baseband")
    rows = []
    for j, snr in enumerate(spec.snr_db or [float("inf")]):
        errs = {N: [] for N in Ns}
        for i in range(spec.trials):
            seed = int(np.random.SeedSequence([spec.seed, j, i]).generate_state(1)[0])
            rec = us.synthesize_channel(us.phantom_scatterers(), snr_db=snr, seed=seed)
            for N, th in zip(Ns, ths):
                out = us.run_pipeline(rec, spec.L, N, th, threshold_stage=stage)
                errs[N].append(out.localization_error)
        for N, th in zip(Ns, ths):
            rows.append(
                {
                    "snr_db": float(snr),
                    "N": N,
                    "threshold": th,
                    "trials": spec.trials,
                    "mean_localization_error_m": float(np.mean(errs[N])),
                    "max_localization_error_m": float(np.max(errs[N])),
                    "rate_reduction": us.rate_reduction(int(round(us.TAU * us.F_S)), N),
                }
            )
    return rows


_RUNNERS = {
    "periodic_demo": _run_periodic_demo,
    "periodic_noisy": _run_periodic_noisy,
    "finite_demo": _run_finite_demo,
    "finite_noisy": _run_finite_noisy,
    "high_order": _run_high_order,
    "oversampling": _run_oversampling,
    "infinite_demo": _run_infinite_demo,
    "ultrasound": _run_ultrasound,
}


def run(spec: ExperimentSpec) -> ResultTable:
    """Run a scenario; per-trial recovery failures are counted, not raised."""
    t0 = time.perf_counter()
    rows = _RUNNERS[spec.scenario](spec)
    columns = list(dict.fromkeys(c for r in rows for c in r))
    return ResultTable(columns, rows, spec.to_dict(), {"seconds": time.perf_counter() - t0})


def lmmse_estimate(z, s_diag, q, noise_var: float, N: int) -> np.ndarray:
    """Per-coefficient linear MMSE estimate of ``x`` from ``z = S x + noise``
    where the noise on ``z`` has variance ``noise_var / N``."""
    s = np.asarray(s_diag)
    return q * np.conj(s) / (np.abs(s) ** 2 * q + noise_var / N) * z


def compare_kernels(
    shape: PulseShape,
    L: int,
    ks,
    noise_var: float,
    trials: int = 1000,
    seed: int = 0,
    kernels=KERNELS,
    tau: float = 1.0,
    sigma_a2: float = 1.0,
) -> ResultTable:
    """Paired comparison of SoS coefficient choices on identical signals and noise.

    Every kernel is scaled to ``sum |b_k|^2 = 1`` and the same white noise of
    variance ``noise_var`` is added to the samples of each.  Signals have
    uniform random delays and Gaussian amplitudes of variance ``sigma_a2``.
    Reported per kernel: empirical MSE of the linear MMSE estimate of ``x``
    and the mean delay error of the full recovery.  Indices switched off by
    the optimal design are left out of the recovery when the remaining ones
    are consecutive.
    """
    ks = np.asarray(ks)
    M = len(ks)
    N = M
    q = np.abs(effective_gains(shape, tau, ks, L, sigma_a2)) ** 2
    h_diag = pulse_diagonal(shape, ks, tau)
    built = {}
    for name in kernels:
        if name == "optimal":
            # the engine's diagonal is tau * b, so the equivalent noise on b is noise_var / tau^2
            b = optimal_coefficients(shape, tau, ks, L, sigma_a2, noise_var / tau**2, N).b
        else:
            b = build_kernel(name, tau, ks).b
        built[name] = SosKernel(tau, ks, b / np.linalg.norm(b))
    active = {}
    for name, kernel in built.items():
        on = ks[kernel.b != 0]
        active[name] = on if np.all(np.diff(on) == 1) else ks
    acc = {name: {"x_mse": [], "delay_error": []} for name in kernels}
    for i in range(trials):
        rng = trial_rng(seed, 0, i)
        d = random_delays(rng, L, tau, tau / (10 * M))
        a = rng.standard_normal(L) * np.sqrt(sigma_a2)
        w = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        w *= np.sqrt(noise_var / 2)
        stream = PulseStream(shape, d, a, "periodic", tau)
        for name, kernel in built.items():
            clean = acquire(stream, AcquisitionConfig(kernel, N, method="analytic" if shape.kind != "tabulated" else "quadrature"))
            noisy = clean.with_values(clean.clean_values + w)
            s_diag = np.conj(tau * kernel.b)
            z = np.fft.fft(noisy.values)[np.mod(ks, N)] / N
            x_true = h_diag * (np.exp(-2j * np.pi * np.outer(ks, d) / tau) @ a)
            x_hat = lmmse_estimate(z, s_diag, q, noise_var, N)
            acc[name]["x_mse"].append(float(np.sum(np.abs(x_hat - x_true) ** 2)))
            try:
                # switched-off indices carry no signal; recover on the active ones when they stay consecutive
                res = recover(noisy, CoefficientSystem.build(kernel, clean.instants, shape, ks=active[name]), L)
                acc[name]["delay_error"].append(delay_error(d, res.delays))
            except Exception:
                acc[name]["delay_error"].append(float("nan"))
    rows = []
    for name in kernels:
        xm = np.array(acc[name]["x_mse"])
        de = np.array(acc[name]["delay_error"])
        rows.append(
            {
                "kernel": name,
                "x_mse": float(xm.mean()),
                "x_mse_stderr": float(xm.std(ddof=1) / np.sqrt(len(xm))) if len(xm) > 1 else 0.0,
                "delay_error": float(np.nanmean(de)) if np.isfinite(de).any() else float("nan"),
                "failures": int(np.sum(np.isnan(de))),
                "coefficients": np.abs(built[name].b).tolist(),
                "recovery_indices": [int(active[name][0]), int(active[name][-1])],
            }
        )
    config = {"shape": shape.to_dict(), "L": L, "ks": ks.tolist(), "noise_var": noise_var, "trials": trials, "seed": seed, "tau": tau}
    return ResultTable(list(rows[0]), rows, config, details={"per_trial": acc})
