"""Command line entry point: ``sosfri <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ultrasound as us
from .experiments import SCENARIOS, ExperimentSpec, build_kernel, run
from .kernels import PeriodicExtensionKernel, index_set, load_kernel, make_periodic_extension
from .recovery import CoefficientSystem, recover
from .sampling import AcquisitionConfig, SampleSet, acquire, add_noise
from .signal import PulseShape, PulseStream


def _shape(args) -> PulseShape:
    if args.pulse == "gaussian":
        return PulseShape.gaussian(args.sigma)
    return PulseShape.dirac()


def cmd_design_kernel(args) -> int:
    if args.M is not None:
        ks = index_set(-(args.M // 2), args.M - 1 - args.M // 2)
    else:
        ks = index_set(args.k_min, args.k_max)
    shape = _shape(args)
    kernel = build_kernel(args.coeffs, args.tau, ks, shape, args.L, args.noise_var, args.N)
    if args.normalize:
        kernel = kernel.normalized()
    if args.R is not None:
        kernel = make_periodic_extension(kernel, args.R)
    doc = kernel.to_dict()
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_sample(args) -> int:
    stream = PulseStream.from_json(args.stream)
    kernel = load_kernel(args.kernel)
    if stream.kind != "periodic" and not isinstance(kernel, PeriodicExtensionKernel):
        kernel = make_periodic_extension(kernel, stream.shape.support)
    config = AcquisitionConfig(kernel, args.N, window_start=args.window_start, method=args.method)
    samples = acquire(stream, config)
    if args.snr_db is not None:
        samples = add_noise(samples, args.snr_db, args.seed)
    samples.to_csv(args.out)
    print(f"wrote {samples.N} samples to {args.out}")
    return 0


def cmd_recover(args) -> int:
    samples = SampleSet.from_csv(args.samples)
    kernel = load_kernel(args.kernel)
    shape = PulseStream.from_json(args.stream).shape if args.stream else _shape(args)
    instants = samples.instants - args.window_start
    system = CoefficientSystem.build(kernel, instants, shape)
    result = recover(samples, system, args.L, tls=args.tls, cadzow_iters=args.cadzow_iters)
    result.delays = result.delays + args.window_start
    doc = result.to_dict()
    if args.out:
        result.to_json(args.out)
    print(json.dumps({"delays": doc["delays"], "amplitudes": doc["amplitudes"]}))
    return 0


def cmd_experiment(args) -> int:
    if args.spec:
        spec = ExperimentSpec.from_json(args.spec)
    else:
        overrides = {} if args.trials is None else {"trials": args.trials}
        spec = ExperimentSpec.preset(args.scenario, **overrides)
    table = run(spec)
    out = Path(args.out)
    paths = table.write(out, spec.scenario)
    if "snr_db" in table.columns and "delay_error" in table.columns:
        group = "factor" if "factor" in table.columns else None
        table.to_dat(out / f"{spec.scenario}.dat", "snr_db", ["delay_error"], group=group)
        paths.append(out / f"{spec.scenario}.dat")
    for p in paths:
        print(p)
    return 0


def cmd_ultrasound(args) -> int:
    if args.input:
        record = us.load_record(args.input, args.header)
    else:
        record = us.synthesize_channel(us.phantom_scatterers(), snr_db=args.snr_db, seed=args.seed, two_way=not args.one_way)
    out = us.run_pipeline(
        record,
        L=args.L,
        N=args.N,
        threshold_fraction=args.threshold_fraction,
        threshold_stage=args.threshold_stage,
        two_way=not args.one_way,
    )
    doc = out.to_dict()
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    print(json.dumps({k: doc[k] for k in ("depths_m", "reflectivities", "localization_error_m", "rate_reduction")}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sosfri", description="Sum-of-sincs sampling and recovery of pulse streams.")
    sub = p.add_subparsers(dest="command", required=True)

    def pulse_args(sp):
        sp.add_argument("--pulse", choices=["dirac", "gaussian"], default="dirac")
        sp.add_argument("--sigma", type=float, default=7e-3, help="Gaussian width in seconds")

    d = sub.add_parser("design-kernel", help="emit a kernel JSON document")
    d.add_argument("--tau", type=float, default=1.0)
    d.add_argument("--k-min", type=int, default=-5)
    d.add_argument("--k-max", type=int, default=5)
    d.add_argument("--M", type=int, help="symmetric index set of this size (overrides --k-min/--k-max)")
    d.add_argument("--coeffs", choices=["dirichlet", "hamming", "optimal"], default="dirichlet")
    d.add_argument("--L", type=int, default=1, help="pulse count (optimal coefficients)")
    d.add_argument("--noise-var", type=float, default=1.0, help="sample noise variance (optimal coefficients)")
    d.add_argument("--N", type=int, help="sample count (optimal coefficients)")
    d.add_argument("--R", type=float, help="pulse support; emits the periodic extension g_r")
    d.add_argument("--normalize", action="store_true", help="scale to unit coefficient energy")
    d.add_argument("--out")
    pulse_args(d)
    d.set_defaults(func=cmd_design_kernel)

    s = sub.add_parser("sample", help="acquire samples of a stream")
    s.add_argument("--stream", required=True, help="stream JSON")
    s.add_argument("--kernel", required=True, help="kernel JSON")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--window-start", type=float, default=0.0)
    s.add_argument("--method", choices=["auto", "analytic", "quadrature"], default="auto")
    s.add_argument("--snr-db", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="CSV path (a JSON sidecar is written next to it)")
    s.set_defaults(func=cmd_sample)

    r = sub.add_parser("recover", help="recover delays and amplitudes from samples")
    r.add_argument("--samples", required=True)
    r.add_argument("--kernel", required=True)
    r.add_argument("--stream", help="stream JSON to take the pulse shape from")
    r.add_argument("--L", type=int, required=True)
    r.add_argument("--tls", action="store_true")
    r.add_argument("--cadzow-iters", type=int, default=0)
    r.add_argument("--window-start", type=float, default=0.0)
    r.add_argument("--out")
    pulse_args(r)
    r.set_defaults(func=cmd_recover)

    e = sub.add_parser("experiment", help="run a simulation protocol")
    e.add_argument("--spec", help="ExperimentSpec JSON")
    e.add_argument("--scenario", choices=SCENARIOS, default="periodic_noisy", help="preset used when --spec is absent")
    e.add_argument("--trials", type=int)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_experiment)

    u = sub.add_parser("ultrasound", help="pulse-echo pipeline on a real or synthetic record")
    src = u.add_mutually_exclusive_group()
    src.add_argument("--input", help="CSV or int16 record")
    src.add_argument("--synthesize", action="store_true", help="use the synthetic phantom (default)")
    u.add_argument("--header", help="JSON header for raw records")
    u.add_argument("--L", type=int, default=4)
    u.add_argument("--N", type=int, default=17)
    u.add_argument("--threshold-fraction", type=float, default=0.0)
    u.add_argument("--threshold-stage", choices=["baseband", "samples"], default="baseband")
    u.add_argument("--snr-db", type=float, default=20.0)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--one-way", action="store_true", help="depth = c t instead of c t / 2")
    u.add_argument("--out")
    u.set_defaults(func=cmd_ultrasound)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
