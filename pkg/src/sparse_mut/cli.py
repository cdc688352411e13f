"""Command-line front end.

    sparse-mut characterize --mut sample.s1p --ref plate.s1p [options]
    sparse-mut synthetic --eps 2.6 --tand 0.005 --thickness-mm 3.3 [options]

Exit status is 0 when at least one method produced an estimate, 1 when every
method failed and 2 for bad arguments or unreadable inputs.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .forward_model import WINDOWS
from .io import IngestError
from .pipeline import METHOD_NAMES, PipelineConfig, SyntheticSetup, run_characterize, run_synthetic
from .report import FORMATS, dump_traces, emit_report

SEED_ENV = "SPARSE_MUT_SEED"


def _methods(text: str) -> tuple[str, ...]:
    items = tuple(t.strip().lower() for t in text.split(",") if t.strip())
    bad = [m for m in items if m not in METHOD_NAMES]
    if not items or bad:
        raise argparse.ArgumentTypeError(f"methods must be a comma list of {sorted(METHOD_NAMES)}")
    return items


def _range(text: str) -> tuple[int, ...]:
    try:
        lo, hi = (int(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI, e.g. 2:8") from None
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError("need 1 <= LO <= HI")
    return tuple(range(lo, hi + 1))


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected START:STOP in GHz, e.g. 75:110") from None
    if not 0 < lo < hi:
        raise argparse.ArgumentTypeError("need 0 < START < STOP")
    return lo * 1e9, hi * 1e9


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--methods", type=_methods, default=("fd", "du", "l2"), help="comma list of fd,du,l2")
    s = g.add_mutually_exclusive_group()
    s.add_argument("--s0", type=int, help="fixed sparsity level")
    s.add_argument("--s0-sweep", type=_range, default=tuple(range(2, 9)), metavar="LO:HI",
                   help="sparsity levels to try (default 2:8)")
    g.add_argument("--epsilon", type=float, default=1e-2, help="residual-energy tolerance")
    g.add_argument("--max-iters", type=int, default=10, help="dictionary-update iterations P")
    g.add_argument("--window", choices=WINDOWS, default="none")
    g.add_argument("--pad", type=int, default=4, help="zero-padding factor before the IFFT")
    g.add_argument("--tau-mg-div", type=float, default=50.0, help="grid step / mini-grid step")
    g.add_argument("--tau-w-policy", choices=("half_grid_step", "full_grid_step"), default="full_grid_step")
    g.add_argument("--l-keep", type=int, default=512, help="CIR bins kept (L)")
    g.add_argument("--parallel", action="store_true", help="run the methods concurrently")
    o = p.add_argument_group("output")
    o.add_argument("--format", choices=FORMATS, default="json")
    o.add_argument("--out", help="write the report here instead of stdout")
    o.add_argument("--dump-traces", metavar="DIR", help="write CIRs and atoms as CSV")
    o.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-mut",
        description="Sparse reflection recovery and permittivity/thickness estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characterize", help="measured MUT sweep plus metal-plate reference")
    c.add_argument("--mut", required=True, help="MUT sweep (.s1p or .csv)")
    c.add_argument("--ref", required=True, help="metal-plate sweep (.s1p or .csv)")
    c.add_argument("--resample", action="store_true", help="interpolate non-uniform grids")
    _common(c)

    s = sub.add_parser("synthetic", help="generated slab measurement with ground truth")
    s.add_argument("--eps", type=float, required=True, help="relative permittivity eps'")
    s.add_argument("--tand", type=float, default=0.0, help="loss tangent")
    s.add_argument("--thickness-mm", type=float, required=True)
    s.add_argument("--standoff-mm", type=float, default=50.0)
    s.add_argument("--bounces", type=int, default=5)
    s.add_argument("--band", type=_band, default=(75e9, 110e9), metavar="START:STOP",
                   help="band in GHz (default 75:110)")
    s.add_argument("--n", type=int, default=1001, help="frequency points")
    n = s.add_mutually_exclusive_group()
    n.add_argument("--noise", type=float, help="complex noise variance per sample")
    n.add_argument("--snr-db", type=float, help="SNR of the MUT sweep in dB")
    s.add_argument("--on-grid", action="store_true", help="snap echoes onto the dictionary grid")
    s.add_argument("--seed", type=int, help=f"noise seed (default ${SEED_ENV} or 0)")
    _common(s)
    return parser


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        methods=args.methods,
        s0=args.s0,
        s0_range=args.s0_sweep,
        epsilon=args.epsilon,
        max_iters=args.max_iters,
        window=args.window,
        pad=args.pad,
        tau_mg_div=args.tau_mg_div,
        tau_w_policy=args.tau_w_policy,
        l_keep=args.l_keep,
        parallel=args.parallel,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "characterize":
            report, prep = run_characterize(args.mut, args.ref, cfg, resample=args.resample)
        else:
            f_start, f_stop = args.band
            setup = SyntheticSetup(
                epsilon_real=args.eps,
                tan_delta=args.tand,
                thickness=args.thickness_mm * 1e-3,
                standoff=args.standoff_mm * 1e-3,
                n_bounces=args.bounces,
                f_start=f_start,
                f_stop=f_stop,
                n_steps=args.n,
                noise_variance=args.noise,
                snr_db=args.snr_db,
                on_grid=args.on_grid,
                seed=_seed(args.seed),
            )
            report, prep = run_synthetic(setup, cfg)
        text = emit_report(report, args.format, args.out)
        if args.out is None:
            sys.stdout.write(text)
        if args.dump_traces:
            dump_traces(args.dump_traces, report, prep)
    except (IngestError, OSError, ValueError) as exc:
        print(f"sparse-mut: error: {exc}", file=sys.stderr)
        return 2
    for m in report.methods:
        if not m.ok:
            print(f"sparse-mut: {m.method} failed: {m.error}", file=sys.stderr)
    return 0 if report.succeeded else 1


if __name__ == "__main__":
    sys.exit(main())
