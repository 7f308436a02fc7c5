"""Command-line entry point ``droplet``.

Every subcommand writes CSV (or JSON for ``wulff``) to stdout or ``--out``.
Exit codes: 0 success, 1 configuration or argument error, 2 when a sweep
aborted one or more deficit points.
"""

from __future__ import annotations

import argparse
import io
import csv
import math
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED = 0, 1, 2


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _range_arg(text: str):
    """Parse ``a..b`` (inclusive) or a comma list of integers."""
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b or a comma list, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return vals


def _direction_arg(text: str):
    try:
        k1, k2 = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k1,k2, got {text!r}") from None
    return k1, k2


def cmd_phi(args) -> int:
    from .variational import PhiParams, minimize_phi

    if args.step <= 0 or args.delta_to < args.delta_from or args.delta_from < 0:
        raise ValueError("need 0 <= delta-from <= delta-to and step > 0")
    n = int(math.floor((args.delta_to - args.delta_from) / args.step + 1e-9)) + 1
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "d", "phi_star", "lambda_delta", "lambda_plus"])
    for k in range(n):
        delta = round(args.delta_from + k * args.step, 12)
        sol = minimize_phi(PhiParams(delta, args.d))
        w.writerow([_fmt(delta), args.d, _fmt(sol.phi_star), _fmt(sol.lambda_delta), _fmt(sol.lambda_plus)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_tau(args) -> int:
    from .wulff import axis_tau_closed_form, estimate_tau

    est = estimate_tau(args.beta, args.direction, widths=args.widths, max_window=args.max_window)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "k1", "k2", "width", "tau", "error"])
    for m in sorted(est.per_width):
        w.writerow([_fmt(args.beta), *est.direction, m, _fmt(est.per_width[m]), ""])
    w.writerow([_fmt(args.beta), *est.direction, "extrapolated", _fmt(est.tau), _fmt(est.error)])
    if est.direction in ((1, 0), (0, 1)):
        w.writerow([_fmt(args.beta), *est.direction, "closed_form", _fmt(axis_tau_closed_form(args.beta)), ""])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_wulff(args) -> int:
    from .wulff import SurfaceTension, build_wulff

    if args.tau_source == "constant":
        tau = SurfaceTension.constant(args.tau0)
    else:
        tau = SurfaceTension.dual_estimated(args.beta)
    W = build_wulff(tau, args.n)
    _emit(W.to_json() + "\n", args.out)
    return EXIT_OK


def cmd_bulk(args) -> int:
    from .sampler import ChainParams, estimate_bulk

    est = estimate_bulk(args.beta, args.L, ChainParams(args.beta, args.sweeps, args.thermalization,
                                                       seed=args.seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "L", "m_star", "m_star_err", "chi", "chi_err", "tau_int", "n_samples"])
    w.writerow([_fmt(args.beta), args.L, _fmt(est.m_star_hat), _fmt(est.m_star_err), _fmt(est.chi_hat),
                _fmt(est.chi_err), _fmt(est.tau_int), est.n_samples])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .experiment import ExperimentConfig, run_sweep

    cfg = ExperimentConfig.from_toml(args.config)
    progress = (lambda msg: print(msg, file=sys.stderr, flush=True)) if args.verbose else None
    summary = run_sweep(cfg, progress=progress)
    out = Path(args.out) if args.out else Path(args.config).resolve().parent / "sweep_out"
    summary.write(out)
    sys.stdout.write(summary.summary_csv())
    return EXIT_ABORTED if summary.aborted else EXIT_OK


def cmd_enumerate(args) -> int:
    from .enum_oracle import enumerate_distribution, pmf_csv

    law = enumerate_distribution(args.L, args.beta, args.boundary)
    _emit(pmf_csv(law), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="droplet", description="Droplet formation in the 2D Ising model.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phi", help="minimizers of the droplet rate function over a delta range")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--delta-from", type=float, default=0.0)
    s.add_argument("--delta-to", type=float, default=3.0)
    s.add_argument("--step", type=float, default=0.01)
    s.set_defaults(func=cmd_phi)

    s = sub.add_parser("tau", help="transfer-matrix surface tension estimate")
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--widths", type=_range_arg, default=_range_arg("6..12"))
    s.add_argument("--direction", type=_direction_arg, default=(1, 0))
    s.add_argument("--max-window", type=int, default=16)
    s.set_defaults(func=cmd_tau)

    s = sub.add_parser("wulff", help="unit-area Wulff shape as JSON")
    s.add_argument("--beta", type=float, default=0.7)
    s.add_argument("--n", type=int, default=4096)
    s.add_argument("--tau-source", choices=["dual_estimated", "constant"], default="dual_estimated")
    s.add_argument("--tau0", type=float, default=1.0)
    s.set_defaults(func=cmd_wulff)

    s = sub.add_parser("bulk", help="spontaneous magnetization and susceptibility estimates")
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--sweeps", type=int, default=4000)
    s.add_argument("--thermalization", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bulk)

    s = sub.add_parser("sweep", help="run a deficit sweep from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("enumerate", help="exact magnetization law on a small box")
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--boundary", choices=["plus", "minus", "free"], default="plus")
    s.set_defaults(func=cmd_enumerate)

    for sp in sub.choices.values():
        sp.add_argument("--out", default=None,
                        help="output file (output directory for sweep); stdout when omitted")
    return p


def main(argv=None) -> int:
    from .experiment import ConfigError
    from .sampler import SamplerConsistencyError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"droplet {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SamplerConsistencyError as exc:
        print(f"droplet {args.command}: {exc}", file=sys.stderr)
        return EXIT_ABORTED


if __name__ == "__main__":
    sys.exit(main())
