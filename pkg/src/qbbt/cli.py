"""Command-line interface.

Subcommands:
  run          one benchmark case; writes errors.csv, output series,
               diagnostics, a run manifest, and figures into --out
  oracle       dense-oracle equivalence suites (Gramians and contractions)
  alpha-sweep  stability diagnostics over stabilization-parameter candidates
  lift-check   lifted-simulation equivalence suite

Exit codes: 0 full success, 1 any failed row/check, 2 usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments, reactor, suites
from .balancing import select_alpha


def _parse_r_list(text):
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad r list: {text}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty r list")
    return values


def _parse_floats(text):
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list: {text}") from exc


def _build_config(args):
    if getattr(args, "config", None):
        cfg = reactor.ReactorConfig.from_file(args.config)
    else:
        cfg = reactor.ReactorConfig()
    if getattr(args, "n", None) is not None:
        cfg = reactor.ReactorConfig(
            damkohler=cfg.damkohler, peclet=cfg.peclet,
            heat_release=cfg.heat_release, beta=cfg.beta,
            theta_ref=cfg.theta_ref, gamma=cfg.gamma, n=args.n,
            c0=cfg.c0, c1=cfg.c1, c2=cfg.c2, c3=cfg.c3,
            b_profile=cfg.b_profile,
        )
    return cfg


def _print_rows(rows):
    ok = True
    for name, passed, detail in rows:
        print(f"  [{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        ok &= passed
    return ok


def _cmd_run(args):
    cfg = _build_config(args)
    spec = experiments.CaseSpec.standard(
        args.case,
        r_list=args.r_list,
        alpha=args.alpha,
        seed=args.seed,
        t_f=args.t_f,
        t_train=args.t_train,
    )
    result = experiments.run_case(spec, cfg, dt=args.dt)
    experiments.write_case_outputs(result, args.out, make_plots=not args.no_plots)
    for method, r, error, status in result.rows:
        tag = f"{error:.6e}" if status == "ok" else status
        print(f"case {spec.case_id}  {method:10s} r={r:<4d} error={tag}")
    print(f"report written to {args.out}")
    return 1 if result.failed else 0


def _cmd_oracle(args):
    print("truncated-Gramian equivalence:")
    ok = _print_rows(suites.oracle_suite())
    print("tensor contraction equivalence:")
    ok &= _print_rows(suites.contraction_suite())
    return 0 if ok else 1


def _cmd_lift_check(args):
    print(f"lifting equivalence (n = {args.n}):")
    ok = _print_rows(suites.lift_check_suite(n=args.n))
    return 0 if ok else 1


def _cmd_alpha_sweep(args):
    cfg = _build_config(args)
    fom = reactor.assemble_fom(cfg)
    structured = reactor.lift_reactor(fom, cfg)
    diags = select_alpha(structured, args.candidates, probe_r=args.probe_r,
                         probe=not args.no_probe)
    header = f"{'alpha':>10s} {'spectral':>14s} {'numerical':>14s} {'probe':>8s}"
    print(header)
    for d in diags:
        probe = "-" if d.probe_bounded is None else \
            ("bounded" if d.probe_bounded else "blew up")
        print(f"{d.alpha:10.4g} {d.spectral_abscissa:14.6e} "
              f"{d.numerical_abscissa:14.6e} {probe:>8s}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "alpha_sweep.csv")
        with open(path, "w") as fh:
            fh.write("alpha,spectral_abscissa,numerical_abscissa,"
                     "probe_bounded,probe_max_state\n")
            for d in diags:
                probe = "" if d.probe_bounded is None else str(d.probe_bounded)
                peak = "" if d.probe_max_state is None else f"{d.probe_max_state:.17e}"
                fh.write(f"{d.alpha!r},{d.spectral_abscissa:.17e},"
                         f"{d.numerical_abscissa:.17e},{probe},{peak}\n")
        if not args.no_plots:
            from . import report

            report.save_alpha_sweep(diags, os.path.join(args.out, "alpha_sweep.png"))
        print(f"sweep written to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qbbt",
        description="Balanced truncation for lifted quadratic-bilinear systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one benchmark case")
    run.add_argument("--case", type=int, required=True, choices=(1, 2, 3, 4))
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", help="reactor config file (key=value)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--alpha", type=float, default=20.0)
    run.add_argument("--n", type=int, default=50, help="grid points per field")
    run.add_argument("--r-list", type=_parse_r_list,
                     default=list(range(4, 21, 2)), help="comma-separated orders")
    run.add_argument("--dt", type=float, default=1e-4)
    run.add_argument("--t-f", type=float, default=30.0)
    run.add_argument("--t-train", type=float, default=15.0)
    run.add_argument("--no-plots", action="store_true")
    run.set_defaults(fn=_cmd_run)

    oracle = sub.add_parser("oracle", help="dense-oracle equivalence suites")
    oracle.set_defaults(fn=_cmd_oracle)

    sweep = sub.add_parser("alpha-sweep", help="stabilization parameter diagnostics")
    sweep.add_argument("--candidates", type=_parse_floats,
                       default=[0.5, 1.0, 2.0, 2.6, 4.0, 8.0, 20.0])
    sweep.add_argument("--n", type=int, default=50)
    sweep.add_argument("--config", help="reactor config file (key=value)")
    sweep.add_argument("--probe-r", type=int, default=4)
    sweep.add_argument("--no-probe", action="store_true")
    sweep.add_argument("--out", help="optional output directory")
    sweep.add_argument("--no-plots", action="store_true")
    sweep.set_defaults(fn=_cmd_alpha_sweep)

    lift = sub.add_parser("lift-check", help="lifting equivalence suite")
    lift.add_argument("--n", type=int, default=50)
    lift.set_defaults(fn=_cmd_lift_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
