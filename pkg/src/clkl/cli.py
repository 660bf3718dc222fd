"""Command-line entry point: sweep / ablation / converge / runtime / crb."""

import argparse
import sys
from dataclasses import replace

from clkl import config as config_mod
from clkl import harness
from clkl.harness import SweepSpec


def _add_common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seed", type=int, help="base seed (default 42)")
    parser.add_argument("--mc", type=int, help="Monte-Carlo trials per point")
    parser.add_argument("--full", action="store_true", help="publication scale: 400 trials")
    parser.add_argument("--workers", type=int, help="parallel worker processes")
    parser.add_argument(
        "--fixed-combiner", action="store_true",
        help="reuse one combiner for the whole sweep instead of redrawing per trial",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="clkl",
        description="Compressed-covariance near-field channel estimation benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over one variable")
    _add_common(p_sweep)
    p_sweep.add_argument("--var", choices=harness.SWEEP_VARIABLES, help="sweep variable")
    p_sweep.add_argument("--values", help="comma-separated sweep values")
    p_sweep.add_argument("--methods", help="comma-separated subset of clkl,psomp")
    p_sweep.add_argument("--timing", action="store_true", help="record per-trial runtimes")

    p_abl = sub.add_parser("ablation", help="estimator-variant comparison")
    _add_common(p_abl)
    p_abl.add_argument("--snrs", default="-5,5,15", help="comma-separated SNR points")

    p_conv = sub.add_parser("converge", help="objective-trace diagnostic")
    _add_common(p_conv)
    p_conv.add_argument("--snrs", default="-10,0,10,20", help="comma-separated SNR points")

    p_rt = sub.add_parser("runtime", help="runtime vs array size (single worker)")
    _add_common(p_rt)
    p_rt.add_argument("--m-values", default="32,64,128,256", help="array sizes")

    p_crb = sub.add_parser("crb", help="bound medians vs path count")
    _add_common(p_crb)
    p_crb.add_argument("--d-values", default="1,2,3,4,5", help="path counts")

    return parser


def _load(args):
    cfg = config_mod.load_config(args.config) if args.config else {}
    return cfg


def _mc(args, default):
    if args.full:
        return 400
    if args.mc is not None:
        return args.mc
    return default


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = _load(args)
    base = config_mod.scenario_from_config(cfg)
    seed = args.seed if args.seed is not None else cfg.get("seed", 42)
    workers = args.workers if args.workers is not None else cfg.get("workers", 1)

    if args.command == "sweep":
        spec = config_mod.sweep_spec_from_config(cfg)
        overrides = {"base_seed": seed, "workers": workers, "n_trials": _mc(args, spec.n_trials)}
        if args.var:
            overrides["variable"] = args.var
            if not args.values and args.var != "snr":
                raise SystemExit("--values is required for non-SNR sweeps")
        if args.values:
            variable = overrides.get("variable", spec.variable)
            overrides["values"] = config_mod._parse_values(variable, args.values)
        if args.methods:
            overrides["methods"] = tuple(m.strip() for m in args.methods.split(","))
        if args.fixed_combiner:
            overrides["fixed_combiner"] = True
        if args.timing:
            overrides["timing"] = True
        spec = replace(spec, **overrides)
        harness.run_sweep(spec, out_path=args.out)
    elif args.command == "ablation":
        snrs = tuple(float(v) for v in args.snrs.split(","))
        harness.run_ablation(
            base, snr_values=snrs, n_trials=_mc(args, 50), base_seed=seed,
            workers=workers, out_path=args.out,
        )
    elif args.command == "converge":
        snrs = tuple(float(v) for v in args.snrs.split(","))
        harness.run_convergence_diag(
            base, snr_values=snrs, n_trials=_mc(args, 50), base_seed=seed,
            out_path=args.out,
        )
    elif args.command == "runtime":
        m_values = tuple(int(v) for v in args.m_values.split(","))
        harness.run_runtime_bench(
            base, m_values=m_values, n_trials=_mc(args, 50), base_seed=seed,
            out_path=args.out,
        )
    elif args.command == "crb":
        d_values = tuple(int(v) for v in args.d_values.split(","))
        harness.run_crb_report(
            base, d_values=d_values, n_trials=_mc(args, 50), base_seed=seed,
            out_path=args.out,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
