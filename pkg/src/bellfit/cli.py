"""Command line interface: ``bellfit simulate | analyze | fit``.

Exit status is 0 on success (whatever the physics verdicts), 1 for file,
parse, validation or fit failures and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

from . import __version__
from .errors import BellfitError, DegenerateDataError, MissingDataError
from .io import config_items, format_dataset, load_config, parse_dataset, write_report
from .lhv import LhvParams
from .model import realistic_config
from .simulate import SimulationPlan, angle_grid, simulate_grid, simulate_lhv_grid
from .stats import (
    Thresholds,
    analyze_scan,
    estimate_efficiencies,
    fit_lhv,
    fit_qm,
    f_series,
    joint_series,
    nosignalling_check,
    singles_means,
)
from .dataset import angle_key

DEFAULT_GRID = "0:180:5"


class UsageError(Exception):
    pass


def parse_grid(text):
    """``start:stop:step`` (half-open, degrees) or a comma list of angles."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            return angle_grid(start, stop, step)
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad angle grid {text!r}: {exc}") from None


def parse_lhv(text):
    try:
        v, eta = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"--lhv expects 'v,eta', got {text!r}") from None
    return v, eta


def parse_count(text):
    value = float(text)
    if value != int(value):
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    return int(value)


def _thresholds_from(args, base=None):
    t = base or Thresholds()
    changes = {k: getattr(args, k) for k in ("lhv1_eta", "lhv2_eta", "qm_sigma")
               if getattr(args, k, None) is not None}
    return Thresholds(**{**t.__dict__, **changes})


def _load_setup(args):
    base = realistic_config()
    if getattr(args, "config", None):
        return load_config(args.config, base=base)
    return base, Thresholds()


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def cmd_simulate(args):
    config, _ = _load_setup(args)
    plan = SimulationPlan(config, args.alice, args.bob, args.n, seed=args.seed,
                          method=args.method, windows=args.windows)
    if args.lhv is None:
        dataset = simulate_grid(plan, workers=args.workers)
    else:
        v, eta = args.lhv
        dataset = simulate_lhv_grid(plan, LhvParams.from_visibility(v, eta),
                                    workers=args.workers)
    dataset.metadata.update({f"config.{k}": repr(v) for k, v in config_items(config)})
    text = format_dataset(dataset)
    Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    print(f"wrote {len(dataset)} records to {args.output}")
    return 0


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------

def _analyze_one(dataset, thresholds, means, beta):
    return analyze_scan(dataset, beta, thresholds, means)


def run_analysis(dataset, thresholds, workers=None, joint=False, r0=None):
    """Per-scan reports plus a flat summary dict for one dataset."""
    means = singles_means(dataset)
    betas = dataset.beta_values()
    job = partial(_analyze_one, dataset, thresholds, means)
    if workers and workers > 1 and len(betas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, betas))
    else:
        reports = [job(b) for b in betas]

    summary = {"bellfit_version": __version__, "n_records": len(dataset),
               "n_scans": len(betas)}
    summary.update({f"thresholds.{k}": v for k, v in thresholds.__dict__.items()})
    summary.update({f"singles_mean.{k}": m
                    for k, m in zip(("s_ap", "s_am", "s_bp", "s_bm"), means)})
    if r0 is None and "pairs_per_setting" in dataset.metadata:
        r0 = float(dataset.metadata["pairs_per_setting"])
    if r0 is not None:
        summary["r0"] = r0
        summary.update({f"efficiency.{k}": v
                        for k, v in estimate_efficiencies(dataset, r0).__dict__.items()})
    try:
        ns = nosignalling_check(dataset)
        summary.update({"nosignalling.min_p": ns.min_p, "nosignalling.n_tests": ns.n_tests,
                        "nosignalling.adjusted_p": ns.adjusted_p,
                        "nosignalling.flagged": ns.flagged})
    except DegenerateDataError as exc:
        summary["nosignalling.skipped"] = str(exc)
    verdict_rows = [r.nu for r in reports if r.nu is not None]
    summary["scans_consistent_qm"] = sum(n.consistent_with_qm for n in verdict_rows)
    summary["scans_lhv1_compatible"] = sum(n.lhv1_compatible for n in verdict_rows)
    summary["scans_lhv2_compatible"] = sum(n.lhv2_compatible for n in verdict_rows)
    if joint:
        series = joint_series(dataset, means)
        qm, lhv = fit_qm(series), fit_lhv(series)
        summary.update({"joint.n_points": len(series), "joint.chi2_qm": qm.chi2,
                        "joint.dof_qm": qm.dof, "joint.v": qm.params["v"],
                        "joint.chi2_lhv": lhv.chi2, "joint.dof_lhv": lhv.dof,
                        "joint.eta_fit": lhv.params["eta"],
                        "joint.epsilon_fit": lhv.params["epsilon"]})
        if lhv.eta_interval is not None:
            summary["joint.eta_fit_lo"], summary["joint.eta_fit_hi"] = lhv.eta_interval
    return reports, summary


def cmd_analyze(args):
    dataset = parse_dataset(args.dataset)
    _, base = _load_setup(args)
    thresholds = _thresholds_from(args, base)
    reports, summary = run_analysis(dataset, thresholds, args.workers, args.joint, args.r0)
    written = write_report(args.output, reports, thresholds, summary)
    for r in reports:
        if r.nu is None:
            print(f"beta={r.beta_deg:g}: no nu ({'; '.join(r.warnings)})")
            continue
        n = r.nu
        print(f"beta={r.beta_deg:g}: nu={n.nu:.6g} +- {n.sigma_nu:.3g} "
              f"({n.sigma_deviation_from_qm:+.2f} sigma) qm={_yn(n.consistent_with_qm)} "
              f"lhv1={_yn(n.lhv1_compatible)} lhv2={_yn(n.lhv2_compatible)}")
    print(f"wrote {len(written)} files to {args.output}")
    return 0


def _yn(flag):
    return "yes" if flag else "no"


# --------------------------------------------------------------------------
# fit
# --------------------------------------------------------------------------

def parse_selector(text):
    """'beta=90' -> 90.0; 'all' -> None (pooled fit)."""
    if text == "all":
        return None
    key, sep, value = text.partition("=")
    if not sep or key.strip() != "beta":
        raise argparse.ArgumentTypeError(f"scan selector must be 'beta=<deg>' or 'all', got {text!r}")
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad beta in selector {text!r}") from None


def _fit_lines(fit):
    lines = [f"model={fit.model} chi2={fit.chi2:.6f} dof={fit.dof} "
             f"reduced_chi2={fit.reduced_chi2:.6f} converged={_yn(fit.converged)}"]
    for name in fit.params:
        sigma = fit.sigmas.get(name)
        err = "" if sigma is None else f" +- {sigma:.6g}"
        lines.append(f"  {name} = {fit.params[name]:.10g}{err}")
    if fit.eta_interval is not None:
        lines.append(f"  eta_interval = [{fit.eta_interval[0]:.6g}, {fit.eta_interval[1]:.6g}]")
    lines.extend(f"  warning: {w}" for w in fit.warnings)
    return lines


def cmd_fit(args):
    dataset = parse_dataset(args.dataset)
    if args.scan is None:
        series = joint_series(dataset)
        label = "all scans"
    else:
        available = dataset.beta_values()
        if angle_key(args.scan) not in available:
            raise MissingDataError(
                f"no scan at beta={angle_key(args.scan):g} deg; available beta_deg: "
                + ", ".join(f"{b:g}" for b in available))
        series = f_series(dataset, args.scan)
        label = f"beta={angle_key(args.scan):g}"
    lines = [f"scan {label}: {len(series)} points"]
    fits = {}
    if args.model in ("qm", "both"):
        fits["qm"] = fit_qm(series)
    if args.model in ("lhv", "both"):
        fits["lhv"] = fit_lhv(series)
    for fit in fits.values():
        lines.extend(_fit_lines(fit))
    if len(fits) == 2:
        lines.append(f"delta_chi2 (qm - lhv) = {fits['qm'].chi2 - fits['lhv'].chi2:.6f}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    return 0


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _add_threshold_flags(p):
    p.add_argument("--config", help="key=value file; only thresholds.* keys matter here")
    p.add_argument("--lhv1-eta", type=float, dest="lhv1_eta")
    p.add_argument("--lhv2-eta", type=float, dest="lhv2_eta")
    p.add_argument("--qm-sigma", type=float, dest="qm_sigma")


def build_parser():
    parser = argparse.ArgumentParser(prog="bellfit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bellfit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", help="key=value setup file (default: realistic setup)")
    p.add_argument("--alice", type=parse_grid, default=parse_grid(DEFAULT_GRID),
                   help=f"Alice angles, start:stop:step or list (default {DEFAULT_GRID})")
    p.add_argument("--bob", type=parse_grid, default=parse_grid(DEFAULT_GRID),
                   help=f"Bob angles (default {DEFAULT_GRID})")
    p.add_argument("-n", type=parse_count, default=10 ** 6,
                   help="pairs per setting (LHV: mean pairs) (default 1e6)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("event", "staged"), default="staged")
    p.add_argument("--windows", type=int, help="Poisson number of pairs per window")
    p.add_argument("--lhv", type=parse_lhv, metavar="V,ETA",
                   help="simulate the LHV family instead of quantum mechanics")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="full per-scan analysis into a report directory")
    p.add_argument("dataset")
    _add_threshold_flags(p)
    p.add_argument("--r0", type=float, help="pairs per setting for efficiency estimates")
    p.add_argument("--joint", action="store_true", help="also fit all scans pooled")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", required=True, help="report directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="chi-square fits of one scan")
    p.add_argument("dataset")
    p.add_argument("--model", choices=("qm", "lhv", "both"), default="both")
    p.add_argument("--scan", type=parse_selector, default=90.0,
                   help="'beta=<deg>' or 'all' (default beta=90)")
    p.add_argument("-o", "--output", help="also write the table here")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BellfitError, OSError) as exc:
        print(f"bellfit {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
