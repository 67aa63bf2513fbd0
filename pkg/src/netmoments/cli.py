"""Command-line entry point: ``netmoments <command> ...``.

Every command that writes files also writes a JSON run manifest next to them
(``<out>.manifest.json`` for a single file, ``manifest.json`` inside an
output directory). ``metrics`` without ``--out`` prints the manifest inside
its JSON report. Exit codes: 0 success, 1 runtime failure (one JSON line on
stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import secrets
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, _accel, abm, classic, eigen, experiments
from . import network as netio
from .errors import NetMomentsError
from .synthesis import GridSpec, MetricTarget, default_grid, grid_targets, synthesize

log = logging.getLogger("netmoments")

PARAM_FLAGS = {
    "initial_agents": int,
    "growth_rate": float,
    "litter_size": int,
    "mortality": float,
    "dispersal_threshold": float,
    "mean_dispersal": float,
    "capacity": int,
}


def _manifest(args, command, outputs, inputs=()):
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
             if k not in ("func", "command")}
    return {
        "command": command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "backend": _accel.backend(),
    }


def _write_manifest(path, manifest):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve_seed(args):
    if args.seed is None:
        args.seed = secrets.randbits(32)
        log.info("drew seed %d from system entropy", args.seed)


def _params(args) -> abm.SimParams:
    params = abm.SimParams()
    if getattr(args, "params", None):
        params = abm.SimParams.from_dict(json.loads(Path(args.params).read_text()))
    overrides = {k: getattr(args, k) for k in PARAM_FLAGS if getattr(args, k, None) is not None}
    if getattr(args, "dispersal_rule", None):
        overrides["dispersal_rule"] = args.dispersal_rule
    return replace(params, **overrides) if overrides else params


def _load_net(path, args):
    net = netio.load(path)
    if args.w_min is not None or args.w_max is not None:
        lo = net.w_min if args.w_min is None else args.w_min
        hi = net.w_max if args.w_max is None else args.w_max
        net = netio.validate_network(net.weights, lo, hi)
    return net


def _targets(args):
    spec = GridSpec.load(args.grid) if args.grid else default_grid()
    return grid_targets(spec)


# -- commands ---------------------------------------------------------------

def cmd_metrics(args):
    net = _load_net(args.net, args)
    s = eigen.summarize(net)
    report = {
        "n": net.n,
        "lambda": s.lam,
        "ec": s.ec.tolist(),
        "ec_mean": s.ec_mean,
        "ec_var": s.ec_var,
        "ec_skew": s.ec_skew,
        **classic.classic_summary(net),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
        _write_manifest(f"{args.out}.manifest.json", _manifest(args, "metrics", [args.out], [args.net]))
    else:
        report["manifest"] = _manifest(args, "metrics", [], [args.net])
    print(json.dumps(report, indent=2))


def cmd_synth(args):
    _resolve_seed(args)
    tol = {k: v for k, v in (("tol_lam", args.tol_lambda), ("tol_var", args.tol_var),
                             ("tol_skew", args.tol_skew)) if v is not None}
    target = MetricTarget(args.n, args.lam, args.var, args.skew, bounds=(args.w_min, args.w_max), **tol)
    net = synthesize(target, seed=args.seed)
    netio.save(net, args.out)
    _write_manifest(f"{args.out}.manifest.json", _manifest(args, "synth", [args.out]))
    s = eigen.summarize(net)
    print(json.dumps({"out": str(args.out), "lambda": s.lam, "ec_var": s.ec_var, "ec_skew": s.ec_skew}))


def cmd_simulate(args):
    _resolve_seed(args)
    net = _load_net(args.net, args)
    params = _params(args)
    scenarios = ("spread", "survival") if args.scenario == "both" else (args.scenario,)
    nid = Path(args.net).stem
    outputs = [args.out]
    with open(args.out, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("scenario", "net_id", "seed", "steps", "censored"))
        for name in scenarios:
            sc = abm.Scenario(name)
            for k in range(args.reps):
                seed = abm.derive_seed(args.seed, 0, sc.code, k)
                trace = [] if args.trace and k == 0 else None
                o = abm.run_scenario(sc, net, params, seed, args.max_steps, args.method, trace)
                out.writerow((name, nid, seed, o.steps, int(o.censored)))
                if trace is not None:
                    path = Path(f"{args.trace}.{name}.csv") if len(scenarios) > 1 else Path(args.trace)
                    _write_trace(trace, path)
                    outputs.append(path)
    manifest = _manifest(args, "simulate", outputs, [args.net])
    manifest["params"] = params.to_dict()
    _write_manifest(f"{args.out}.manifest.json", manifest)


def _write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("t", "node", "count"))
        for t, counts in trace:
            for i, c in enumerate(counts):
                out.writerow((t, i, int(c)))


def cmd_sweep(args):
    _resolve_seed(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = _params(args)
    targets = _targets(args)
    failures, nets = [], {}
    records = experiments.run_sweep(targets, args.reps, args.seed, params, args.max_steps, args.workers,
                                    failures=failures, keep_networks=nets)
    experiments.write_records(records, out_dir / "records.csv")
    net_dir = out_dir / "networks"
    net_dir.mkdir(exist_ok=True)
    for index, net in sorted(nets.items()):
        netio.save(net, net_dir / f"{index:04d}.json")
    with open(out_dir / "failures.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("index", "target", "message"))
        for index, target, message in failures:
            out.writerow((index, target.label(), message))
    manifest = _manifest(args, "sweep", ["records.csv", "failures.csv", "networks/"],
                         [args.grid] if args.grid else [])
    manifest["params"] = params.to_dict()
    _write_manifest(out_dir / "manifest.json", manifest)
    print(json.dumps({"records": len(records), "failed": len(failures), "out_dir": str(out_dir)}))
    if failures:
        log.warning("%d targets failed to synthesize; see failures.csv", len(failures))


def cmd_analyze(args):
    records = experiments.read_records(args.records, n=args.n)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["correlations.csv", "fits.csv", "fits_log_spread.csv"]
    with open(out_dir / "correlations.csv", "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("var_a", "var_b", "rho", "p_value"))
        for (a, b), (rho, p) in experiments.correlation_table(records).items():
            out.writerow((a, b, repr(rho), repr(p)))
    experiments.write_fits({s: experiments.model_selection(records, s) for s in ("spread", "survival")},
                           out_dir / "fits.csv")
    experiments.write_fits({"spread": experiments.model_selection(records, "spread", log_response=True)},
                           out_dir / "fits_log_spread.csv")
    for (metric, scenario), (xs, ys) in experiments.trend_curves(records, args.frac).items():
        name = f"lowess_{metric}_{scenario}.csv"
        with open(out_dir / name, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow((metric, f"median_{scenario}"))
            out.writerows((repr(float(x)), repr(float(y))) for x, y in zip(xs, ys))
        outputs.append(name)
    summary = {s: experiments.censored_fraction(records, s) for s in ("spread", "survival")}
    manifest = _manifest(args, "analyze", outputs, [args.records])
    manifest["censored_fraction"] = summary
    _write_manifest(out_dir / "manifest.json", manifest)


def cmd_sensitivity(args):
    _resolve_seed(args)
    base = abm.SimParams()
    if args.base_params:
        base = abm.SimParams.from_dict(json.loads(Path(args.base_params).read_text()))
    targets = _targets(args)
    nets = {}
    failures = []
    base_records = experiments.run_sweep(targets, args.reps, args.seed, base, args.max_steps, args.workers,
                                         failures=failures, keep_networks=nets)
    kept = sorted(nets)
    rows = experiments.sensitivity_sweep(
        base, [targets[i] for i in kept], args.reps, args.seed, [nets[i] for i in kept],
        base_records=base_records, parameters=args.parameters, max_steps=args.max_steps,
        workers=args.workers)
    experiments.write_sensitivity(rows, args.out)
    manifest = _manifest(args, "sensitivity", [args.out], [args.base_params] if args.base_params else [])
    manifest["params"] = base.to_dict()
    _write_manifest(f"{args.out}.manifest.json", manifest)


# -- parser -----------------------------------------------------------------

def _add_bounds(p):
    p.add_argument("--w-min", type=float, default=None, help="lower weight bound")
    p.add_argument("--w-max", type=float, default=None, help="upper weight bound")


def _add_params(p):
    p.add_argument("--params", type=Path, help="JSON file of simulation parameters")
    for name, kind in PARAM_FLAGS.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind)
    p.add_argument("--dispersal-rule", choices=("reach", "below"))


def _add_run(p):
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=abm.MAX_STEPS)


def _workers(value):
    k = int(value)
    if k < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1")
    return k


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netmoments", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"netmoments {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="print eigenmetrics and classic metrics of a network")
    p.add_argument("net", type=Path)
    p.add_argument("--out", type=Path)
    _add_bounds(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("synth", help="synthesize a network with target metrics")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--var", type=float, required=True)
    p.add_argument("--skew", type=float)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--w-min", type=float, default=netio.W_MIN)
    p.add_argument("--w-max", type=float, default=netio.W_MAX)
    p.add_argument("--tol-lambda", type=float)
    p.add_argument("--tol-var", type=float)
    p.add_argument("--tol-skew", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run replicates of one scenario on one network")
    p.add_argument("--net", type=Path, required=True)
    p.add_argument("--scenario", choices=("spread", "survival", "both"), required=True)
    _add_run(p)
    p.add_argument("--method", choices=("binomial", "agents"), default="binomial")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trace", type=Path, help="CSV of per-step counts for the first replicate")
    _add_bounds(p)
    _add_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="synthesize, measure and simulate a target grid")
    p.add_argument("--grid", type=Path, help="grid JSON (default: bundled grid)")
    _add_run(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--workers", type=_workers, default=experiments.default_workers())
    _add_params(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="correlations, model selection and trend curves")
    p.add_argument("--records", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--n", type=int, default=6, help="network size, used when ec_mean is absent")
    p.add_argument("--frac", type=float, default=0.67, help="LOWESS span")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sensitivity", help="R2 change under +-10%% parameter perturbations")
    p.add_argument("--base-params", type=Path)
    p.add_argument("--grid", type=Path)
    _add_run(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=_workers, default=experiments.default_workers())
    p.add_argument("--parameters", nargs="+", choices=sorted(experiments.PERTURBATIONS))
    p.set_defaults(func=cmd_sensitivity)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (NetMomentsError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
