"""Grid sweeps, regression model selection and the sensitivity protocol."""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from itertools import combinations

import numpy as np

from . import abm, classic, eigen
from .errors import Infeasible, NetMomentsError
from .network import WeightedNetwork
from .stats import FitSummary, lowess_curve, ols_fit, spearman
from .synthesis import MetricTarget, synthesize

log = logging.getLogger(__name__)

METRICS = ("lambda", "var", "skew")

TABLE3_MODELS = [c for k in (1, 2, 3) for c in combinations(METRICS, k)]

EXTENDED_MODELS = {
    "spread": ("lambda", "var", "skew", "lambda^2", "lambda*var", "lambda*skew"),
    "survival": ("lambda", "skew", "lambda^2", "var^2", "skew^2", "lambda*var", "var*skew"),
}

# -10% / +10% values; mortality is listed explicitly, not derived from the base
PERTURBATIONS = {
    "initial_agents": (135, 165),
    "growth_rate": (0.67, 0.82),
    "litter_size": (2, 4),
    "mortality": (0.504, 0.616),
    "dispersal_threshold": (0.81, 0.99),
    "mean_dispersal": (1.8, 2.2),
    "capacity": (135, 165),
}

RECORD_COLUMNS = (
    "net_id", "lambda", "ec_var", "ec_skew", "mean_strength", "mean_clustering",
    "mean_shortest_path", "global_eff", "local_eff", "median_spread", "spread_censored",
    "median_survival", "survival_censored", "reps",
)


@dataclass
class ExperimentRecord:
    net_id: str
    lam: float
    ec_var: float
    ec_skew: float | None
    mean_strength: float
    mean_clustering: float
    mean_shortest_path: float
    global_eff: float
    local_eff: float
    median_spread: float | None
    spread_censored: int
    median_survival: float | None
    survival_censored: int
    reps: int
    ec_mean: float | None = None

    def row(self) -> dict:
        """Variable mapping used by the regressions."""
        return {
            "lambda": self.lam,
            "var": self.ec_var,
            "skew": self.ec_skew,
            "avg": self.ec_mean,
            "mean_strength": self.mean_strength,
            "global_eff": self.global_eff,
            "mean_shortest_path": self.mean_shortest_path,
            "local_eff": self.local_eff,
            "mean_clustering": self.mean_clustering,
            "spread": self.median_spread,
            "survival": self.median_survival,
        }


def net_id(target: MetricTarget, seed: int) -> str:
    s = "free" if target.skew is None else f"{target.skew:g}"
    return f"net_L{target.lam:g}_V{target.var:g}_S{s}_seed{seed}"


def measure(net: WeightedNetwork) -> dict:
    summary = eigen.summarize(net)
    out = {"lam": summary.lam, "ec_var": summary.ec_var, "ec_skew": summary.ec_skew,
           "ec_mean": summary.ec_mean}
    out.update(classic.classic_summary(net))
    return out


def _median(values):
    return float(np.median(values)) if len(values) else None


def simulate_network(net, params, reps, master_seed, index, max_steps=abm.MAX_STEPS,
                     scenarios=("spread", "survival")):
    """Run ``reps`` replicates per scenario; returns ``{scenario: [SimOutcome]}``.

    Replicate ``k`` of scenario ``s`` on grid cell ``index`` always uses seed
    ``derive_seed(master_seed, index, s, k)``.
    """
    out = {}
    for name in scenarios:
        sc = abm.Scenario(name)
        out[name] = [
            abm.run_scenario(sc, net, params, abm.derive_seed(master_seed, index, sc.code, k), max_steps)
            for k in range(reps)
        ]
    return out


def _one_target(job):
    index, target, net, reps, master_seed, params, max_steps, scenarios = job
    seed = abm.derive_seed(master_seed, index, 99)
    if net is None:
        try:
            net = synthesize(target, seed=seed)
        except Infeasible as exc:
            return index, None, str(exc)
    m = measure(net)
    outcomes = simulate_network(net, params, reps, master_seed, index, max_steps, scenarios)
    sp = outcomes.get("spread", [])
    su = outcomes.get("survival", [])
    rec = ExperimentRecord(
        net_id=net_id(target, seed) if target is not None else f"net_{index}",
        lam=m["lam"], ec_var=m["ec_var"], ec_skew=m["ec_skew"],
        mean_strength=m["mean_strength"], mean_clustering=m["mean_clustering"],
        mean_shortest_path=m["mean_shortest_path"], global_eff=m["global_eff"],
        local_eff=m["local_eff"],
        median_spread=_median([o.steps for o in sp]),
        spread_censored=sum(o.censored for o in sp),
        median_survival=_median([o.steps for o in su]),
        survival_censored=sum(o.censored for o in su),
        reps=reps, ec_mean=m["ec_mean"],
    )
    return index, (rec, net), None


def default_workers() -> int:
    return int(os.environ.get("NETMOMENTS_WORKERS", "1"))


def run_sweep(targets, reps, master_seed, params=None, max_steps=abm.MAX_STEPS, workers=None,
              networks=None, scenarios=("spread", "survival"), failures=None, keep_networks=None):
    """Synthesize, measure and simulate every target; records come back in target order.

    ``networks`` (same length as ``targets``) skips synthesis. Infeasible
    targets are logged, appended to ``failures`` as ``(index, target, message)``
    and left out of the result. If ``keep_networks`` is a dict it receives
    ``index -> network``.
    """
    params = params or abm.SimParams()
    workers = default_workers() if workers is None else workers
    if networks is None:
        networks = [None] * len(targets)
    jobs = [(i, t, networks[i], reps, master_seed, params, max_steps, tuple(scenarios))
            for i, t in enumerate(targets)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_target, jobs, chunksize=1))
    else:
        results = [_one_target(j) for j in jobs]
    records = []
    for index, payload, err in sorted(results, key=lambda r: r[0]):
        if payload is None:
            log.warning("target %d failed: %s", index, err)
            if failures is not None:
                failures.append((index, targets[index], err))
            continue
        rec, net = payload
        records.append(rec)
        if keep_networks is not None:
            keep_networks[index] = net
    return records


# -- CSV -------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(RECORD_COLUMNS + ("ec_mean",))
        for r in records:
            out.writerow([_fmt(v) for v in (
                r.net_id, r.lam, r.ec_var, r.ec_skew, r.mean_strength, r.mean_clustering,
                r.mean_shortest_path, r.global_eff, r.local_eff, r.median_spread,
                r.spread_censored, r.median_survival, r.survival_censored, r.reps, r.ec_mean)])


def read_records(path, n=6) -> list:
    """Parse a records CSV. A missing ``ec_mean`` column is rebuilt as ``sqrt(1/n - var)``."""
    def num(s):
        return None if s is None or s == "" else float(s)

    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise NetMomentsError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                var = float(row["ec_var"])
                mean = num(row.get("ec_mean")) if row.get("ec_mean") else math.sqrt(max(0.0, 1 / n - var))
                records.append(ExperimentRecord(
                    net_id=row["net_id"], lam=float(row["lambda"]), ec_var=var,
                    ec_skew=num(row["ec_skew"]), mean_strength=float(row["mean_strength"]),
                    mean_clustering=float(row["mean_clustering"]),
                    mean_shortest_path=float(row["mean_shortest_path"]),
                    global_eff=float(row["global_eff"]), local_eff=float(row["local_eff"]),
                    median_spread=num(row["median_spread"]),
                    spread_censored=int(float(row["spread_censored"] or 0)),
                    median_survival=num(row["median_survival"]),
                    survival_censored=int(float(row["survival_censored"] or 0)),
                    reps=int(float(row["reps"])), ec_mean=mean))
            except (TypeError, ValueError) as exc:
                raise NetMomentsError(f"{path} line {line}: {exc}") from None
    return records


# -- analysis ----------------------------------------------------------------

CORRELATION_VARS = ("lambda", "avg", "var", "skew", "mean_strength", "global_eff",
                    "mean_shortest_path", "local_eff", "mean_clustering")


def correlation_table(records, variables=CORRELATION_VARS):
    """Pairwise Spearman ``{(a, b): (rho, p)}`` over rows where both are defined."""
    rows = [r.row() for r in records]
    table = {}
    for a, b in combinations(variables, 2):
        pairs = [(r[a], r[b]) for r in rows if r[a] is not None and r[b] is not None]
        xs, ys = zip(*pairs) if pairs else ((), ())
        try:
            table[(a, b)] = spearman(xs, ys)
        except (ValueError, NetMomentsError):
            table[(a, b)] = (float("nan"), float("nan"))
    return table


def model_selection(records, scenario, log_response=False):
    """Fit the seven metric-subset models plus the extended model for ``scenario``.

    All models are fitted on the same rows (those with a defined skewness), so
    their AICs are comparable. The subset models are ranked by AIC with ΔAIC
    measured from the best of them; the extended model (``group="extended"``)
    reports ΔAIC against that same best, so it is negative when it improves.
    """
    rows = [r.row() for r in records if r.ec_skew is not None]
    fits = []
    for terms in TABLE3_MODELS:
        fits.append(_safe_fit(terms, rows, scenario, log_response, "base"))
    extended = _safe_fit(EXTENDED_MODELS[scenario], rows, scenario, log_response, "extended")
    ok = [f for f in fits if f.error is None]
    best = min((f.aic for f in ok), default=math.nan)
    for f in fits + [extended]:
        f.delta_aic = f.aic - best if f.error is None else math.nan
    ranked = sorted(ok, key=lambda f: f.aic) + [f for f in fits if f.error is not None]
    for rank, f in enumerate(ranked, start=1):
        f.rank = rank
    return ranked + [extended]


def _safe_fit(terms, rows, response, log_response, group):
    try:
        fit = ols_fit(terms, rows, response, log_response)
    except NetMomentsError as exc:
        return FitSummary(tuple(terms), np.array([]), math.nan, math.inf, 0, group=group, error=str(exc))
    fit.group = group
    return fit


def write_fits(fits_by_scenario, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("scenario", "terms", "r2", "aic", "delta_aic", "rank"))
        for scenario, fits in fits_by_scenario.items():
            for f in fits:
                out.writerow((scenario, f.label, _fmt(f.r2), _fmt(f.aic), _fmt(f.delta_aic),
                              "" if f.group == "extended" else f.rank))


def trend_curves(records, frac=0.67, robust_iters=0):
    """LOWESS ``{(metric, scenario): (x, yhat)}`` for median time against each metric."""
    curves = {}
    for metric in METRICS:
        for scenario in ("spread", "survival"):
            pts = [(r.row()[metric], r.row()[scenario]) for r in records]
            pts = [(x, y) for x, y in pts if x is not None and y is not None]
            if len(pts) < 3 or len({x for x, _ in pts}) < 2:
                continue
            xs, ys = map(np.array, zip(*pts))
            curves[(metric, scenario)] = lowess_curve(xs, ys, frac, robust_iters)
    return curves


def three_metric_r2(records, scenario, log_response=False):
    rows = [r.row() for r in records if r.ec_skew is not None]
    return ols_fit(METRICS, rows, scenario, log_response).r2


def censored_fraction(records, scenario) -> float:
    total = sum(r.reps for r in records)
    cens = sum(r.survival_censored if scenario == "survival" else r.spread_censored for r in records)
    return cens / total if total else 0.0


SENSITIVITY_COLUMNS = ("parameter", "direction", "value", "scenario", "delta_r2", "na_flag",
                       "censored_fraction")


@dataclass
class SensitivityRow:
    parameter: str
    direction: str
    value: float
    scenario: str
    delta_r2: float | None
    na_flag: bool
    censored_fraction: float


def sensitivity_sweep(base_params, targets, reps, master_seed, networks, base_records=None,
                      parameters=None, scenarios=("spread", "survival"), max_steps=abm.MAX_STEPS,
                      workers=None, perturbations=PERTURBATIONS, cells=None):
    """ΔR² of the three-metric model when each parameter moves to its -10% / +10% value.

    ``networks`` are the base sweep's networks (reused, not re-synthesized).
    A survival cell where more than half of all replicates hit the step cap
    is reported as NA. ``cells`` restricts the run to ``(parameter, direction)``
    pairs such as ``("mortality", "-")``.
    """
    if base_records is None:
        base_records = run_sweep(targets, reps, master_seed, base_params, max_steps, workers,
                                 networks=networks, scenarios=scenarios)
    base_r2 = {s: three_metric_r2(base_records, s) for s in scenarios}
    rows = []
    for name in parameters or list(perturbations):
        for direction, value in zip(("-", "+"), perturbations[name]):
            if cells is not None and (name, direction) not in cells:
                continue
            params = replace(base_params, **{name: value})
            recs = run_sweep(targets, reps, master_seed, params, max_steps, workers,
                             networks=networks, scenarios=scenarios)
            for s in scenarios:
                frac = censored_fraction(recs, s)
                na = s == "survival" and frac > 0.5
                delta = None
                if not na:
                    try:
                        delta = three_metric_r2(recs, s) - base_r2[s]
                    except NetMomentsError:
                        na = True
                rows.append(SensitivityRow(name, direction, float(value), s, delta, na, frac))
    return rows


def write_sensitivity(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(SENSITIVITY_COLUMNS)
        for r in rows:
            out.writerow((r.parameter, r.direction, _fmt(r.value), r.scenario,
                          "NA" if r.na_flag else _fmt(r.delta_r2), int(r.na_flag),
                          _fmt(r.censored_fraction)))


def read_sensitivity(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            na = d["na_flag"] == "1"
            delta = None if na or d["delta_r2"] in ("", "NA") else float(d["delta_r2"])
            rows.append(SensitivityRow(d["parameter"], d["direction"], float(d["value"]), d["scenario"],
                                       delta, na, float(d["censored_fraction"])))
    return rows
