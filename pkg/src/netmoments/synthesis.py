"""Build networks whose spectral radius and centrality moments hit a target.

The search follows a randomise-then-minimise loop: perturb one free edge
weight, run a box-constrained coordinate search on the scaled squared error,
repeat until every constrained metric is inside its tolerance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import _accel
from .eigen import ZERO_VAR, _power_iteration_loop, _power_iteration_numpy, ec_moments
from .errors import Infeasible, InvalidLevel, InvalidTarget
from .network import W_MAX, W_MIN, WeightedNetwork, from_upper, uniform_network

TOL_LAMBDA = 0.05
TOL_VAR = 1e-4
TOL_SKEW = 0.02
SKEW_PENALTY = 1e12


@dataclass(frozen=True)
class MetricTarget:
    n: int
    lam: float
    var: float
    skew: float | None = None
    bounds: tuple = (W_MIN, W_MAX)
    tol_lam: float = TOL_LAMBDA
    tol_var: float = TOL_VAR
    tol_skew: float = TOL_SKEW

    def __post_init__(self):
        problem = self.problem()
        if problem:
            raise InvalidTarget(problem)

    def problem(self) -> str | None:
        n = self.n
        lo, hi = self.bounds
        if n < 2:
            return f"n={n} < 2"
        if not lo <= hi:
            return f"bad bounds {self.bounds}"
        if not (n - 1) * lo <= self.lam <= (n - 1) * hi:
            return f"lambda {self.lam} outside [{(n - 1) * lo}, {(n - 1) * hi}]"
        if not 0 <= self.var < 1 / n:
            return f"variance {self.var} outside [0, 1/{n})"
        if self.var == 0 and self.skew is not None:
            return "zero-variance target cannot constrain skewness"
        if self.skew is not None and n > 2:
            # sharp bound on the skewness of n points
            cap = (n - 2) / math.sqrt(n - 1)
            if abs(self.skew) > cap + self.tol_skew:
                return f"|skew| {abs(self.skew)} exceeds {cap:.4f} for n={n}"
        return None

    @property
    def n_constrained(self) -> int:
        return 2 if self.skew is None else 3

    def label(self) -> str:
        s = "free" if self.skew is None else f"{self.skew:g}"
        return f"L{self.lam:g}_V{self.var:g}_S{s}"


# -- objective -----------------------------------------------------------

def _metrics(u, n, iu, use_numba):
    w = np.zeros((n, n))
    w[iu] = u
    w.T[iu] = u
    kernel = _power_iteration_loop if use_numba else _power_iteration_numpy
    lam, v, _, ok = kernel(w, 1e-12, 200_000)
    v = np.abs(v)
    v = v / np.sqrt(np.sum(v * v))
    mean, var, skew = ec_moments(v)
    return lam, var, skew


def _score(lam, var, skew, target: MetricTarget) -> float:
    f = ((lam - target.lam) / target.tol_lam) ** 2 + ((var - target.var) / target.tol_var) ** 2
    if target.skew is not None:
        if skew is None:
            return f + SKEW_PENALTY
        f += ((skew - target.skew) / target.tol_skew) ** 2
    return f


def _within(lam, var, skew, target: MetricTarget) -> bool:
    if abs(lam - target.lam) > target.tol_lam or abs(var - target.var) > target.tol_var:
        return False
    if target.skew is None:
        return True
    return skew is not None and abs(skew - target.skew) <= target.tol_skew


def objective(candidate: WeightedNetwork, target: MetricTarget) -> float:
    """Tolerance-scaled sum of squared metric errors.

    Each term is ``((metric - target) / tol) ** 2``, so a value at or below the
    number of constrained metrics is necessary for acceptance. A candidate with
    (near) zero centrality variance scores ``1e12`` against a skew target.
    """
    n = candidate.n
    u = candidate.upper()
    lam, var, skew = _metrics(u, n, np.triu_indices(n, 1), _accel.USE_NUMBA)
    return _score(lam, var, skew, target)


# -- search --------------------------------------------------------------

def coordinate_search(fun, x0, lo, hi, rng, max_evals=2000, min_step=1e-10, stop=None):
    """Adaptive coordinate descent on a box.

    Each coordinate keeps its own step: a successful move doubles it, a
    failed +/- probe halves it. Coordinates are visited in a fresh random
    order every sweep. Returns ``(x, fx, evals)``.
    """
    x = np.clip(np.array(x0, dtype=np.float64), lo, hi)
    fx = fun(x)
    evals = 1
    span = hi - lo
    steps = np.full(x.size, 0.25 * span)
    while evals < max_evals and steps.max() > min_step:
        if stop is not None and stop(x, fx):
            break
        for i in rng.permutation(x.size):
            moved = False
            for sign in (1.0, -1.0):
                xi = min(hi, max(lo, x[i] + sign * steps[i]))
                if xi == x[i]:
                    continue
                old = x[i]
                x[i] = xi
                f_new = fun(x)
                evals += 1
                if f_new < fx:
                    fx = f_new
                    moved = True
                    break
                x[i] = old
            steps[i] = min(span, steps[i] * 2.0) if moved else steps[i] * 0.5
            if evals >= max_evals:
                break
    return x, fx, evals


def _rescale(u, lam, target, lo, hi):
    # lambda is 1-homogeneous in the weights; moments are scale-free
    return np.clip(u * (target.lam / lam), lo, hi)


def synthesize(
    target: MetricTarget,
    seed: int = 0,
    max_outer_iters: int = 500,
    max_evals: int = 2000,
    patience: int = 150,
) -> WeightedNetwork:
    """Search for a network meeting ``target``; raise :class:`Infeasible` otherwise.

    ``patience`` ends the run early after that many outer rounds without
    improving the best objective value.
    """
    n = target.n
    lo, hi = (float(b) for b in target.bounds)
    if target.var == 0 and target.skew is None:
        w = target.lam / (n - 1)
        if lo <= w <= hi:
            return uniform_network(n, w, (lo, hi))
    iu = np.triu_indices(n, 1)
    use_numba = _accel.USE_NUMBA
    rng = np.random.default_rng(seed)

    def measure(u):
        return _metrics(u, n, iu, use_numba)

    def fun(u):
        return _score(*measure(u), target)

    def done(u, fu):
        return fu <= target.n_constrained and _within(*measure(u), target)

    def repaired(u):
        return _rescale(u, measure(u)[0], target, lo, hi)

    def fun_r(u):
        return fun(repaired(u))

    x = rng.uniform(lo, hi, iu[0].size)
    best = repaired(x)
    best_f = fun(best)
    stale = 0
    for outer in range(1, max_outer_iters + 1):
        if outer > 1:
            x = best.copy()
            k = rng.integers(x.size)
            x[k] = rng.uniform(lo, hi)
        x, _, _ = coordinate_search(fun_r, x, lo, hi, rng, max_evals=max_evals,
                                    stop=lambda u, fu: done(repaired(u), fu))
        cand = repaired(x)
        # polish on the raw weights: clipping can leave lambda short
        cand, fc, _ = coordinate_search(fun, cand, lo, hi, rng, max_evals=max_evals // 4, stop=done)
        if fc < best_f:
            best, best_f, stale = cand.copy(), fc, 0
        else:
            stale += 1
        if _within(*measure(best), target):
            return from_upper(best, n, lo, hi)
        if stale >= patience:
            break
    lam, var, skew = measure(best)
    residuals = {
        "lambda": lam - target.lam,
        "var": var - target.var,
        "skew": None if target.skew is None or skew is None else skew - target.skew,
    }
    raise Infeasible(
        f"no network within tolerance for {target.label()} after {outer} rounds",
        best=from_upper(best, n, lo, hi),
        residuals=residuals,
        iterations=outer,
    )


# -- grids ---------------------------------------------------------------

@dataclass
class GridSpec:
    lambda_levels: list
    var_levels_per_lambda: list
    skew_levels: list
    n: int = 6
    bounds: tuple = (W_MIN, W_MAX)

    def skew_list(self, li: int, vi: int) -> list:
        s = self.skew_levels
        if s and isinstance(s[0], list):
            return list(s[li][vi])
        return list(s)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            lambda_levels=[float(x) for x in d["lambda_levels"]],
            var_levels_per_lambda=[[float(v) for v in row] for row in d["var_levels_per_lambda"]],
            skew_levels=d.get("skew_levels", []),
            n=int(d.get("n", 6)),
            bounds=tuple(float(b) for b in d.get("bounds", (W_MIN, W_MAX))),
        )

    def to_dict(self) -> dict:
        return {
            "lambda_levels": list(self.lambda_levels),
            "var_levels_per_lambda": [list(r) for r in self.var_levels_per_lambda],
            "skew_levels": self.skew_levels,
            "bounds": list(self.bounds),
            "n": self.n,
        }

    @classmethod
    def load(cls, path) -> "GridSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def grid_targets(spec: GridSpec, **tolerances) -> list:
    """Expand a grid into targets, lambda-major then variance then skew.

    A zero-variance level yields a single skew-free target.
    """
    if len(spec.var_levels_per_lambda) != len(spec.lambda_levels):
        raise InvalidLevel("need one variance list per lambda level")
    out = []
    for li, lam in enumerate(spec.lambda_levels):
        for vi, var in enumerate(spec.var_levels_per_lambda[li]):
            skews = [None] if var == 0 else (spec.skew_list(li, vi) or [None])
            for skew in skews:
                try:
                    out.append(MetricTarget(spec.n, lam, var, skew, tuple(spec.bounds), **tolerances))
                except InvalidTarget as exc:
                    raise InvalidLevel(f"lambda={lam}, var={var}, skew={skew}: {exc}") from None
    return out


def default_grid() -> GridSpec:
    """The bundled 107-target grid for 6-node networks on [1, 20] km."""
    text = resources.files("netmoments").joinpath("default_grid.json").read_text()
    return GridSpec.from_dict(json.loads(text))


def _extreme(n, objective_terms, lo, hi, seed, rounds):
    # minimise a penalised score from several random starts
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    best, best_f = None, np.inf
    for _ in range(rounds):
        x = rng.uniform(lo, hi, iu[0].size)
        x, fx, _ = coordinate_search(lambda u: objective_terms(_metrics(u, n, iu, _accel.USE_NUMBA)),
                                     x, lo, hi, rng, max_evals=20000)
        if fx < best_f:
            best, best_f = x, fx
    return _metrics(best, n, iu, _accel.USE_NUMBA)


def max_variance(n, lam, bounds=(W_MIN, W_MAX), seed=0, rounds=8):
    """Largest centrality variance found at spectral radius ``lam``."""
    lo, hi = bounds

    def score(m):
        l, v, _ = m
        return ((l - lam) / 0.01) ** 2 - v / 1e-5

    return _extreme(n, score, lo, hi, seed, rounds)[1]


def skew_range(n, lam, var, bounds=(W_MIN, W_MAX), seed=0, rounds=8):
    """Smallest and largest centrality skewness found at ``(lam, var)``."""
    lo, hi = bounds
    out = []
    for sign in (1.0, -1.0):
        def score(m, sign=sign):
            l, v, s = m
            if s is None:
                return SKEW_PENALTY
            return ((l - lam) / 0.01) ** 2 + ((v - var) / 2e-5) ** 2 + sign * s / 1e-3
        out.append(_extreme(n, score, lo, hi, seed, rounds)[2])
    return out[0], out[1]


def build_default_grid(n=6, bounds=(W_MIN, W_MAX), seed=0, shrink=0.9):
    """Recompute the bundled grid.

    Interior lambda levels get variance levels evenly spaced on
    ``[0, 0.8 * max variance]`` and skew levels evenly spaced across the
    reachable skew interval (pulled in by ``shrink``). The two extreme lambda
    levels only admit the uniform network.
    """
    lo, hi = bounds
    interior = [20.0, 35.0, 50.0, 65.0, 80.0]
    lambdas = [(n - 1) * lo] + interior + [(n - 1) * hi]
    var_levels, skew_levels = [], []
    for li, lam in enumerate(lambdas):
        if lam in interior:
            vmax = max_variance(n, lam, bounds, seed=seed + li)
            levels = [float(x) for x in np.round(np.linspace(0.0, 0.8 * vmax, 5), 6)]
        else:
            levels = [0.0]
        var_levels.append(levels)
        row = []
        for vi, var in enumerate(levels):
            if var == 0:
                row.append([])
                continue
            smin, smax = skew_range(n, lam, var, bounds, seed=seed + 100 * li + vi)
            mid = 0.5 * (smin + smax)
            half = 0.5 * shrink * (smax - smin)
            row.append([float(x) for x in np.round(np.linspace(mid - half, mid + half, 5), 4)])
        skew_levels.append(row)
    return GridSpec(lambdas, var_levels, skew_levels, n, tuple(bounds))
