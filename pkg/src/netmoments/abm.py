"""Stochastic single-species metapopulation on a weighted complete network.

Agents are interchangeable, so the state is a vector of per-node counts. One
time step runs, in order: density freeze, mortality, reproduction (frozen
density), dispersal, occupancy update. Newborns do not disperse in their
birth step. A disperser picks one of the other ``n - 1`` nodes uniformly and
arrives if its exponential dispersal-ability draw (mean ``mean_dispersal``)
covers the corridor length; otherwise it dies. An arrival also dies when the
target already holds ``capacity`` live agents.

Two run paths exist: per-node binomial aggregation (default) and per-agent
Bernoulli draws (reference). Both have a numba kernel; with numba disabled
the binomial path runs on a vectorised ``numpy.random.Generator`` loop.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import _accel
from .network import WeightedNetwork

MAX_STEPS = 100_000


class Scenario(str, enum.Enum):
    SPREAD = "spread"
    SURVIVAL = "survival"

    @property
    def code(self) -> int:
        return 0 if self is Scenario.SPREAD else 1


@dataclass(frozen=True)
class SimParams:
    initial_agents: int = 150
    growth_rate: float = 0.74
    litter_size: int = 3
    mortality: float = 0.4
    dispersal_threshold: float = 0.9
    mean_dispersal: float = 2.0
    capacity: int | tuple = 150
    # "reach": arrive iff ability >= distance; "below": literal Exp(M) < W
    dispersal_rule: str = "reach"

    def __post_init__(self):
        if not 0.0 <= self.mortality <= 1.0:
            raise ValueError(f"mortality {self.mortality} not in [0, 1]")
        if not 0.0 < self.dispersal_threshold <= 1.0:
            raise ValueError(f"dispersal_threshold {self.dispersal_threshold} not in (0, 1]")
        if int(self.litter_size) != self.litter_size or self.litter_size < 0:
            raise ValueError(f"litter_size must be a nonnegative integer, got {self.litter_size}")
        if int(self.initial_agents) != self.initial_agents or self.initial_agents < 0:
            raise ValueError(f"initial_agents must be a nonnegative integer, got {self.initial_agents}")
        if self.mean_dispersal <= 0:
            raise ValueError("mean_dispersal must be positive")
        if self.growth_rate < 0:
            raise ValueError("growth_rate must be nonnegative")
        caps = np.atleast_1d(np.asarray(self.capacity))
        if np.any(caps < 1) or np.any(caps != np.round(caps)):
            raise ValueError("capacities must be integers >= 1")
        if self.dispersal_rule not in ("reach", "below"):
            raise ValueError(f"unknown dispersal_rule {self.dispersal_rule!r}")

    def capacities(self, n: int) -> np.ndarray:
        caps = np.atleast_1d(np.asarray(self.capacity, dtype=np.int64))
        if caps.size == 1:
            return np.full(n, int(caps[0]), dtype=np.int64)
        if caps.size != n:
            raise ValueError(f"{caps.size} capacities for {n} nodes")
        return caps.copy()

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        if isinstance(d["capacity"], tuple):
            d["capacity"] = list(d["capacity"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimParams":
        d = dict(d)
        if isinstance(d.get("capacity"), list):
            d["capacity"] = tuple(d["capacity"])
        return cls(**d)


@dataclass(frozen=True)
class SimState:
    counts: np.ndarray
    frozen_density: np.ndarray
    ever_occupied: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class SimOutcome:
    scenario: Scenario
    steps: int
    censored: bool
    seed: int


def birth_probability(density, growth_rate):
    return np.maximum(0.0, 1.0 - np.exp(-growth_rate * (1.0 - density)))


def dispersal_probability(density, threshold):
    return np.where(density < threshold, density / threshold, 1.0)


def arrival_probability(distance, mean_dispersal, rule="reach"):
    """Chance that one disperser completes a corridor of length ``distance``."""
    p = np.exp(-np.asarray(distance, dtype=np.float64) / mean_dispersal)
    return p if rule == "reach" else 1.0 - p


def derive_seed(*keys) -> int:
    """32-bit seed from an integer key tuple, e.g. ``(master, target, scenario, rep)``."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint32)[0])


def _route_matrix(net: WeightedNetwork, params: SimParams) -> np.ndarray:
    # probability that one disperser from i ends up alive at j
    n = net.n
    p = arrival_probability(net.weights, params.mean_dispersal, params.dispersal_rule) / (n - 1)
    np.fill_diagonal(p, 0.0)
    return p


def initialize(scenario, net: WeightedNetwork, params: SimParams, seed: int) -> SimState:
    scenario = Scenario(scenario)
    n = net.n
    counts = np.zeros(n, dtype=np.int64)
    if scenario is Scenario.SPREAD:
        # first draw of the run's stream, shared by every run path
        counts[_seed_node(seed, n)] = params.initial_agents
    else:
        counts[:] = params.initial_agents
    return SimState(counts, np.zeros(n), counts > 0, 0)


def _seed_node(seed: int, n: int) -> int:
    return int(np.random.default_rng([seed, 1]).integers(n))


def step(state: SimState, net: WeightedNetwork, params: SimParams, rng: np.random.Generator) -> SimState:
    """Advance one time step using binomial aggregation. Returns a new state."""
    caps = params.capacities(net.n)
    x = state.counts.copy()
    density = x / caps
    x = _advance(x, density, caps, _route_matrix(net, params), params, rng)
    return SimState(x, density, state.ever_occupied | (x > 0), state.t + 1)


def _advance(x, density, caps, route, params, rng):
    n = x.size
    x = x - rng.binomial(x, params.mortality)
    births = params.litter_size * rng.binomial(x, birth_probability(density, params.growth_rate))
    leaving = rng.binomial(x, dispersal_probability(density, params.dispersal_threshold))
    x = x - leaving
    pvals = np.empty((n, n + 1))
    pvals[:, :n] = route
    pvals[:, n] = np.maximum(0.0, 1.0 - route.sum(axis=1))
    arrivals = rng.multinomial(leaving, pvals)[:, :n].sum(axis=0)
    x = x + births
    return x + np.minimum(arrivals, np.maximum(caps - x, 0))


def _finished(code, x, occupied):
    if code == 0:
        return occupied.all()
    return x.sum() == 0


def _run_numpy(code, net, params, seed, max_steps, trace=None):
    caps = params.capacities(net.n)
    route = _route_matrix(net, params)
    x = initialize(Scenario.SPREAD if code == 0 else Scenario.SURVIVAL, net, params, seed).counts
    occupied = x > 0
    rng = np.random.default_rng(seed)
    if trace is not None:
        trace.append((0, x.copy()))
    for t in range(1, max_steps + 1):
        x = _advance(x, x / caps, caps, route, params, rng)
        occupied |= x > 0
        if trace is not None:
            trace.append((t, x.copy()))
        if _finished(code, x, occupied):
            return t, False
        if code == 0 and x.sum() == 0:
            # extinct before full occupation: can never finish
            return max_steps, True
    return max_steps, True


@_accel.njit
def _run_binomial_kernel(code, route, caps, x, seed, max_steps, mortality, growth_rate, litter,
                         threshold):
    np.random.seed(seed)
    n = x.size
    occupied = x > 0
    density = np.zeros(n)
    births = np.zeros(n, np.int64)
    arrivals = np.zeros(n, np.int64)
    for t in range(1, max_steps + 1):
        for i in range(n):
            density[i] = x[i] / caps[i]
        for i in range(n):
            if x[i] > 0:
                x[i] -= np.random.binomial(x[i], mortality)
        for i in range(n):
            births[i] = 0
            pb = 1.0 - np.exp(-growth_rate * (1.0 - density[i]))
            if x[i] > 0 and pb > 0.0:
                births[i] = litter * np.random.binomial(x[i], pb)
        arrivals[:] = 0
        for i in range(n):
            if x[i] == 0:
                continue
            pd = density[i] / threshold if density[i] < threshold else 1.0
            leaving = np.random.binomial(x[i], pd)
            x[i] -= leaving
            rest = leaving
            mass = 1.0
            for j in range(n):
                if rest == 0 or mass <= 0.0:
                    break
                if j == i:
                    continue
                p = route[i, j] / mass
                k = np.random.binomial(rest, min(1.0, p))
                arrivals[j] += k
                rest -= k
                mass -= route[i, j]
        total = 0
        for i in range(n):
            x[i] += births[i]
            room = caps[i] - x[i]
            if room > 0:
                x[i] += min(arrivals[i], room)
            if x[i] > 0:
                occupied[i] = True
            total += x[i]
        if code == 0:
            if occupied.all():
                return t, False
            if total == 0:
                return max_steps, True
        elif total == 0:
            return t, False
    return max_steps, True


@_accel.njit
def _run_agents_kernel(code, weights, caps, x, seed, max_steps, mortality, growth_rate, litter,
                       threshold, mean_dispersal, reach):
    np.random.seed(seed)
    n = x.size
    occupied = x > 0
    density = np.zeros(n)
    for t in range(1, max_steps + 1):
        for i in range(n):
            density[i] = x[i] / caps[i]
        # mortality, then reproduction by survivors
        born = np.zeros(n, np.int64)
        for i in range(n):
            alive = 0
            for _ in range(x[i]):
                if np.random.random() >= mortality:
                    alive += 1
            x[i] = alive
            pb = 1.0 - np.exp(-growth_rate * (1.0 - density[i]))
            for _ in range(alive):
                if np.random.random() < pb:
                    born[i] += litter
        # departures are simultaneous; arrivals then join one at a time
        src = np.empty(x.sum(), np.int64)
        dst = np.empty(x.sum(), np.int64)
        m = 0
        for i in range(n):
            pd = density[i] / threshold if density[i] < threshold else 1.0
            stay = 0
            for _ in range(x[i]):
                if np.random.random() < pd:
                    j = np.random.randint(n - 1)
                    if j >= i:
                        j += 1
                    src[m] = i
                    dst[m] = j
                    m += 1
                else:
                    stay += 1
            x[i] = stay
        for i in range(n):
            x[i] += born[i]
        for a in range(m):
            ability = np.random.exponential(mean_dispersal)
            w = weights[src[a], dst[a]]
            ok = ability >= w if reach else ability < w
            j = dst[a]
            if ok and x[j] < caps[j]:
                x[j] += 1
        total = 0
        for i in range(n):
            if x[i] > 0:
                occupied[i] = True
            total += x[i]
        if code == 0:
            if occupied.all():
                return t, False
            if total == 0:
                return max_steps, True
        elif total == 0:
            return t, False
    return max_steps, True


def run_scenario(scenario, net: WeightedNetwork, params: SimParams, seed: int,
                 max_steps: int = MAX_STEPS, method: str = "binomial", trace=None) -> SimOutcome:
    """Run one replicate until its stop condition or ``max_steps``.

    Spread stops once every node has been occupied at least once; survival
    stops at global extinction. A spread run whose population dies out first
    is censored immediately (it can no longer finish). ``method="agents"``
    uses per-agent draws. Passing a list as ``trace`` records ``(t, counts)``
    per step and forces the numpy path.
    """
    scenario = Scenario(scenario)
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    code = scenario.code
    if trace is not None or (method == "binomial" and not _accel.USE_NUMBA):
        steps, censored = _run_numpy(code, net, params, seed, max_steps, trace)
        return SimOutcome(scenario, int(steps), bool(censored), seed)
    caps = params.capacities(net.n)
    x = initialize(scenario, net, params, seed).counts
    common = (params.mortality, params.growth_rate, int(params.litter_size), params.dispersal_threshold)
    kseed = derive_seed(seed, 2)
    if method == "binomial":
        route = np.ascontiguousarray(_route_matrix(net, params))
        steps, censored = _run_binomial_kernel(code, route, caps, x, kseed, max_steps, *common)
    elif method == "agents":
        steps, censored = _run_agents_kernel(code, np.ascontiguousarray(net.weights), caps, x, kseed,
                                             max_steps, *common, params.mean_dispersal,
                                             params.dispersal_rule == "reach")
    else:
        raise ValueError(f"unknown method {method!r}")
    return SimOutcome(scenario, int(steps), bool(censored), seed)
