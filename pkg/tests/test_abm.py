import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from netmoments import abm
from netmoments.abm import Scenario, SimParams, run_scenario
from netmoments.network import from_upper, uniform_network

NET4 = from_upper([3.0, 7.0, 12.0, 2.0, 9.0, 15.0], 4)


def test_initialize_survival():
    s = abm.initialize("survival", uniform_network(6, 5), SimParams(), 1)
    np.testing.assert_array_equal(s.counts, [150] * 6)
    assert s.ever_occupied.all() and s.t == 0


def test_initialize_spread():
    s = abm.initialize("spread", uniform_network(6, 5), SimParams(), 1)
    assert s.counts.sum() == 150 and np.count_nonzero(s.counts) == 1
    np.testing.assert_array_equal(s.ever_occupied, s.counts > 0)


def test_initialize_deterministic_and_uniform_choice():
    net = uniform_network(6, 5)
    a = abm.initialize("spread", net, SimParams(), 42)
    b = abm.initialize("spread", net, SimParams(), 42)
    np.testing.assert_array_equal(a.counts, b.counts)
    picks = [int(np.argmax(abm.initialize("spread", net, SimParams(), s).counts)) for s in range(3000)]
    assert sps.chisquare(np.bincount(picks, minlength=6)).pvalue > 0.001


def test_birth_probability():
    assert abm.birth_probability(0.0, 0.74) == pytest.approx(1 - math.exp(-0.74))
    assert abm.birth_probability(0.0, 0.74) == pytest.approx(0.5229, abs=1e-4)
    assert abm.birth_probability(1.2, 0.74) == 0.0


def test_dispersal_probability():
    assert abm.dispersal_probability(0.9, 0.9) == 1.0
    assert abm.dispersal_probability(0.45, 0.9) == pytest.approx(0.5)
    assert abm.dispersal_probability(1.3, 0.9) == 1.0


def test_arrival_probability():
    assert abm.arrival_probability(4.0, 2.0, "below") == pytest.approx(1 - math.exp(-2))
    assert abm.arrival_probability(4.0, 2.0, "below") == pytest.approx(0.8647, abs=1e-4)
    assert abm.arrival_probability(4.0, 2.0) == pytest.approx(math.exp(-2))


def test_step_total_mortality():
    net = uniform_network(6, 5)
    s = abm.initialize("survival", net, SimParams(mortality=1.0), 0)
    out = abm.step(s, net, SimParams(mortality=1.0), np.random.default_rng(0))
    assert out.counts.sum() == 0 and out.t == 1
    np.testing.assert_allclose(out.frozen_density, 1.0)


@given(st.lists(st.integers(0, 300), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_step_bounds(counts, seed):
    net = from_upper([2.0, 5.0, 9.0], 3)
    p = SimParams()
    x = np.array(counts, dtype=np.int64)
    s = abm.SimState(x, np.zeros(3), x > 0, 0)
    out = abm.step(s, net, p, np.random.default_rng(seed))
    assert (out.counts >= 0).all()
    assert out.counts.sum() <= x.sum() * (1 + p.litter_size)
    assert (out.ever_occupied >= s.ever_occupied).all()


def test_survival_certain_death():
    o = run_scenario("survival", uniform_network(6, 5), SimParams(mortality=1.0), 3)
    assert o.steps == 1 and not o.censored


def test_spread_extinction_censors():
    o = run_scenario("spread", uniform_network(6, 5), SimParams(mortality=1.0), 3, max_steps=500)
    assert o.steps == 500 and o.censored


def test_censored_hits_cap():
    o = run_scenario("survival", uniform_network(6, 2), SimParams(), 3, max_steps=50)
    assert o.censored and o.steps == 50


@pytest.mark.parametrize("method", ["binomial", "agents"])
@pytest.mark.parametrize("scenario", ["spread", "survival"])
def test_deterministic(method, scenario):
    a = run_scenario(scenario, NET4, SimParams(), 123, method=method)
    b = run_scenario(scenario, NET4, SimParams(), 123, method=method)
    assert a == b and a.seed == 123 and a.scenario is Scenario(scenario)


@pytest.mark.parametrize("rule", ["reach", "below"])
@pytest.mark.parametrize("method", ["binomial", "agents"])
def test_two_node_colonization_probability(rule, method):
    # q=0 and N=K: every agent leaves in step 1 and none are born there, so
    # the second node is reached in step 1 iff at least one of N moves succeeds
    n_agents, w, m = 5, 4.0, 2.0
    params = SimParams(initial_agents=n_agents, capacity=n_agents, mortality=0.0,
                       mean_dispersal=m, dispersal_rule=rule)
    net = from_upper([w], 2)
    reps = 10_000
    outcomes = [run_scenario("spread", net, params, k, max_steps=1, method=method) for k in range(reps)]
    hits = sum(not o.censored for o in outcomes)
    p = abm.arrival_probability(w, m, rule)
    expected = 1 - (1 - p) ** n_agents
    sd = math.sqrt(expected * (1 - expected) / reps)
    assert abs(hits / reps - expected) < 4 * sd


def test_mortality_monotone():
    net = uniform_network(6, 12)
    med = {}
    for q in (0.4, 0.9):
        p = SimParams(mortality=q)
        med[q] = np.median([run_scenario("survival", net, p, k, max_steps=2000).steps for k in range(200)])
    assert med[0.9] <= med[0.4]


def test_numpy_path_matches_kernel():
    params = replace(SimParams(), mortality=0.6, initial_agents=40, capacity=40)
    net = from_upper([3.0], 2)
    fast = [run_scenario("survival", net, params, k, max_steps=5000).steps for k in range(3000)]
    slow = [abm._run_numpy(1, net, params, k, 5000)[0] for k in range(3000)]
    assert sps.ks_2samp(fast, slow).pvalue > 0.01


def test_trace_records_every_step():
    trace = []
    o = run_scenario("survival", uniform_network(4, 12), SimParams(mortality=0.7), 5, max_steps=300, trace=trace)
    assert [t for t, _ in trace] == list(range(o.steps + 1))
    assert trace[-1][1].sum() == 0 or o.censored
    np.testing.assert_array_equal(trace[0][1], [150] * 4)


def test_per_node_capacities():
    p = SimParams(capacity=(100, 150, 200))
    np.testing.assert_array_equal(p.capacities(3), [100, 150, 200])
    with pytest.raises(ValueError):
        p.capacities(4)


@pytest.mark.parametrize(
    "kwargs",
    [dict(mortality=1.2), dict(dispersal_threshold=0.0), dict(litter_size=2.5), dict(capacity=0),
     dict(mean_dispersal=0), dict(dispersal_rule="teleport"), dict(initial_agents=-1)],
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        SimParams(**kwargs)


def test_params_dict_roundtrip():
    p = SimParams(capacity=(100, 120), mortality=0.5)
    assert SimParams.from_dict(p.to_dict()) == p


def test_derive_seed_stable():
    assert abm.derive_seed(1, 2, 3) == abm.derive_seed(1, 2, 3)
    assert abm.derive_seed(1, 2, 3) != abm.derive_seed(1, 2, 4)
    assert 0 <= abm.derive_seed(7) < 2**32


def test_max_steps_validation():
    with pytest.raises(ValueError):
        run_scenario("spread", NET4, SimParams(), 0, max_steps=0)
