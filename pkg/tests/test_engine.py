import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from percolab.engine import (
    InfectionState,
    Rule,
    closure,
    closure_batch,
    count_percolating,
    coupled_thresholds,
    empty_state,
    full_state,
    initial_batch,
    neighbour_counts,
    parse_rule,
    percolate_batch,
    percolates,
    sample_initial,
    state_from,
    step,
)
from percolab.errors import DomainMismatch, InvalidSpec, RoundBudgetExceeded
from percolab.graphs import make_graph


def test_rule_syntax():
    assert str(parse_rule("majority")) == "majority"
    assert parse_rule("rneib:r=3") == Rule.rneighbour(3)
    assert parse_rule("boot:k=3,gscale=1.0") == Rule.boot(3, 1.0)
    assert parse_rule("boot") == Rule.boot()
    assert parse_rule(str(Rule.boot(2, 0.25))) == Rule.boot(2, 0.25)
    for bad in ("major", "rneib", "rneib:r=x", "boot:k=3,g=1", "majority:r=1", "boot:gscale=-1"):
        with pytest.raises(InvalidSpec):
            parse_rule(bad)


def test_majority_need_counts_ties():
    need = Rule.majority().need(np.array([1, 2, 3, 4, 12]))
    assert need.tolist() == [1, 1, 2, 2, 6]


def test_boot_need_literal():
    rule = Rule.boot(3, 1.0)
    d = 20
    gamma = math.sqrt(d / math.log(d))
    for ell in range(5):
        theta = d / 2 - max(0, 3 - ell) * gamma
        assert rule.need(np.array([d]), ell)[0] == max(0, math.ceil(theta))
    # small degrees: gamma is zero below 2
    assert rule.gamma(np.array([0, 1]))[:].tolist() == [0.0, 0.0]


def test_step_examples():
    g = make_graph("hypercube:n=2")
    s = state_from(g, [0, 1])
    nxt = step(g, s, Rule.majority())
    assert nxt.infected.all() and nxt.round == 1 and nxt.newly_infected_per_round == (2,)
    assert not step(g, empty_state(g), Rule.majority()).infected.any()
    h = make_graph("hypercube:n=3")
    s = state_from(h, h.neighbors(0))
    assert 0 in step(h, s, Rule.majority())


def test_closure_examples():
    g = make_graph("hypercube:n=2")
    tr = closure(g, empty_state(g), Rule.majority())
    assert tr.rounds_to_stabilise == 0 and not tr.percolated
    tr = closure(g, full_state(g), Rule.majority())
    assert tr.rounds_to_stabilise == 0 and tr.percolated
    tr = closure(g, state_from(g, [0, 1]), Rule.majority())
    assert tr.percolated and tr.rounds_to_stabilise == 1
    assert tr.to_json()["sizes"] == [2, 4]
    for v in g.vertices():
        assert percolates(g, state_from(g, [v]), Rule.rneighbour(1))
    assert percolates(g, full_state(g), Rule.majority())
    assert not percolates(g, empty_state(g), Rule.majority())


def test_round_budget_and_domain():
    g = make_graph("hypercube:n=2")
    with pytest.raises(RoundBudgetExceeded):
        closure(g, state_from(g, [0]), Rule.rneighbour(1), max_rounds=1)
    with pytest.raises(InvalidSpec):
        closure(g, state_from(g, [0]), Rule.rneighbour(1), max_rounds=0)
    h = make_graph("hypercube:n=3")
    with pytest.raises(DomainMismatch):
        step(h, state_from(g, [0]), Rule.majority())


def _oracle_need(rule, adj):
    def need(v, ell):
        return int(rule.need(np.array([len(adj[v])]), ell)[0])

    return need


@pytest.mark.parametrize("rule", [Rule.majority(), Rule.rneighbour(2), Rule.boot(3, 0.5), Rule.boot(2, 1.0)])
def test_closure_matches_python_oracle(rule):
    g = make_graph("hypercube:n=6")
    adj = oracles.cube_adj(6)
    for trial in range(20):
        A0 = sample_initial(g, 0.3, seed=11, trial=trial)
        tr = closure(g, A0, rule, record=True)
        ref = oracles.sync_rounds(adj, A0.vertices(), _oracle_need(rule, adj))
        assert len(tr.history) == len(ref)
        for got, want in zip(tr.history, ref):
            assert set(np.flatnonzero(got)) == set(want)
        final, rounds = closure_batch(g, rule, A0.infected[None, :])
        assert np.array_equal(final[0], tr.final.infected) and rounds[0] == tr.rounds_to_stabilise


def test_neighbour_counts_batched():
    g = make_graph("stars:n=3,q=2")
    a = initial_batch(g, 0.5, 3, 0, 4)
    c = neighbour_counts(g, a)
    for t in range(4):
        for i, v in enumerate(g.vertices()):
            assert c[t, i] == sum(a[t, g.index_of(w)] for w in g.neighbors(v))


def test_domination_and_degeneration():
    g = make_graph("hypercube:n=8")
    for trial in range(30):
        A0 = sample_initial(g, 0.25, 5, trial)
        maj = closure(g, A0, Rule.majority(), record=True)
        boot = closure(g, A0, Rule.boot(3, 1.0), record=True)
        zero = closure(g, A0, Rule.boot(3, 0.0), record=True)
        for i in range(max(len(maj.history), len(boot.history))):
            assert not (maj.state_at(i) & ~boot.state_at(i)).any()
        assert len(zero.history) == len(maj.history)
        assert all(np.array_equal(a, b) for a, b in zip(zero.history, maj.history))


def test_fixed_point_idempotent():
    g = make_graph("permutahedron:n=3")
    for trial in range(10):
        tr = closure(g, sample_initial(g, 0.4, 2, trial), Rule.majority())
        assert np.array_equal(step(g, tr.final, Rule.majority()).infected, tr.final.infected)


@given(st.integers(0, 2**32), st.floats(0.05, 0.6), st.floats(0.0, 0.3))
@settings(max_examples=40, deadline=None)
def test_monotone_in_initial_set(seed, p, extra):
    g = make_graph("hypercube:n=8")
    a = initial_batch(g, p, seed, 0, 1)[0]
    b = a | initial_batch(g, extra, seed + 1, 0, 1)[0]
    for rule in (Rule.majority(), Rule.rneighbour(3), Rule.boot(3, 0.5)):
        fa = closure(g, InfectionState(g, a), rule).final.infected
        fb = closure(g, InfectionState(g, b), rule).final.infected
        assert not (fa & ~fb).any()


def test_sampling_deterministic_and_coupled():
    g = make_graph("hypercube:n=6")
    a = sample_initial(g, 0.3, 42, 3).infected
    b = sample_initial(g, 0.3, 42, 3).infected
    c = sample_initial(g, 0.5, 42, 3).infected
    assert np.array_equal(a, b)
    assert not (a & ~c).any()
    assert not np.array_equal(a, sample_initial(g, 0.3, 43, 3).infected)
    assert not sample_initial(g, 0.0, 1).infected.any() and sample_initial(g, 1.0, 1).infected.all()
    with pytest.raises(InvalidSpec):
        sample_initial(g, 1.5, 1)


def test_coupled_thresholds_agree_with_direct_runs():
    g = make_graph("hypercube:n=5")
    rule = Rule.majority()
    pstar = coupled_thresholds(g, rule, seed=9, ntrials=300)
    for p in (0.1, 0.2, 0.3, 0.45):
        direct = percolate_batch(g, rule, initial_batch(g, p, 9, 0, 300))
        assert np.array_equal(direct, pstar < p)
    with pytest.raises(InvalidSpec):
        coupled_thresholds(g, Rule.boot(3, 1.0), 1, 5)


def test_workers_do_not_change_counts():
    g = make_graph("hypercube:n=7")
    a = count_percolating(g, Rule.majority(), 0.22, 3, 700, chunk=64, workers=1)
    b = count_percolating(g, Rule.majority(), 0.22, 3, 700, chunk=64, workers=4)
    assert a == b
    c = coupled_thresholds(g, Rule.majority(), 3, 300, chunk=50, workers=3)
    d = coupled_thresholds(g, Rule.majority(), 3, 300, chunk=300, workers=1)
    assert np.array_equal(c, d)


def test_empty_set_percolating_rule():
    g = make_graph("hypercube:n=3")
    pstar = coupled_thresholds(g, Rule.rneighbour(0), 1, 4)
    assert (pstar == -1.0).all()
    assert percolates(g, empty_state(g), Rule.rneighbour(0))
