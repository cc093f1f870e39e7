import numpy as np
import pytest

import oracles
from percolab.engine import Rule
from percolab.errors import BallTooLarge, InvalidRound, InvalidSpec
from percolab.graphs import make_graph
from percolab.local import LocalEstimate, LocalProblem, full_indicators, local_indicators, local_round_prob


@pytest.mark.parametrize("rule", [Rule.majority(), Rule.rneighbour(2), Rule.boot(3, 0.5)])
@pytest.mark.parametrize("t", [0, 1, 2, 3])
def test_local_equals_full_trialwise(rule, t):
    """Same (seed, trial, vertex) draws, so the indicators agree exactly."""
    g = make_graph("hypercube:n=8")
    x = 37
    a = local_indicators(g, x, t, 0.4, rule, 3000, seed=5)
    b = full_indicators(g, x, t, 0.4, rule, 3000, seed=5)
    assert np.array_equal(a, b)


def test_local_equals_full_on_permutahedron():
    g = make_graph("permutahedron:n=4")
    x = (2, 1, 4, 5, 3)
    for t in (1, 2):
        assert np.array_equal(
            local_indicators(g, x, t, 0.45, Rule.majority(), 2000, 3),
            full_indicators(g, x, t, 0.45, Rule.majority(), 2000, 3),
        )


def test_t0_is_bernoulli_p():
    g = make_graph("hypercube:n=30")
    est = local_round_prob(g, 0, 0, 0.3, Rule.majority(), 40000, seed=1)
    assert abs(est.estimate - 0.3) <= 3 * est.sigma


def test_t1_closed_form_large_cube():
    g = make_graph("hypercube:n=20")
    p = 0.4
    exact = p + (1 - p) * oracles.binom_tail(20, p, 10)
    est = local_round_prob(g, 0, 1, p, Rule.majority(), 100000, seed=2)
    assert abs(est.estimate - exact) <= 3 * est.sigma


def test_estimate_fields_and_workers():
    g = make_graph("hypercube:n=10")
    a = local_round_prob(g, 3, 2, 0.45, Rule.majority(), 20000, seed=4, workers=1, chunk=3000)
    b = local_round_prob(g, 3, 2, 0.45, Rule.majority(), 20000, seed=4, workers=3, chunk=3000)
    assert a == b
    assert a.estimate == a.hits / a.trials
    assert a.ci_halfwidth_95 == pytest.approx(1.96 * np.sqrt(a.estimate * (1 - a.estimate) / a.trials))
    assert a.to_json(g)["vertex"] == g.format_vertex(3)


def test_boundary_vertices_never_updated():
    g = make_graph("hypercube:n=6")
    prob = LocalProblem(g, 0, 3, Rule.majority())
    for j in range(1, 4):
        ids = prob.updates[j - 1]
        ids = ids[ids >= 0]
        assert prob.dist[ids].max() <= 3 - j
    assert (prob.dist == 3).any()


def test_errors():
    g = make_graph("hypercube:n=20")
    with pytest.raises(InvalidRound):
        local_round_prob(g, 0, -1, 0.3, Rule.majority(), 10, 1)
    with pytest.raises(InvalidSpec):
        local_round_prob(g, 0, 1, 0.3, Rule.majority(), 0, 1)
    with pytest.raises(BallTooLarge):
        LocalProblem(g, 0, 6, Rule.majority(), max_members=1000)


def test_from_hits():
    e = LocalEstimate.from_hits(0, 1, 0.2, 100, 25)
    assert e.estimate == 0.25 and e.ci_halfwidth_95 == pytest.approx(1.96 * np.sqrt(0.25 * 0.75 / 100))
