import math

import numpy as np
import pytest

import oracles
from percolab.engine import Rule, closure, empty_state, sample_initial, state_from
from percolab.errors import (
    ExplicitScaleExceeded,
    InvalidSpec,
    TraceMismatch,
    UnsupportedFamily,
    WitnessLayerInvalid,
)
from percolab.graphs import make_graph
from percolab.structure import (
    Witness,
    build_witness,
    cherry_bound,
    count_cherries,
    count_bound,
    deviation_report,
    event_bound,
    lam_from_p,
    order_bound_log,
    parse_scope,
    recheck,
    verify_permutahedron_isometry,
    verify_property,
    witness_stats,
)


def test_p1_hypercube():
    rep = verify_property(make_graph("hypercube:n=6"), "P1", 2, 3, "exhaustive")
    assert rep.passed and rep.checked == 64 * 3 and rep.counterexamples == []


def test_p2_permutahedron():
    rep = verify_property(make_graph("permutahedron:n=4"), "P2", 4, 2, "exhaustive")
    assert rep.passed


def test_middle_layers_cherry_counterexample():
    g = make_graph("middlelayers:k=3")
    rep = verify_property(g, "P3v", 2, 2, "exhaustive")
    assert rep.verdict == "fail" and rep.counterexamples
    for ce in rep.counterexamples:
        assert ce["ell"] == 2
        assert recheck(g, "P3v", 2, ce)
        # independent check: u and w have no common neighbour at distance 1 from the root
        adj = {v: g.neighbors(v) for v in g.vertices()}
        dist = oracles.bfs(adj, ce["root"])
        common = set(adj[ce["u"]]) & set(adj[ce["w"]])
        assert not any(dist[z] == 1 for z in common)
        assert dist[ce["v"]] == 3 and ce["v"] in common
    assert verify_property(g, "P3v", 2, 1).passed


def test_failures_are_rechecked_for_each_property():
    """Tight K forces failures; each stored counterexample must re-fail alone."""
    g = make_graph("stars:n=3,q=2")
    for prop in ("P1", "P2", "P3ii", "P4", "P5"):
        rep = verify_property(g, prop, 0, 2)
        assert rep.verdict == "fail", prop
        assert all(recheck(g, prop, 0, ce) for ce in rep.counterexamples)
    h = make_graph("hypercube:n=4")
    rep = verify_property(h, "P3iii", 2, 1)
    assert rep.passed


def test_recheck_rejects_non_counterexample():
    g = make_graph("hypercube:n=5")
    assert not recheck(g, "P1", 2, {"root": 0, "ell": 1, "y": 1})
    assert not recheck(g, "P3v", 2, {"root": 0, "ell": 1, "u": 1, "v": 3, "w": 2})


def test_p6_order_bound():
    rep = verify_property(make_graph("hypercube:n=6"), "P6", 2, 1)
    assert rep.verdict == "fail"  # vacuous at desk scale
    ce = rep.counterexamples[0]
    assert ce["ln_bound"] == pytest.approx(6**1.5 * math.log(math.log(6)) / math.log(6) ** 2)
    assert order_bound_log(1) == -math.inf
    # the bound eventually beats 2^n on hypercubes
    assert order_bound_log(2000) > 2000 * math.log(2)


def test_scope_parsing():
    assert parse_scope("exhaustive") == {"kind": "exhaustive"}
    assert parse_scope("sample:100:seed=5") == {"kind": "sample", "count": 100, "seed": 5}
    assert parse_scope("sample:7") == {"kind": "sample", "count": 7, "seed": 0}
    for bad in ("sample", "sample:x", "sample:3:salt=1", "sample:0", "all"):
        with pytest.raises(InvalidSpec):
            parse_scope(bad)


def test_sampled_scope_reproducible():
    g = make_graph("hypercube:n=14")
    a = verify_property(g, "P2", 2, 2, "sample:5:seed=3")
    b = verify_property(g, "P2", 2, 2, "sample:5:seed=3")
    assert a.passed and a.to_json(g) == b.to_json(g)
    assert verify_property(g, "P1", 2, 1).scope == {"kind": "sample", "count": 100, "seed": 0}


def test_unsupported_family():
    with pytest.raises(UnsupportedFamily):
        verify_property(make_graph("genhypercube:n=4,k=2"), "P3i", 2, 1)


def test_unknown_property():
    with pytest.raises(InvalidSpec):
        verify_property(make_graph("hypercube:n=3"), "P7", 2, 1)


@pytest.mark.parametrize("spec", ["hypercube:n=8", "permutahedron:n=4", "stars:n=6,q=2"])
def test_pairwise_common_neighbour_forms(spec):
    g = make_graph(spec)
    K = {"hypercube": 2, "permutahedron": 4, "product": 3}[g.family]
    assert verify_property(g, "P3iii", K, 2, "sample:20:seed=1").passed
    assert verify_property(g, "P3v", K, 2, "sample:20:seed=1").passed


def test_cherries_small_cube():
    g = make_graph("hypercube:n=3")
    assert count_cherries(g, 0, 1, [0b001]) == 0
    assert count_cherries(g, 0, 1, [0b001, 0b010]) == 1
    assert count_cherries(g, 0, 1, [0b001, 0b010, 0b100]) == 3
    with pytest.raises(WitnessLayerInvalid):
        count_cherries(g, 0, 1, [0b011])


def _brute_cherries(g, x, i, W):
    adj = {v: g.neighbors(v) for v in g.vertices()}
    dist = oracles.bfs(adj, x)
    m = 0
    for v, d in dist.items():
        if d == i + 1 and g.is_typical(x, v):
            c = sum(1 for w in adj[v] if w in W)
            m += c * (c - 1) // 2
    return m


@pytest.mark.parametrize("spec,K", [("hypercube:n=10", 2), ("permutahedron:n=4", 4), ("stars:n=5,q=2", 3)])
def test_cherry_count_brute_force_and_bound(spec, K):
    g = make_graph(spec)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = g.random_vertex(rng)
        for i in (1, 2):
            ball = g.ball(x, i)
            pool = [v for v in ball.sphere(i) if g.is_typical(x, v)]
            W = set(rng.choice(len(pool), size=min(len(pool), 12), replace=False).tolist())
            W = {pool[j] for j in W}
            m = count_cherries(g, x, i, W)
            assert m == _brute_cherries(g, x, i, W)
            assert m <= cherry_bound(i, len(W), g.degree(x), K)


def _boot_runs(g, rule, p, seeds):
    for seed in seeds:
        A0 = sample_initial(g, p, seed)
        yield A0, closure(g, A0, rule, record=True)


def test_witness_none_cases():
    g = make_graph("hypercube:n=8")
    rule = Rule.boot(3, 0.5)
    A0 = sample_initial(g, 0.3, 1)
    tr = closure(g, A0, rule, record=True)
    x = A0.vertices()[0]
    assert build_witness(g, x, tr, 1, 2) is None
    with pytest.raises(TraceMismatch):
        build_witness(g, x, closure(g, A0, Rule.majority(), record=True), 1, 2)
    with pytest.raises(TraceMismatch):
        build_witness(g, x, closure(g, A0, rule), 1, 2)
    with pytest.raises(InvalidSpec):
        build_witness(g, x, tr, 4, 2)


def test_witness_trace_tampering_detected():
    g = make_graph("hypercube:n=6")
    A0 = sample_initial(g, 0.3, 2)
    tr = closure(g, A0, Rule.boot(3, 0.5), record=True)
    hist = list(tr.history)
    bad = hist[1].copy()
    bad[np.flatnonzero(~bad)[0]] = True
    hist[1] = bad
    forged = type(tr)(tr.final, tr.rounds_to_stabilise, tr.percolated, tr.sizes, tuple(hist), tr.rule)
    with pytest.raises(TraceMismatch):
        build_witness(g, 0, forged, 1, 2)


@pytest.mark.parametrize("spec,K,rule,p", [
    ("hypercube:n=12", 2, Rule.boot(3, 0.5), 0.4),
    ("hypercube:n=10", 2, Rule.boot(3, 0.3), 0.3),
    ("permutahedron:n=4", 4, Rule.boot(3, 0.2), 0.35),
])
def test_witness_structure(spec, K, rule, p):
    g = make_graph(spec)
    built = 0
    for A0, tr in _boot_runs(g, rule, p, range(12)):
        for i in (1, 2, 3):
            newly = np.flatnonzero(tr.state_at(i + 1) & ~tr.state_at(i))
            for xi in newly[:4]:
                x = g.vertices()[xi]
                w = build_witness(g, x, tr, i, K)
                if w is None:
                    continue
                built += 1
                ball = g.ball(x, i + 1)
                prev = {x}
                for j, layer in enumerate(w.layers, start=1):
                    assert 1 <= len(layer) == w.targets[j - 1]
                    for v in layer:
                        assert ball.members[v] == j and g.is_typical(x, v)
                        assert prev & set(g.neighbors(v))
                        # first infected at round i - j + 1, replayed from the trace
                        k = g.index_of(v)
                        assert tr.state_at(i - j + 1)[k] and not tr.state_at(i - j)[k] if i - j >= 0 else True
                    prev = set(layer)
                st = witness_stats(g, x, w, A0)
                d = g.degree(x)
                assert st.s * (d - 3 * i * K) <= st.zeta <= st.s * (d + 3 * i * K)
                assert 0 <= st.Z <= st.zeta
                assert st.m == count_cherries(g, x, i, w.layers[-1])
                assert st.alpha == pytest.approx(st.m / (st.s * d))
                assert sum(k * c for k, c in st.x_hist.items()) == st.zeta
    assert built > 0


def test_witness_layer_one_replay():
    """W_1 of a round-2 newcomer consists of round-1 newcomers next to x."""
    g = make_graph("hypercube:n=12")
    rule = Rule.boot(3, 0.5)
    seen = 0
    for A0, tr in _boot_runs(g, rule, 0.4, range(20)):
        fresh1 = tr.state_at(1) & ~tr.state_at(0)
        for xi in np.flatnonzero(tr.state_at(2) & ~tr.state_at(1))[:5]:
            w = build_witness(g, g.vertices()[xi], tr, 1, 2)
            if w is None:
                continue
            seen += 1
            assert all(fresh1[g.index_of(v)] for v in w.layers[0])
    assert seen > 0


def test_witness_stats_examples():
    g = make_graph("hypercube:n=7")
    w = Witness(0, 1, ((1,),), (1,))
    st = witness_stats(g, 0, w, empty_state(g))
    assert st.zeta == 6 and st.Z == 0 and st.m == 0
    full = state_from(g, g.vertices())
    assert witness_stats(g, 0, w, full).Z == 6
    with pytest.raises(WitnessLayerInvalid):
        witness_stats(g, 0, Witness(0, 1, ((3,),), (1,)), full)
    with pytest.raises(WitnessLayerInvalid):
        witness_stats(g, 0, Witness(0, 2, ((1,), (6,)), (1, 1)), full)


def test_exact_size_policy():
    g = make_graph("hypercube:n=10")
    rule = Rule.boot(3, 0.5)
    for A0, tr in _boot_runs(g, rule, 0.35, range(5)):
        for xi in np.flatnonzero(tr.state_at(2) & ~tr.state_at(1))[:3]:
            # gamma - 7K < 1 here, so the unclamped sizes are below one vertex
            assert build_witness(g, g.vertices()[xi], tr, 1, 2, size_policy="exact") is None


def test_bound_evaluators():
    d, lam = 100, 0.1
    ld = math.log(d)
    assert event_bound(4, 0.0, d, lam) == pytest.approx(math.exp(-2 * (ld - 4 * lam * math.log(ld))))
    assert count_bound(2, 0.5, d) == pytest.approx(math.exp(2 * math.log(ld)))
    p = 0.5 - 0.5 * math.sqrt(ld / d) + lam * math.log(ld) / math.sqrt(d * ld)
    assert lam_from_p(p, d) == pytest.approx(lam)
    g = make_graph("hypercube:n=7")
    st = witness_stats(g, 0, Witness(0, 1, ((1,),), (1,)), empty_state(g))
    rep = deviation_report(st, 7, 0.4, 1.0, 1, 2)
    assert rep["mean"] == pytest.approx(6 * 0.4) and rep["Z"] == 0


def test_isometry():
    rep = verify_permutahedron_isometry(4)
    assert rep.passed and rep.checked == 7140
    assert verify_permutahedron_isometry(2).checked == 15
    with pytest.raises(ExplicitScaleExceeded):
        verify_permutahedron_isometry(6)
