"""Literal checks of the local-structure properties, plus witness bookkeeping.

Every property is evaluated from BFS balls and the family's typicality rule;
nothing is inferred from closed forms.  Property names:

====== ==============================================================
P1     ``|d(x) - d(y)| <= K l`` for y in S(x, l)
P2     ``|N(y) & B(x, l)| <= K l`` for y in S(x, l)
P3i    ``|D & S(x, l)| <= K^(l-1) d(x)^(l-1)``
P3ii   ``|D & N(y)| <= K l`` for typical y in S(x, l)
P3iii  two typical vertices of S(x, l) share <= 1 typical neighbour in S(x, l+1)
P3iv   typical v in S(x, l) has <= l neighbours in S(x, l-1)
P3v    every typical cherry u-v-w closes through a typical vertex of S(x, l-1)
P4     the constructed projection subgraph satisfies its four clauses
P5     ``|B(y, 2l-1) & S_0(x, l)| <= l K^(l-1) d(x)^(l-1)`` for typical y
P6     ``|V| < exp(delta^1.5 ln ln delta / ln^2 delta)`` (natural logs, strict)
====== ==============================================================
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import (
    ExplicitScaleExceeded,
    InvalidSpec,
    TraceMismatch,
    WitnessLayerInvalid,
)
from .graphs import PermutationGraph, inversion_vector

PROPERTIES = ("P1", "P2", "P3i", "P3ii", "P3iii", "P3iv", "P3v", "P4", "P5", "P6")
EXHAUSTIVE_LIMIT = 4096
MAX_STORED = 25


@dataclass
class PropertyReport:
    property: str
    K: int
    lmax: int
    scope: dict
    verdict: str
    counterexamples: list = field(default_factory=list)
    checked: int = 0
    failures: int = 0
    graph: str = ""

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_json(self, g=None):
        fmt = g.format_vertex if g is not None else str
        return {
            "graph": self.graph,
            "property": self.property,
            "K": self.K,
            "lmax": self.lmax,
            "scope": self.scope,
            "verdict": self.verdict,
            "checked": self.checked,
            "failures": self.failures,
            "counterexamples": [_format_ce(c, fmt) for c in self.counterexamples],
        }


def _format_ce(ce, fmt):
    out = {}
    for key, val in ce.items():
        if key in ("root", "y", "u", "v", "w", "z"):
            out[key] = fmt(val)
        elif key in ("offending",):
            out[key] = [fmt(a) for a in val]
        else:
            out[key] = val
    return out


# ---------------------------------------------------------------------------
# scope


def parse_scope(scope):
    """``exhaustive``, ``sample:COUNT:seed=S`` (or ``sample:COUNT``), or None for the default."""
    if scope is None or isinstance(scope, dict):
        return scope
    text = str(scope).strip().lower()
    if text == "exhaustive":
        return {"kind": "exhaustive"}
    parts = text.split(":")
    if parts[0] == "sample" and len(parts) in (2, 3):
        try:
            count = int(parts[1])
            seed = 0
            if len(parts) == 3:
                key, _, val = parts[2].partition("=")
                if key != "seed":
                    raise ValueError(parts[2])
                seed = int(val)
        except ValueError:
            raise InvalidSpec(f"bad root scope {scope!r}") from None
        if count < 1:
            raise InvalidSpec("sample count must be >= 1")
        return {"kind": "sample", "count": count, "seed": seed}
    raise InvalidSpec(f"root scope {scope!r} must be exhaustive or sample:COUNT:seed=S")


def resolve_roots(g, scope):
    scope = parse_scope(scope)
    if scope is None:
        if g.order() <= EXHAUSTIVE_LIMIT:
            scope = {"kind": "exhaustive"}
        else:
            scope = {"kind": "sample", "count": 100, "seed": 0}
    if scope["kind"] == "exhaustive":
        return scope, list(g.vertices())
    rng = np.random.default_rng(scope["seed"])
    roots = [g.random_vertex(rng) for _ in range(scope["count"])]
    return scope, roots


# ---------------------------------------------------------------------------
# per-root context


class RootContext:
    """BFS ball around x with cached typicality."""

    def __init__(self, g, x, radius):
        self.g = g
        self.ball = g.ball(x, radius)
        self.x = self.ball.center
        self.dx = g.degree(self.x)
        self._typ = {}

    def dist(self, v):
        return self.ball.members.get(v)

    def typical(self, v):
        t = self._typ.get(v)
        if t is None:
            t = self._typ[v] = self.g.is_typical(self.x, v)
        return t

    def sphere(self, ell):
        return self.ball.sphere(ell)

    def s0(self, ell):
        if ell == 0:
            return (self.x,)
        return tuple(v for v in self.sphere(ell) if self.typical(v))

    def in_s0(self, v, ell):
        return self.dist(v) == ell and (ell == 0 or self.typical(v))


# Each predicate returns a list of counterexample dicts (empty on success).


def _p1(ctx, K, ell, items=None):
    out = []
    for y in items if items is not None else ctx.sphere(ell):
        dy = ctx.g.degree(y)
        if abs(ctx.dx - dy) > K * ell:
            out.append({"root": ctx.x, "ell": ell, "y": y, "deg_root": ctx.dx, "deg_y": dy, "bound": K * ell})
    return out


def _p2(ctx, K, ell, items=None):
    out = []
    for y in items if items is not None else ctx.sphere(ell):
        c = sum(1 for w in ctx.g.neighbors(y) if (ctx.dist(w) is not None and ctx.dist(w) <= ell))
        if c > K * ell:
            out.append({"root": ctx.x, "ell": ell, "y": y, "count": c, "bound": K * ell})
    return out


def _p3i(ctx, K, ell, items=None):
    bad = [v for v in ctx.sphere(ell) if not ctx.typical(v)]
    bound = K ** (ell - 1) * ctx.dx ** (ell - 1)
    if len(bad) > bound:
        return [{"root": ctx.x, "ell": ell, "count": len(bad), "bound": bound, "offending": bad[:10]}]
    return []


def _p3ii(ctx, K, ell, items=None):
    out = []
    for y in items if items is not None else ctx.s0(ell):
        bad = [w for w in ctx.g.neighbors(y) if w != ctx.x and not ctx.g.is_typical(ctx.x, w)]
        if len(bad) > K * ell:
            out.append({"root": ctx.x, "ell": ell, "y": y, "count": len(bad), "bound": K * ell})
    return out


def _common_in_s0(ctx, u, w, ell):
    nu = set(ctx.g.neighbors(u))
    return sorted(z for z in ctx.g.neighbors(w) if z in nu and ctx.in_s0(z, ell))


def _typical_cherries(ctx, ell):
    """Endpoint pairs (u, w) in S_0(x, l) with their centres in S_0(x, l+1)."""
    pairs = defaultdict(list)
    for v in ctx.s0(ell + 1):
        ends = [u for u in ctx.g.neighbors(v) if ctx.in_s0(u, ell)]
        for u, w in combinations(sorted(ends), 2):
            pairs[(u, w)].append(v)
    return pairs


def _p3iii(ctx, K, ell, items=None):
    out = []
    if items is not None:
        for u, w in items:
            c = _common_in_s0(ctx, u, w, ell + 1)
            if ctx.in_s0(u, ell) and ctx.in_s0(w, ell) and len(c) > 1:
                out.append({"root": ctx.x, "ell": ell, "u": u, "w": w, "common": len(c)})
        return out
    for (u, w), centres in sorted(_typical_cherries(ctx, ell).items()):
        if len(centres) > 1:
            out.append({"root": ctx.x, "ell": ell, "u": u, "w": w, "common": len(centres)})
    return out


def _p3iv(ctx, K, ell, items=None):
    out = []
    for v in items if items is not None else ctx.s0(ell):
        c = sum(1 for w in ctx.g.neighbors(v) if ctx.dist(w) == ell - 1)
        if c > ell:
            out.append({"root": ctx.x, "ell": ell, "y": v, "count": c, "bound": ell})
    return out


def _p3v(ctx, K, ell, items=None):
    out = []
    if items is not None:
        triples = items
    else:
        triples = [(u, centres[0], w) for (u, w), centres in sorted(_typical_cherries(ctx, ell).items())]
    for u, v, w in triples:
        if not (ctx.in_s0(u, ell) and ctx.in_s0(w, ell) and ctx.in_s0(v, ell + 1)):
            continue
        if v not in ctx.g.neighbors(u) or v not in ctx.g.neighbors(w):
            continue
        if not _common_in_s0(ctx, u, w, ell - 1):
            out.append({"root": ctx.x, "ell": ell, "u": u, "v": v, "w": w})
    return out


def _p4(ctx, K, ell, items=None):
    out = []
    inner = ctx.ball.within(ell - 1)
    for y in items if items is not None else ctx.sphere(ell):
        sub = ctx.g.projection(ctx.x, y, ell)
        reasons = []
        if not sub.contains(y):
            reasons.append("y not in projection")
        if sub.family != ctx.g.family:
            reasons.append("projection outside the family")
        hit = [b for b in inner if sub.contains(b)]
        if hit:
            reasons.append("meets B(x, l-1)")
        gap = 0
        for w in sub.vertices():
            gap = max(gap, abs(sub.degree(w) - ctx.g.degree(w)))
        if gap > K * ell:
            reasons.append(f"degree deficit {gap} > {K * ell}")
        if reasons:
            out.append({"root": ctx.x, "ell": ell, "y": y, "reasons": reasons})
    return out


def _p5(ctx, K, ell, items=None):
    out = []
    bound = ell * K ** (ell - 1) * ctx.dx ** (ell - 1)
    for y in items if items is not None else ctx.s0(ell):
        near = ctx.g.ball(y, 2 * ell - 1).members
        c = sum(1 for z in near if ctx.in_s0(z, ell))
        if c > bound:
            out.append({"root": ctx.x, "ell": ell, "y": y, "count": c, "bound": bound})
    return out


_PREDICATES = {
    "P1": _p1,
    "P2": _p2,
    "P3i": _p3i,
    "P3ii": _p3ii,
    "P3iii": _p3iii,
    "P3iv": _p3iv,
    "P3v": _p3v,
    "P4": _p4,
    "P5": _p5,
}


def order_bound_log(delta):
    """ln of the order bound exp(delta^1.5 ln ln delta / ln^2 delta); -inf when undefined."""
    if delta < 2:
        return -math.inf
    ld = math.log(delta)
    return delta**1.5 * math.log(ld) / ld**2


def _p6(g):
    delta = g.min_degree()
    lhs = math.log(g.order())
    rhs = order_bound_log(delta)
    ok = lhs < rhs
    ce = {"order": g.order(), "min_degree": delta, "ln_order": lhs, "ln_bound": rhs}
    return ok, ce


def normalise_property(prop):
    key = str(prop).strip().replace("'", "").replace("′", "")
    table = {p.lower(): p for p in PROPERTIES}
    try:
        return table[key.lower()]
    except KeyError:
        raise InvalidSpec(f"unknown property {prop!r}; choose from {', '.join(PROPERTIES)}") from None


def verify_property(g, prop, K, lmax, scope=None):
    """Evaluate one property for every root in scope and every 1 <= l <= lmax."""
    prop = normalise_property(prop)
    if K < 0 or lmax < 1:
        raise InvalidSpec("need K >= 0 and lmax >= 1")
    if prop == "P6":
        ok, ce = _p6(g)
        return PropertyReport(prop, K, lmax, {"kind": "global"}, "pass" if ok else "fail",
                              [] if ok else [ce], 1, 0 if ok else 1, g.name)
    scope, roots = resolve_roots(g, scope)
    pred = _PREDICATES[prop]
    found, failures, checked = [], 0, 0
    for x in roots:
        ctx = RootContext(g, x, lmax + 1)
        for ell in range(1, lmax + 1):
            checked += 1
            bad = pred(ctx, K, ell)
            failures += len(bad)
            room = MAX_STORED - len(found)
            if room > 0:
                found.extend(bad[:room])
    return PropertyReport(prop, K, lmax, scope, "fail" if failures else "pass", found, checked, failures, g.name)


def recheck(g, prop, K, ce):
    """Re-evaluate a single counterexample from scratch; True when it still fails."""
    prop = normalise_property(prop)
    if prop == "P6":
        return not _p6(g)[0]
    ell = ce["ell"]
    ctx = RootContext(g, ce["root"], ell + 1)
    if prop in ("P1", "P2", "P3ii", "P3iv", "P4", "P5"):
        items = [ce["y"]]
        if prop in ("P3ii", "P5") and not ctx.in_s0(ce["y"], ell):
            return False
        if prop in ("P1", "P2", "P4") and ctx.dist(ce["y"]) != ell:
            return False
        if prop == "P3iv" and not ctx.in_s0(ce["y"], ell):
            return False
        return bool(_PREDICATES[prop](ctx, K, ell, items))
    if prop == "P3i":
        return bool(_p3i(ctx, K, ell))
    if prop == "P3iii":
        return bool(_p3iii(ctx, K, ell, [(ce["u"], ce["w"])]))
    return bool(_p3v(ctx, K, ell, [(ce["u"], ce["v"], ce["w"])]))


# ---------------------------------------------------------------------------
# cherries and witnesses


def _validate_layer(ctx, W, i):
    for w in W:
        if not ctx.in_s0(w, i):
            raise WitnessLayerInvalid(f"{ctx.g.format_vertex(w)} is not in S_0(x, {i})")


def _cherry_tally(ctx, i, W):
    tally = Counter()
    for w in W:
        for v in ctx.g.neighbors(w):
            if ctx.in_s0(v, i + 1):
                tally[v] += 1
    return tally


def count_cherries(g, x, i, W, ctx=None):
    """Number of cherries u-v-w with u, w in W and centre v in S_0(x, i+1)."""
    if i < 1:
        raise WitnessLayerInvalid("layer index must be >= 1")
    ctx = ctx or RootContext(g, x, i + 1)
    W = set(W)
    _validate_layer(ctx, W, i)
    return sum(c * (c - 1) // 2 for c in _cherry_tally(ctx, i, W).values())


def cherry_bound(i, s, d, K):
    """Finite form of the cherry count bound: i * s * (d + i K) / 2."""
    return i * s * (d + i * K) / 2


@dataclass(frozen=True)
class WitnessStats:
    s: int
    zeta: int
    Z: int
    m: int
    alpha: float
    x_hist: dict

    def to_json(self):
        return {"s": self.s, "zeta": self.zeta, "Z": self.Z, "m": self.m, "alpha": self.alpha,
                "x_hist": {str(k): v for k, v in sorted(self.x_hist.items())}}


@dataclass(frozen=True)
class Witness:
    root: object
    depth: int
    layers: tuple
    targets: tuple
    stats: WitnessStats | None = None

    @property
    def s(self):
        return len(self.layers[-1])

    def to_json(self, g):
        out = {
            "root": g.format_vertex(self.root),
            "depth": self.depth,
            "layers": [[g.format_vertex(v) for v in layer] for layer in self.layers],
            "targets": list(self.targets),
        }
        if self.stats is not None:
            out["stats"] = self.stats.to_json()
        return out


def layer_targets(gamma, K, depth, policy="clamped"):
    """Raw layer sizes (gamma - 7K)^j / j!, j = 1..depth (base floored at 0)."""
    if policy not in ("clamped", "exact"):
        raise InvalidSpec("size_policy must be clamped or exact")
    base = max(gamma - 7 * K, 0.0)
    return [base**j / math.factorial(j) for j in range(1, depth + 1)]


def _check_trace(g, trace):
    rule = trace.rule
    if rule is None or not trace.history:
        raise TraceMismatch("trace must be recorded (record=True) and carry its rule")
    if rule.kind != "boot":
        raise TraceMismatch(f"witnesses are built from Boot traces, not {rule}")
    from .engine import neighbour_counts

    hist = trace.history
    for j in range(1, len(hist)):
        prev = hist[j - 1]
        nxt = prev | (neighbour_counts(g, prev) >= rule.need(g.degrees, j - 1))
        if not np.array_equal(nxt, hist[j]):
            raise TraceMismatch(f"round {j} of the trace does not follow from round {j - 1} under {rule}")


def build_witness(g, x, trace, i, K, size_policy="clamped", check=True):
    """Inductive witness W_1..W_i for x in A_{i+1} minus A_i, or None.

    W_1 takes typical neighbours of x first infected at round i; each later
    layer takes typical next-sphere neighbours of the previous layer first
    infected one round earlier.  Candidates are taken in sorted order up to
    the layer target.
    """
    if i not in (1, 2, 3):
        raise InvalidSpec("witness depth must be 1, 2 or 3")
    if check:
        _check_trace(g, trace)
    x = g.check(x)
    xi = g.index_of(x)
    state = trace.state_at
    if not (state(i + 1)[xi] and not state(i)[xi]):
        return None
    gamma = float(trace.rule.gamma(np.array([g.degree(x)]))[0])
    raw = layer_targets(gamma, K, i, size_policy)
    if size_policy == "exact" and any(r < 1 for r in raw):
        return None
    ctx = RootContext(g, x, i + 1)

    def recent(v, j):
        k = g.index_of(v)
        return bool(state(j)[k]) and (j == 0 or not state(j - 1)[k])

    layers, targets = [], []
    frontier = [x]
    for j in range(1, i + 1):
        cand = sorted({u for w in frontier for u in g.neighbors(w) if ctx.in_s0(u, j) and recent(u, i - j + 1)})
        if not cand:
            return None
        want = math.ceil(raw[j - 1] - 1e-12)
        if size_policy == "exact" and want > len(cand):
            return None
        want = min(max(want, 1), len(cand))
        layer = tuple(cand[:want])
        layers.append(layer)
        targets.append(want)
        frontier = layer
    return Witness(x, i, tuple(layers), tuple(targets))


def witness_stats(g, x, w, A0):
    """s, zeta, Z, m and alpha for the last layer of ``w``."""
    x = g.check(x)
    i = w.depth if isinstance(w, Witness) else len(w)
    layers = w.layers if isinstance(w, Witness) else tuple(tuple(L) for L in w)
    ctx = RootContext(g, x, i + 1)
    prev = {x}
    for j, layer in enumerate(layers, start=1):
        _validate_layer(ctx, layer, j)
        for v in layer:
            if not prev.intersection(g.neighbors(v)):
                raise WitnessLayerInvalid(f"{g.format_vertex(v)} in W_{j} has no neighbour in the previous layer")
        prev = set(layer)
    Wi = layers[-1]
    infected = A0.infected if hasattr(A0, "infected") else np.asarray(A0, dtype=bool)
    zeta = Z = 0
    for v in Wi:
        for u in g.neighbors(v):
            if ctx.in_s0(u, i + 1):
                zeta += 1
                if infected[g.index_of(u)]:
                    Z += 1
    tally = _cherry_tally(ctx, i, set(Wi))
    m = sum(c * (c - 1) // 2 for c in tally.values())
    hist = Counter(tally.values())
    hist[0] = len(ctx.s0(i + 1)) - len(tally)
    s = len(Wi)
    return WitnessStats(s, zeta, Z, m, m / (s * ctx.dx), dict(hist))


# ---------------------------------------------------------------------------
# closed-form bounds from the witness counting argument (o(1) terms dropped)


def lam_from_p(p, d):
    """lambda such that p = 1/2 - sqrt(ln d / d)/2 + lambda ln ln d / sqrt(d ln d)."""
    if d < 3:
        raise InvalidSpec("lambda needs d >= 3")
    ld = math.log(d)
    return (p - 0.5 + 0.5 * math.sqrt(ld / d)) * math.sqrt(d * ld) / math.log(ld)


def event_bound(s, alpha, d, lam):
    ld = math.log(d)
    return math.exp(-(s / 2 - alpha * s / (1 + 2 * alpha)) * (ld - 4 * lam * math.log(ld)))


def count_bound(s, alpha, d):
    ld = math.log(d)
    return math.exp((0.5 - alpha) * s * ld + (alpha + 0.5) * s * math.log(ld))


def deviation_report(stats, d, p, gamma, i, K):
    """Compare Z with the deviation threshold; reported, never asserted."""
    lam = lam_from_p(p, d)
    ld = math.log(d)
    margin = 0.5 * math.sqrt(d * ld) - lam * math.log(ld) * math.sqrt(d / ld) - 3 * gamma - 9 * i * K
    rhs = stats.zeta * p + stats.s * margin
    return {
        "Z": stats.Z,
        "mean": stats.zeta * p,
        "threshold": rhs,
        "lambda": lam,
        "exceeds": stats.Z >= rhs,
        "event_bound": event_bound(stats.s, stats.alpha, d, lam),
        "count_bound": count_bound(stats.s, stats.alpha, d),
    }


# ---------------------------------------------------------------------------
# permutahedron isometry


def verify_permutahedron_isometry(n, max_n=5):
    """BFS distance vs |Inv(pi) symmetric-difference Inv(sigma)| over all pairs of P_n."""
    if n < 1:
        raise InvalidSpec("n must be >= 1")
    if n > max_n:
        raise ExplicitScaleExceeded(f"isometry check capped at n <= {max_n} ({math.factorial(max_n + 1)} vertices)")
    g = PermutationGraph(n + 1, max_vertices=math.factorial(n + 1))
    vs = g.vertices()
    indptr, indices = g.csr()
    nv = len(vs)
    bfs = np.full((nv, nv), -1, dtype=np.int64)
    for s in range(nv):
        row = bfs[s]
        row[s] = 0
        frontier = np.array([s])
        d = 0
        while frontier.size:
            d += 1
            nb = np.concatenate([indices[indptr[v] : indptr[v + 1]] for v in frontier])
            nb = np.unique(nb[row[nb] < 0])
            row[nb] = d
            frontier = nb
    inv = np.array([inversion_vector(v) for v in vs], dtype=np.int8)
    sym = (inv[:, None, :] != inv[None, :, :]).sum(axis=2)
    iu = np.triu_indices(nv, 1)
    bad = np.flatnonzero(bfs[iu] != sym[iu])
    ce = []
    if bad.size:
        a, b = iu[0][bad[0]], iu[1][bad[0]]
        ce.append({"u": vs[a], "w": vs[b], "bfs": int(bfs[a, b]), "inversions": int(sym[a, b])})
    return PropertyReport(
        "isometry", 0, n, {"kind": "exhaustive", "pairs": int(iu[0].size)},
        "fail" if bad.size else "pass", ce, int(iu[0].size), int(bad.size), f"permutahedron:n={n}",
    )
