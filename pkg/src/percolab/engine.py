"""Round-by-round bootstrap percolation on explicit vertex domains.

Three rules share one integer-threshold representation: for each vertex and
round the rule yields ``need``, the least number of infected neighbours that
infects the vertex at the next round.

* majority: ``2 * |N(v) & A| >= d(v)``, i.e. ``need = ceil(d/2)``
* r-neighbour: ``need = r``
* Boot_k(gamma): ``|N(v) & A| >= d/2 - max(0, k - l) * gamma(v)`` at round l+1,
  with ``gamma(v) = gscale * sqrt(d / ln d)`` (0 when d < 2)
"""

from __future__ import annotations

import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainMismatch, InvalidSpec, RoundBudgetExceeded
from .rng import as_seed, uniforms


@dataclass(frozen=True)
class Rule:
    kind: str
    r: int = 0
    k: int = 3
    gscale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("majority", "rneighbour", "boot"):
            raise InvalidSpec(f"unknown rule kind {self.kind!r}")
        if self.kind == "rneighbour" and self.r < 0:
            raise InvalidSpec("rneib: r must be >= 0")
        if self.kind == "boot" and (self.k < 0 or self.gscale < 0 or not math.isfinite(self.gscale)):
            raise InvalidSpec("boot: need k >= 0 and a finite gscale >= 0")

    @classmethod
    def majority(cls):
        return cls("majority")

    @classmethod
    def rneighbour(cls, r):
        return cls("rneighbour", r=int(r))

    @classmethod
    def boot(cls, k=3, gscale=1.0):
        return cls("boot", k=int(k), gscale=float(gscale))

    @property
    def static(self):
        """True when the threshold does not depend on the round index."""
        return self.kind != "boot" or self.k == 0 or self.gscale == 0.0

    def __str__(self):
        if self.kind == "majority":
            return "majority"
        if self.kind == "rneighbour":
            return f"rneib:r={self.r}"
        return f"boot:k={self.k},gscale={self.gscale!r}"

    def gamma(self, deg):
        deg = np.asarray(deg, dtype=np.float64)
        out = np.zeros_like(deg)
        ok = deg >= 2
        out[ok] = self.gscale * np.sqrt(deg[ok] / np.log(deg[ok]))
        return out

    def need(self, deg, ell=0):
        """Required infected-neighbour counts for the update into round ell+1."""
        deg = np.asarray(deg, dtype=np.int64)
        if self.kind == "majority":
            return (deg + 1) // 2
        if self.kind == "rneighbour":
            return np.full(deg.shape, self.r, dtype=np.int64)
        relax = max(0, self.k - ell)
        if relax == 0 or self.gscale == 0.0:
            return (deg + 1) // 2
        theta = deg / 2.0 - relax * self.gamma(deg)
        return np.maximum(np.ceil(theta), 0).astype(np.int64)

    def need_rows(self, deg):
        if self.static:
            return self.need(deg)[None, :]
        return np.stack([self.need(deg, ell) for ell in range(self.k + 1)])


_RULE_RE = re.compile(r"^(majority|rneib|boot)(?::(.*))?$")


def parse_rule(text):
    """``majority``, ``rneib:r=3`` or ``boot:k=3,gscale=1.0``."""
    m = _RULE_RE.match(text.strip().lower())
    if not m:
        raise InvalidSpec(f"rule {text!r} must be majority, rneib:r=R or boot:k=K,gscale=G")
    name, rest = m.group(1), m.group(2) or ""
    params = {}
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, val = tok.partition("=")
        if not eq:
            raise InvalidSpec(f"rule parameter {tok!r} must look like key=value")
        params[key.strip()] = val.strip()
    try:
        if name == "majority":
            if params:
                raise InvalidSpec("majority takes no parameters")
            return Rule.majority()
        if name == "rneib":
            if set(params) != {"r"}:
                raise InvalidSpec("rneib needs exactly r=<int>")
            return Rule.rneighbour(int(params["r"]))
        extra = set(params) - {"k", "gscale"}
        if extra:
            raise InvalidSpec(f"boot: unexpected parameters {sorted(extra)}")
        return Rule.boot(int(params.get("k", 3)), float(params.get("gscale", 1.0)))
    except ValueError as exc:
        raise InvalidSpec(f"bad rule {text!r}: {exc}") from None


@dataclass(frozen=True, eq=False)
class InfectionState:
    """Infected set A_i over the enumeration of ``graph`` plus round counter."""

    graph: object
    infected: np.ndarray
    round: int = 0
    newly_infected_per_round: tuple = ()

    @property
    def size(self):
        return int(self.infected.sum())

    def vertices(self):
        vs = self.graph.vertices()
        return [vs[i] for i in np.flatnonzero(self.infected)]

    def __contains__(self, v):
        return bool(self.infected[self.graph.index_of(v)])

    def __len__(self):
        return self.size


@dataclass(frozen=True, eq=False)
class ClosureTrace:
    final: InfectionState
    rounds_to_stabilise: int
    percolated: bool
    sizes: tuple
    history: tuple = field(default=(), repr=False)
    rule: Rule | None = None

    def state_at(self, j):
        """A_j as a boolean array; rounds past stabilisation repeat the final set."""
        if not self.history:
            raise ValueError("trace was not recorded (use record=True)")
        return self.history[min(j, len(self.history) - 1)]

    def to_json(self):
        return {
            "rounds_to_stabilise": self.rounds_to_stabilise,
            "percolated": self.percolated,
            "sizes": list(self.sizes),
            "newly_infected_per_round": list(self.final.newly_infected_per_round),
        }


def state_from(g, vertices=(), round=0):
    inf = np.zeros(g.order(), dtype=bool)
    idx = g.indices_of(list(vertices))
    inf[idx] = True
    g.vertices()
    return InfectionState(g, inf, round)


def full_state(g):
    return InfectionState(g, np.ones(len(g.vertices()), dtype=bool))


def empty_state(g):
    return InfectionState(g, np.zeros(len(g.vertices()), dtype=bool))


def initial_batch(g, p, seed, trial0=0, ntrials=1):
    """(ntrials, |V|) boolean initial sets; row t uses trial index trial0 + t."""
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec(f"probability {p} outside [0, 1]")
    keys = g.keys
    return uniforms(seed, keys, trial0, ntrials) < p


def sample_initial(g, p, seed, trial=0):
    """Each vertex infected independently with probability p, keyed on (seed, trial, vertex)."""
    g.vertices()
    return InfectionState(g, initial_batch(g, p, seed, trial, 1)[0])


def neighbour_counts(g, infected):
    """Infected-neighbour counts; ``infected`` may be (V,) or (B, V)."""
    indptr, indices = g.csr()
    a = np.asarray(infected, dtype=np.int64)
    gathered = a[..., indices]
    c = np.concatenate([np.zeros(a.shape[:-1] + (1,), dtype=np.int64), np.cumsum(gathered, axis=-1)], axis=-1)
    return c[..., indptr[1:]] - c[..., indptr[:-1]]


def _check_domain(g, s):
    if s.graph is not g and (s.graph.name != g.name or len(s.infected) != g.order()):
        raise DomainMismatch(f"state belongs to {s.graph.name}, not {g.name}")
    if len(s.infected) != g.order():
        raise DomainMismatch("state length does not match the graph order")


def step(g, s, rule):
    """One synchronous round under ``rule`` at round index ``s.round``."""
    _check_domain(g, s)
    need = rule.need(g.degrees, s.round)
    cnt = neighbour_counts(g, s.infected)
    nxt = s.infected | (cnt >= need)
    added = int(nxt.sum() - s.infected.sum())
    return InfectionState(g, nxt, s.round + 1, s.newly_infected_per_round + (added,))


def closure(g, A0, rule, max_rounds=None, record=False):
    """Iterate ``step`` to a fixed point (or raise past ``max_rounds``)."""
    _check_domain(g, A0)
    if max_rounds is None:
        max_rounds = g.order() + (rule.k if rule.kind == "boot" else 0)
    if max_rounds < 1:
        raise InvalidSpec("max_rounds must be >= 1")
    s = A0
    sizes = [s.size]
    history = [s.infected] if record else []
    done = 0
    while True:
        nxt = step(g, s, rule)
        if nxt.newly_infected_per_round[-1] == 0:
            break
        if done == max_rounds:
            raise RoundBudgetExceeded(f"not stable after {max_rounds} rounds")
        s = nxt
        done += 1
        sizes.append(s.size)
        if record:
            history.append(s.infected)
    return ClosureTrace(
        final=s,
        rounds_to_stabilise=done,
        percolated=bool(s.infected.all()),
        sizes=tuple(sizes),
        history=tuple(history),
        rule=rule,
    )


def percolates(g, A0, rule):
    _check_domain(g, A0)
    return bool(percolate_batch(g, rule, A0.infected[None, :])[0])


# ---------------------------------------------------------------------------
# batched paths


def _chunks(total, size):
    for start in range(0, total, size):
        yield start, min(size, total - start)


def map_chunks(fn, ntrials, chunk=4096, workers=1):
    """Apply ``fn(start, count)`` over trial chunks; results in chunk order."""
    parts = list(_chunks(ntrials, chunk))
    if workers <= 1 or len(parts) <= 1:
        return [fn(s, c) for s, c in parts]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda sc: fn(*sc), parts))


def closure_batch(g, rule, init, max_rounds=None):
    """Final states and stabilisation rounds for every row of ``init``."""
    indptr, indices = g.csr()
    init = np.ascontiguousarray(init, dtype=np.bool_)
    if init.shape[-1] != len(indptr) - 1:
        raise DomainMismatch("batch width does not match the graph order")
    rows = rule.need_rows(g.degrees)
    if max_rounds is None:
        max_rounds = g.order() + rows.shape[0]
    final = np.empty_like(init)
    rounds = np.empty(init.shape[0], dtype=np.int64)
    changed = np.empty(init.shape[0], dtype=np.bool_)
    kernels.sync_closure(indptr, indices, rows, init, max_rounds, final, rounds, changed)
    if changed.any():
        raise RoundBudgetExceeded(f"not stable after {max_rounds} rounds")
    return final, rounds


def percolate_batch(g, rule, init):
    indptr, indices = g.csr()
    init = np.ascontiguousarray(init, dtype=np.bool_)
    if init.shape[-1] != len(indptr) - 1:
        raise DomainMismatch("batch width does not match the graph order")
    if rule.static:
        final = np.empty_like(init)
        kernels.static_closure(indptr, indices, rule.need(g.degrees), init, final)
    else:
        final, _ = closure_batch(g, rule, init)
    return final.all(axis=1)


def count_percolating(g, rule, p, seed, ntrials, chunk=4096, workers=1):
    g.vertices()

    def run(start, count):
        return int(percolate_batch(g, rule, initial_batch(g, p, seed, start, count)).sum())

    return sum(map_chunks(run, ntrials, chunk, workers))


def coupled_thresholds(g, rule, seed, ntrials, trial0=0, chunk=4096, workers=1):
    """Per-trial critical densities p*_t (trial t percolates at p iff p > p*_t).

    Only valid for round-independent rules; the closure is monotone and
    order-free there, so seeding vertices one at a time is exact.
    """
    if not rule.static:
        raise InvalidSpec("coupled thresholds need a round-independent rule")
    indptr, indices = g.csr()
    need = rule.need(g.degrees)
    keys = g.keys
    s = as_seed(seed)

    def run(start, count):
        pstar = np.empty(count, dtype=np.float64)
        kstar = np.empty(count, dtype=np.int64)
        kernels.coupled_thresholds(indptr, indices, need, keys, s, np.uint64(trial0 + start), count, pstar, kstar)
        return pstar

    return np.concatenate(map_chunks(run, ntrials, chunk, workers)) if ntrials else np.zeros(0)
