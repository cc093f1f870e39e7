"""Exact-locality Monte Carlo for Pr[x in A_t] on graphs too large to enumerate.

x's state after t rounds depends only on A_0 restricted to B(x, t).  Round j
re-evaluates only B(x, t - j), whose neighbourhoods lie inside the sampled
ball, so the indicator has exactly the full-graph distribution.  Draws use
the same (seed, trial, vertex key) triples as full-graph sampling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .engine import map_chunks, neighbour_counts
from .errors import InvalidRound, InvalidSpec
from .graphs import DEFAULT_MAX_BALL
from .rng import uniforms


@dataclass(frozen=True)
class LocalEstimate:
    vertex: object
    t: int
    p: float
    trials: int
    hits: int
    estimate: float
    ci_halfwidth_95: float

    @classmethod
    def from_hits(cls, vertex, t, p, trials, hits):
        est = hits / trials
        return cls(vertex, t, p, trials, hits, est, 1.96 * math.sqrt(est * (1 - est) / trials))

    @property
    def sigma(self):
        return math.sqrt(self.estimate * (1 - self.estimate) / self.trials)

    def to_json(self, g=None):
        out = asdict(self)
        if g is not None:
            out["vertex"] = g.format_vertex(self.vertex)
        return out


class LocalProblem:
    """Ball-restricted evolution tables for one (graph, x, t, rule)."""

    def __init__(self, g, x, t, rule, max_members=DEFAULT_MAX_BALL):
        if t < 0:
            raise InvalidRound("t must be >= 0")
        self.g, self.t, self.rule = g, t, rule
        self.ball = g.ball(x, t, max_members)
        self.x = self.ball.center
        members = list(self.ball.members)
        self.members = members
        pos = {v: i for i, v in enumerate(members)}
        dist = np.fromiter(self.ball.members.values(), dtype=np.int64, count=len(members))
        self.dist = dist
        inner = [v for v in members if self.ball.members[v] <= t - 1]
        nbrs = [g.neighbors(v) for v in inner]
        maxdeg = max((len(nb) for nb in nbrs), default=0)
        table = np.full((len(members), max(maxdeg, 1)), -1, dtype=np.int64)
        deg = np.zeros(len(members), dtype=np.int64)
        for v, nb in zip(inner, nbrs):
            i = pos[v]
            # horizon rule: every neighbour of an updated vertex is inside the ball
            table[i, : len(nb)] = [pos[w] for w in nb]
            deg[i] = len(nb)
        self.nbr = table
        self.need_rows = np.stack([rule.need(deg, ell) for ell in range(max(t, 1))])
        updates = np.full((t, len(members)), -1, dtype=np.int64)
        for j in range(1, t + 1):
            ids = np.flatnonzero(dist <= t - j)
            assert np.all(dist[ids] <= t - j)
            updates[j - 1, : len(ids)] = ids
        self.updates = updates
        self.keys = np.fromiter((g.key(v) for v in members), dtype=np.uint64, count=len(members))

    def run(self, p, seed, trial0, count):
        init = uniforms(seed, self.keys, trial0, count) < p
        if self.t == 0:
            return init[:, 0].copy()
        out = np.empty(count, dtype=np.bool_)
        kernels.local_rounds(self.nbr, self.need_rows, self.updates, init, out)
        return out


def local_round_prob(g, x, t, p, rule, trials, seed, workers=1, chunk=8192):
    """Estimate Pr[x in A_t] from ``trials`` independent ball-restricted runs."""
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec(f"probability {p} outside [0, 1]")
    prob = LocalProblem(g, x, t, rule)
    hits = sum(map_chunks(lambda s, c: int(prob.run(p, seed, s, c).sum()), trials, chunk, workers))
    return LocalEstimate.from_hits(prob.x, t, p, trials, hits)


def local_indicators(g, x, t, p, rule, trials, seed, trial0=0):
    """Per-trial indicators of x in A_t (ball-restricted route)."""
    return LocalProblem(g, x, t, rule).run(p, seed, trial0, trials)


def full_indicators(g, x, t, p, rule, trials, seed, trial0=0, chunk=2048):
    """Per-trial indicators of x in A_t from whole-graph synchronous rounds."""
    from .engine import initial_batch

    xi = g.index_of(x)
    out = []
    for start, count in ((s, min(chunk, trials - s)) for s in range(0, trials, chunk)):
        a = initial_batch(g, p, seed, trial0 + start, count)
        for ell in range(t):
            a = a | (neighbour_counts(g, a) >= rule.need(g.degrees, ell))
        out.append(a[:, xi])
    return np.concatenate(out)
