"""Percolation probability, threshold location and the closed-form bounds.

Monte Carlo estimates share per-vertex uniforms across densities: trial t
infects v at density p exactly when u(seed, t, v) < p.  Every curve built
from one seed is therefore pathwise non-decreasing in p.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .engine import Rule, count_percolating, coupled_thresholds, percolate_batch
from .errors import DomainError, ExplicitScaleExceeded, InvalidSpec, NoCrossing
from .graphs import make_graph

EXACT_LIMIT = 24
EDGE = 1e-6


def _ci95(phi, trials):
    return 1.96 * math.sqrt(phi * (1.0 - phi) / trials)


@dataclass(frozen=True)
class PhiEstimate:
    p: float
    trials: int
    percolated: int
    phi_hat: float
    ci_halfwidth_95: float
    rule: Rule

    @classmethod
    def from_count(cls, p, trials, percolated, rule):
        phi = percolated / trials
        return cls(float(p), trials, int(percolated), phi, _ci95(phi, trials), rule)

    @property
    def sigma(self):
        return math.sqrt(self.phi_hat * (1 - self.phi_hat) / self.trials)

    def to_json(self):
        return {
            "p": self.p,
            "trials": self.trials,
            "percolated": self.percolated,
            "phi_hat": self.phi_hat,
            "ci_halfwidth_95": self.ci_halfwidth_95,
            "rule": str(self.rule),
        }


@dataclass(frozen=True)
class PcEstimate:
    p_lo: float
    p_hi: float
    trials: int
    tolerance: float
    probes: tuple = field(repr=False)

    @property
    def midpoint(self):
        return 0.5 * (self.p_lo + self.p_hi)

    def to_json(self):
        return {
            "p_lo": self.p_lo,
            "p_hi": self.p_hi,
            "trials": self.trials,
            "tolerance": self.tolerance,
            "probes": [e.to_json() for e in self.probes],
        }


# ---------------------------------------------------------------------------
# estimation


def _check_p(p):
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise InvalidSpec(f"probability {p} outside [0, 1]")


def estimate_phi(g, p, rule, trials, seed, workers=1):
    """Fraction of ``trials`` seeded p-random sets that percolate."""
    _check_p(p)
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    g.vertices()
    hits = count_percolating(g, rule, p, seed, trials, workers=workers)
    return PhiEstimate.from_count(p, trials, hits, rule)


class CoupledCurve:
    """Phi-hat(p) for one seed and trial budget, evaluated at any p.

    Round-independent rules reduce each trial to its critical density, so a
    probe is a count.  Round-dependent rules fall back to direct closures,
    which are still coupled because the uniforms are shared.
    """

    def __init__(self, g, rule, trials, seed, workers=1):
        if trials < 1:
            raise InvalidSpec("trials must be >= 1")
        self.g, self.rule, self.trials, self.seed, self.workers = g, rule, trials, seed, workers
        g.vertices()
        self.pstar = np.sort(coupled_thresholds(g, rule, seed, trials, workers=workers)) if rule.static else None

    def count(self, p):
        _check_p(p)
        if self.pstar is not None:
            return int(np.searchsorted(self.pstar, p, side="left"))
        return count_percolating(self.g, self.rule, p, self.seed, self.trials, workers=self.workers)

    def __call__(self, p):
        return PhiEstimate.from_count(p, self.trials, self.count(p), self.rule)


def find_pc(g, rule, trials, tol, seed, workers=1, max_probes=200):
    """Bisection bracket [p_lo, p_hi] with Phi-hat(p_lo) < 1/2 <= Phi-hat(p_hi)."""
    if tol <= 0:
        raise InvalidSpec("tolerance must be positive")
    curve = CoupledCurve(g, rule, trials, seed, workers)
    lo, hi = 0.0, 1.0 - EDGE
    probes = [curve(lo), curve(hi)]
    if probes[0].phi_hat >= 0.5:
        raise NoCrossing(f"Phi-hat(0) = {probes[0].phi_hat} already >= 1/2")
    if probes[1].phi_hat < 0.5:
        raise NoCrossing(f"Phi-hat(1 - {EDGE}) = {probes[1].phi_hat} < 1/2 at {trials} trials")
    while hi - lo > tol and len(probes) < max_probes:
        mid = 0.5 * (lo + hi)
        e = curve(mid)
        probes.append(e)
        if e.phi_hat >= 0.5:
            hi = mid
        else:
            lo = mid
    return PcEstimate(lo, hi, trials, tol, tuple(probes))


@lru_cache(maxsize=32)
def _subset_counts(name, nbr_masks, need_rows):
    return kernels.percolating_by_size(np.array(nbr_masks, dtype=np.int64), np.array(need_rows, dtype=np.int64))


def percolating_counts(g, rule):
    """N_k = number of percolating initial sets of size k, k = 0..|V|."""
    n = g.order()
    if n > EXACT_LIMIT:
        raise ExplicitScaleExceeded(f"exact enumeration needs |V| <= {EXACT_LIMIT}, got {n}")
    indptr, indices = g.csr()
    masks = tuple(int(sum(1 << int(w) for w in indices[indptr[v] : indptr[v + 1]])) for v in range(n))
    rows = tuple(tuple(int(a) for a in r) for r in rule.need_rows(g.degrees))
    return _subset_counts(g.name, masks, rows)


def exact_phi_small(g, p, rule):
    """Sum over all 2^|V| initial sets of [percolates] p^|A| (1-p)^(|V|-|A|)."""
    _check_p(p)
    counts = percolating_counts(g, rule)
    n = len(counts) - 1
    k = np.arange(n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(counts > 0, counts * np.power(p, k) * np.power(1.0 - p, n - k), 0.0)
    return float(w.sum())


# ---------------------------------------------------------------------------
# sweeps


def parse_grid(text):
    """``start:stop:count`` (inclusive linspace) or a comma list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, c = text.split(":")
            grid = np.linspace(float(a), float(b), int(c))
        else:
            grid = np.array([float(t) for t in text.split(",") if t.strip()])
    except ValueError:
        raise InvalidSpec(f"bad p grid {text!r}") from None
    if grid.size == 0 or np.any(grid < 0) or np.any(grid > 1):
        raise InvalidSpec("p grid must be non-empty and inside [0, 1]")
    return [round(float(p), 12) for p in grid]


CSV_COLUMNS = ("graph", "rule", "p", "trials", "percolated", "phi_hat", "ci95", "seed")


def sweep(g, rule, p_grid, trials, seed, out_path=None, workers=1, header=None):
    """One coupled PhiEstimate per grid point; optionally written as CSV."""
    curve = CoupledCurve(g, rule, trials, seed, workers)
    rows = [curve(p) for p in p_grid]
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            write_sweep_csv(fh, g, rule, rows, seed, header)
    return rows


def write_sweep_csv(fh, g, rule, rows, seed, header=None):
    fh.write("# logarithms: natural\n")
    for key, val in (header or {}).items():
        fh.write(f"# {key}: {val}\n")
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    for e in rows:
        wr.writerow([g.name, str(rule), repr(e.p), e.trials, e.percolated, repr(e.phi_hat), repr(e.ci_halfwidth_95), seed])


def crossings(rows):
    """Grid intervals where Phi-hat passes from below 1/2 to at least 1/2."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if (a.phi_hat < 0.5) != (b.phi_hat < 0.5):
            out.append((a, b))
    return out


def crossing_point(a, b):
    """Linear interpolation of the 1/2 level between two probes."""
    if b.phi_hat == a.phi_hat:
        return 0.5 * (a.p + b.p)
    return a.p + (0.5 - a.phi_hat) * (b.p - a.p) / (b.phi_hat - a.phi_hat)


# ---------------------------------------------------------------------------
# closed forms


def critical_formula(ell, lam):
    """f(l, lambda) = 1/2 - sqrt(ln l / l)/2 + lambda ln ln l / sqrt(l ln l)."""
    if ell < 3:
        raise DomainError("the critical-window formula needs l >= 3")
    ll = math.log(ell)
    return 0.5 - 0.5 * math.sqrt(ll / ell) + lam * math.log(ll) / math.sqrt(ell * ll)


TAIL_KINDS = ("chernoff_additive", "chernoff_multiplicative", "normal_tail", "hoeffding_weighted")


def tail_bound(kind, **params):
    """Evaluate one of the standard tail bounds.

    chernoff_additive(d, t): 2 exp(-2 t^2 / d)
    chernoff_multiplicative(d, p, b): (e / b)^(b d p)
    normal_tail(f): exp(-f^2 / 2) / (f sqrt(2 pi))
    hoeffding_weighted(ds, tau): exp(-2 tau^2 / sum_i i^2 d_i), ds = (d_1, ..., d_k)
    """
    try:
        if kind == "chernoff_additive":
            d, t = float(params["d"]), float(params["t"])
            if d < 1 or t < 0:
                raise DomainError("chernoff_additive needs d >= 1 and t >= 0")
            return 2.0 * math.exp(-2.0 * t * t / d)
        if kind == "chernoff_multiplicative":
            d, p, b = float(params["d"]), float(params["p"]), float(params["b"])
            if d < 1 or not 0 < p < 1 or b < 1:
                raise DomainError("chernoff_multiplicative needs d >= 1, 0 < p < 1, b >= 1")
            return (math.e / b) ** (b * d * p)
        if kind == "normal_tail":
            f = float(params["f"])
            if f <= 0:
                raise DomainError("normal_tail needs f > 0")
            return math.exp(-f * f / 2.0) / (f * math.sqrt(2.0 * math.pi))
        if kind == "hoeffding_weighted":
            ds = [float(a) for a in params["ds"]]
            tau = float(params["tau"])
            if not ds or any(a < 0 for a in ds) or tau <= 0:
                raise DomainError("hoeffding_weighted needs non-negative d_1..d_k and tau > 0")
            D = sum((i + 1) ** 2 * a for i, a in enumerate(ds))
            if D <= 0:
                raise DomainError("hoeffding_weighted needs sum i^2 d_i > 0")
            return math.exp(-2.0 * tau * tau / D)
    except KeyError as exc:
        raise DomainError(f"{kind}: missing parameter {exc.args[0]}") from None
    raise DomainError(f"unknown tail bound {kind!r}; choose from {', '.join(TAIL_KINDS)}")


# ---------------------------------------------------------------------------
# star-product layers


@dataclass(frozen=True)
class StarLayerReport:
    n: int
    q: int
    layers: tuple
    i0: int
    i1: int
    degree_split_verified: bool | None = None
    deterministic_percolation: bool | None = None

    def to_json(self):
        return {
            "n": self.n,
            "q": self.q,
            "i0": self.i0,
            "i1": self.i1,
            "total_vertices": sum(r["size"] for r in self.layers),
            "layers": list(self.layers),
            "degree_split_verified": self.degree_split_verified,
            "deterministic_percolation_from_L_0_to_i1": self.deterministic_percolation,
        }


def star_layers(n, q):
    i1 = n // (q + 1)
    rows = []
    for i in range(n + 1):
        rows.append({
            "i": i,
            "size": math.comb(n, i) * q ** (n - i),
            "n_plus": n - i,
            "n_minus": i * q,
            "degree": i * q + n - i,
            "downward_majority": i * q > n - i,
        })
    return tuple(rows), math.ceil(n ** (5 / 6)), i1


def layer_array(g):
    digits = np.zeros(g.order(), dtype=np.int64)
    codes = np.asarray(g._codes_array, dtype=np.int64)
    for i in range(g.dim):
        digits += ((codes // g.place[i]) % g.radix[i] == 0).astype(np.int64)
    return digits


def layer_degree_split(g):
    """(ok, up, down): exhaustive counts of neighbours one layer up and down."""
    lay = layer_array(g)
    indptr, indices = g.csr()
    src = np.repeat(np.arange(g.order()), np.diff(indptr))
    diff = lay[indices] - lay[src]
    up = np.bincount(src[diff == 1], minlength=g.order())
    down = np.bincount(src[diff == -1], minlength=g.order())
    n, q = g.dim, g.factors[0].size - 1
    ok = bool(np.all(up == n - lay) and np.all(down == lay * q) and np.all(np.abs(diff) == 1))
    return ok, up, down


def star_layer_report(n, q, run_deterministic=False, max_vertices=None):
    if n < 1 or q < 1:
        raise InvalidSpec("stars need n >= 1 and q >= 1")
    rows, i0, i1 = star_layers(n, q)
    split = perc = None
    if run_deterministic:
        g = make_graph(f"stars:n={n},q={q}", max_vertices=max_vertices)
        g.vertices()
        split = layer_degree_split(g)[0]
        seed_set = layer_array(g) <= i1
        perc = bool(percolate_batch(g, Rule.majority(), seed_set[None, :])[0])
    return StarLayerReport(n, q, rows, i0, i1, split, perc)

