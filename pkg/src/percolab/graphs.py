"""Implicit graph families with canonical vertex encodings.

Vertices are plain hashable values:

* hypercube, generalised hypercube, Cartesian products, star products and
  middle layers use non-negative ``int`` codes.  Product codes are
  mixed-radix words with coordinate 1 in the least significant place, so a
  star product over ``K_{1,q}`` is a base-(q+1) word (digit 0 = centre) and
  a hypercube vertex is an n-bit integer with coordinate 1 at bit 0.
* permutahedra (and their coset subgraphs) use tuples holding the one-line
  word of the permutation, images in ``1..N``.

Every handle is immutable; enumeration, CSR adjacency and key arrays are
computed lazily and cached.
"""

from __future__ import annotations

import itertools
import math
import os
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BallTooLarge,
    ExplicitScaleExceeded,
    InvalidDistance,
    InvalidPermutation,
    InvalidSpec,
    InvalidVertex,
    UnsupportedFamily,
)
from .rng import fold_key

DEFAULT_MAX_VERTICES = 1 << 24
DEFAULT_MAX_BALL = 1 << 20


def max_vertices_default():
    env = os.environ.get("PERCOLAB_MAX_VERTICES")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidSpec(f"PERCOLAB_MAX_VERTICES={env!r} is not an integer")
    return DEFAULT_MAX_VERTICES


# ---------------------------------------------------------------------------
# specs


FAMILIES = ("hypercube", "genhypercube", "permutahedron", "stars", "product", "middlelayers")


@dataclass(frozen=True)
class GraphSpec:
    """A named family plus its integer parameters.

    ``factors`` is only used by ``product`` and holds ``(kind, m)`` pairs:
    ``("k", m)`` is the complete graph K_m and ``("q", m)`` the star K_{1,m}.
    """

    family: str
    n: int | None = None
    k: int | None = None
    q: int | None = None
    factors: tuple = ()

    def __post_init__(self):
        f = self.family
        if f not in FAMILIES:
            raise InvalidSpec(f"unknown graph family {f!r}")

        def need(name, lo=1):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or isinstance(val, bool) or val < lo:
                raise InvalidSpec(f"{f}: parameter {name} must be an integer >= {lo}, got {val!r}")

        if f in ("hypercube", "permutahedron"):
            need("n")
        elif f == "genhypercube":
            need("n")
            need("k")
            if self.k > self.n:
                raise InvalidSpec(f"genhypercube: need 1 <= k <= n, got k={self.k}, n={self.n}")
        elif f == "stars":
            need("n")
            need("q")
        elif f == "middlelayers":
            need("k")
        elif f == "product":
            if not self.factors:
                raise InvalidSpec("product: at least one factor required")
            for kind, m in self.factors:
                if kind == "k" and m >= 2:
                    continue
                if kind == "q" and m >= 1:
                    continue
                raise InvalidSpec(f"product: bad factor {kind}{m}")

    def __str__(self):
        f = self.family
        if f == "hypercube":
            return f"hypercube:n={self.n}"
        if f == "genhypercube":
            return f"genhypercube:n={self.n},k={self.k}"
        if f == "permutahedron":
            return f"permutahedron:n={self.n}"
        if f == "stars":
            return f"stars:n={self.n},q={self.q}"
        if f == "middlelayers":
            return f"middlelayers:k={self.k}"
        parts = []
        for kind, grp in itertools.groupby(self.factors):
            cnt = len(list(grp))
            tok = f"{kind[0]}{kind[1]}"
            parts.append(tok if cnt == 1 else f"{tok}^{cnt}")
        return "product:" + ",".join(parts)


_FACTOR_RE = re.compile(r"^([kq])(\d+)(?:\^(\d+))?$")


def parse_graph_spec(text):
    """Parse ``family:key=val,...`` (or ``product:q3^4,k2``) into a GraphSpec."""
    text = text.strip()
    if ":" not in text:
        raise InvalidSpec(f"graph spec {text!r} must look like family:params")
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    if family == "product":
        factors = []
        for tok in filter(None, (t.strip() for t in rest.split(","))):
            m = _FACTOR_RE.match(tok)
            if not m:
                raise InvalidSpec(f"product factor {tok!r} must look like q3, k2 or q3^4")
            rep = int(m.group(3)) if m.group(3) else 1
            if rep < 1:
                raise InvalidSpec(f"product factor {tok!r}: exponent must be >= 1")
            factors.extend([(m.group(1), int(m.group(2)))] * rep)
        return GraphSpec("product", factors=tuple(factors))
    params = {}
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        key, eq, val = tok.partition("=")
        if not eq:
            raise InvalidSpec(f"parameter {tok!r} must look like key=value")
        try:
            params[key.strip()] = int(val)
        except ValueError:
            raise InvalidSpec(f"parameter {tok!r} is not an integer")
    allowed = {
        "hypercube": {"n"},
        "genhypercube": {"n", "k"},
        "permutahedron": {"n"},
        "stars": {"n", "q"},
        "middlelayers": {"k"},
    }
    if family not in allowed:
        raise InvalidSpec(f"unknown graph family {family!r}")
    extra = set(params) - allowed[family]
    if extra:
        raise InvalidSpec(f"{family}: unexpected parameters {sorted(extra)}")
    return GraphSpec(family, **params)


# ---------------------------------------------------------------------------
# views


@dataclass(frozen=True)
class BallView:
    center: object
    radius: int
    members: dict
    spheres: tuple

    def sphere(self, ell):
        if ell < 0 or ell >= len(self.spheres):
            return ()
        return self.spheres[ell]

    def within(self, ell):
        return [v for v, d in self.members.items() if d <= ell]

    def __len__(self):
        return len(self.members)

    def __contains__(self, v):
        return v in self.members


@dataclass(frozen=True)
class TypicalityOracle:
    graph: "Graph"
    root: object

    def __call__(self, v):
        return self.graph.is_typical(self.root, v)


# ---------------------------------------------------------------------------
# base class


class Graph:
    """Immutable adjacency oracle over canonically encoded vertices."""

    family = "abstract"

    def __init__(self, spec=None, max_vertices=None):
        self.spec = spec
        self.max_vertices = max_vertices_default() if max_vertices is None else int(max_vertices)

    # -- to be provided by subclasses
    def contains(self, v):
        raise NotImplementedError

    def _neighbors(self, v):
        raise NotImplementedError

    def _enumerate(self):
        raise NotImplementedError

    def order(self):
        raise NotImplementedError

    def min_degree(self):
        raise NotImplementedError

    def max_degree(self):
        raise NotImplementedError

    def key(self, v):
        return fold_key(v)

    def parse_vertex(self, text):
        raise NotImplementedError

    def format_vertex(self, v):
        return str(v)

    def root(self):
        """Canonical default vertex (the smallest code)."""
        raise NotImplementedError

    def random_vertex(self, rng):
        """Uniform vertex drawn with a numpy Generator."""
        return self.vertices()[int(rng.integers(self.order()))]

    def _typical(self, x, y):
        raise UnsupportedFamily(f"{self.name}: no typical-vertex rule")

    def _project(self, x, y, ell):
        raise UnsupportedFamily(f"{self.name}: no projection subgraphs")

    # -- generic API
    @property
    def name(self):
        return str(self.spec) if self.spec is not None else self.family

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def check(self, v):
        if not self.contains(v):
            raise InvalidVertex(f"{v!r} is not a vertex of {self.name}")
        return v

    def neighbors(self, v):
        return self._neighbors(self.check(v))

    def degree(self, v):
        return len(self.neighbors(v))

    def vertices(self):
        return self._vertex_list

    @cached_property
    def _vertex_list(self):
        n = self.order()
        if n > self.max_vertices:
            raise ExplicitScaleExceeded(
                f"{self.name} has {n} vertices, above the explicit-scale cap {self.max_vertices}"
            )
        return list(self._enumerate())

    @cached_property
    def _index(self):
        return {v: i for i, v in enumerate(self.vertices())}

    def index_of(self, v):
        try:
            return self._index[v]
        except KeyError:
            raise InvalidVertex(f"{v!r} is not a vertex of {self.name}") from None

    def indices_of(self, vs):
        return np.fromiter((self.index_of(v) for v in vs), dtype=np.int64)

    def csr(self):
        """(indptr, indices) over the enumeration order; neighbours sorted."""
        return self._csr

    @cached_property
    def _csr(self):
        vs = self.vertices()
        indptr = np.zeros(len(vs) + 1, dtype=np.int64)
        cols = []
        for i, v in enumerate(vs):
            nb = self._neighbors(v)
            indptr[i + 1] = indptr[i] + len(nb)
            cols.extend(self._index[w] for w in nb)
        indices = np.asarray(cols, dtype=np.int64)
        return indptr, indices

    @cached_property
    def degrees(self):
        indptr, _ = self.csr()
        return np.diff(indptr)

    @cached_property
    def keys(self):
        return np.fromiter((self.key(v) for v in self.vertices()), dtype=np.uint64, count=self.order())

    def distance(self, x, y):
        """Graph distance; subclasses override with closed forms."""
        x = self.check(x)
        y = self.check(y)
        if x == y:
            return 0
        seen = {x}
        frontier = [x]
        d = 0
        while frontier:
            d += 1
            nxt = []
            for v in frontier:
                for w in self._neighbors(v):
                    if w == y:
                        return d
                    if w not in seen:
                        seen.add(w)
                        nxt.append(w)
            frontier = nxt
        raise InvalidDistance(f"{y!r} is unreachable from {x!r}")

    def ball(self, x, r, max_members=DEFAULT_MAX_BALL):
        """BFS-exact ball of radius ``r`` around ``x``."""
        x = self.check(x)
        if r < 0:
            raise InvalidDistance("ball radius must be >= 0")
        members = {x: 0}
        spheres = [(x,)]
        frontier = [x]
        for d in range(1, r + 1):
            nxt = set()
            for v in frontier:
                for w in self._neighbors(v):
                    if w not in members:
                        nxt.add(w)
            if not nxt:
                break
            if len(members) + len(nxt) > max_members:
                raise BallTooLarge(f"B({self.format_vertex(x)}, {r}) exceeds {max_members} members")
            layer = tuple(sorted(nxt))
            for w in layer:
                members[w] = d
            spheres.append(layer)
            frontier = layer
        return BallView(center=x, radius=r, members=members, spheres=tuple(spheres))

    def is_typical(self, x, y):
        x = self.check(x)
        y = self.check(y)
        if x == y:
            return True
        return self._typical(x, y)

    def typicality(self, root):
        self.check(root)
        # probe once so unsupported families fail at construction
        self._typical_supported()
        return TypicalityOracle(self, root)

    def _typical_supported(self):
        return True

    def projection(self, x, y, ell):
        x = self.check(x)
        y = self.check(y)
        if self.distance(x, y) != ell:
            raise InvalidDistance(f"dist({self.format_vertex(x)}, {self.format_vertex(y)}) != {ell}")
        return self._project(x, y, ell)


# ---------------------------------------------------------------------------
# products


@dataclass(frozen=True)
class Factor:
    """Small explicit base graph on vertices 0..m-1."""

    label: str
    adj: tuple
    dist: tuple = field(default=(), compare=False)

    @classmethod
    def build(cls, label, adj):
        adj = tuple(tuple(sorted(a)) for a in adj)
        m = len(adj)
        table = []
        for s in range(m):
            d = [-1] * m
            d[s] = 0
            dq = deque([s])
            while dq:
                v = dq.popleft()
                for w in adj[v]:
                    if d[w] < 0:
                        d[w] = d[v] + 1
                        dq.append(w)
            table.append(tuple(d))
        return cls(label, adj, tuple(table))

    @property
    def size(self):
        return len(self.adj)


def complete_factor(m):
    return Factor.build(f"k{m}", [[j for j in range(m) if j != i] for i in range(m)])


def star_factor(q):
    return Factor.build(f"q{q}", [list(range(1, q + 1))] + [[0] for _ in range(q)])


class ProductGraph(Graph):
    """Cartesian product of small factors, optionally with fixed coordinates.

    A non-empty ``fixed`` mapping (coordinate -> digit) gives a face of the
    product: the subgraph induced on vertices agreeing with ``fixed``.
    """

    family = "product"

    def __init__(self, factors, fixed=None, spec=None, max_vertices=None):
        super().__init__(spec, max_vertices)
        self.factors = tuple(factors)
        self.dim = len(self.factors)
        self.radix = tuple(f.size for f in self.factors)
        place = [1]
        for r in self.radix[:-1]:
            place.append(place[-1] * r)
        self.place = tuple(place)
        self.fixed = dict(sorted((fixed or {}).items()))
        self.free = tuple(i for i in range(self.dim) if i not in self.fixed)
        for i, a in self.fixed.items():
            if not 0 <= a < self.radix[i]:
                raise InvalidSpec(f"fixed digit {a} out of range for coordinate {i + 1}")
        self.is_star_product = all(f.label.startswith("q") for f in self.factors)

    @property
    def name(self):
        base = str(self.spec) if self.spec is not None else "product:" + ",".join(f.label for f in self.factors)
        if self.fixed:
            fx = ",".join(f"{i + 1}={a}" for i, a in self.fixed.items())
            return f"{base}[{fx}]"
        return base

    def digits(self, v):
        out = []
        for r in self.radix:
            v, d = divmod(v, r)
            out.append(d)
        return tuple(out)

    def vertex(self, digits):
        digits = tuple(int(d) for d in digits)
        if len(digits) != self.dim:
            raise InvalidVertex(f"expected {self.dim} coordinates, got {len(digits)}")
        code = 0
        for d, r, p in zip(digits, self.radix, self.place):
            if not 0 <= d < r:
                raise InvalidVertex(f"digit {d} out of range 0..{r - 1}")
            code += d * p
        return self.check(code)

    def contains(self, v):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 0:
            return False
        if v >= self.place[-1] * self.radix[-1]:
            return False
        if self.fixed:
            dg = self.digits(v)
            return all(dg[i] == a for i, a in self.fixed.items())
        return True

    def _neighbors(self, v):
        out = []
        for i in self.free:
            p, r = self.place[i], self.radix[i]
            a = (v // p) % r
            for b in self.factors[i].adj[a]:
                out.append(v + (b - a) * p)
        out.sort()
        return out

    def order(self):
        return math.prod(self.radix[i] for i in self.free)

    def min_degree(self):
        return sum(min(len(a) for a in self.factors[i].adj) for i in self.free)

    def max_degree(self):
        return sum(max(len(a) for a in self.factors[i].adj) for i in self.free)

    def root(self):
        return sum(a * self.place[i] for i, a in self.fixed.items())

    def random_vertex(self, rng):
        code = self.root()
        for i in self.free:
            code += int(rng.integers(self.radix[i])) * self.place[i]
        return code

    def _codes(self):
        codes = np.array([self.root()], dtype=np.int64)
        for i in self.free:
            steps = np.arange(self.radix[i], dtype=np.int64) * self.place[i]
            codes = (codes[:, None] + steps[None, :]).ravel()
        codes.sort()
        return codes

    def _enumerate(self):
        return [int(c) for c in self._codes()]

    @cached_property
    def _codes_array(self):
        self.vertices()
        return self._codes()

    def index_of(self, v):
        if not self.fixed and self.contains(v):
            return int(v)
        return super().index_of(v)

    def indices_of(self, vs):
        arr = np.asarray(list(vs), dtype=np.int64)
        if not self.fixed:
            return arr
        codes = self._codes_array
        pos = np.searchsorted(codes, arr)
        if np.any(pos >= len(codes)) or np.any(codes[np.minimum(pos, len(codes) - 1)] != arr):
            raise InvalidVertex("vertex outside the face")
        return pos

    @cached_property
    def _csr(self):
        codes = self._codes_array
        n = len(codes)
        src, dst = [], []
        for i in self.free:
            p, r = self.place[i], self.radix[i]
            dig = (codes // p) % r
            for a in range(r):
                rows = np.nonzero(dig == a)[0]
                for b in self.factors[i].adj[a]:
                    src.append(rows)
                    dst.append(codes[rows] + (b - a) * p)
        if src:
            src = np.concatenate(src)
            dst = np.concatenate(dst)
        else:
            src = np.zeros(0, dtype=np.int64)
            dst = np.zeros(0, dtype=np.int64)
        dst_idx = dst if not self.fixed else np.searchsorted(codes, dst)
        order = np.lexsort((dst_idx, src))
        indices = dst_idx[order].astype(np.int64)
        counts = np.bincount(src, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return indptr, indices

    @cached_property
    def keys(self):
        return self._codes_array.astype(np.uint64)

    def distance(self, x, y):
        self.check(x)
        self.check(y)
        dx, dy = self.digits(x), self.digits(y)
        return sum(self.factors[i].dist[a][b] for i, (a, b) in enumerate(zip(dx, dy)))

    def differing(self, x, y):
        """I(x, y): coordinates (0-based) where x and y differ."""
        return [i for i, (a, b) in enumerate(zip(self.digits(x), self.digits(y))) if a != b]

    def _typical(self, x, y):
        return len(self.differing(x, y)) == self.distance(x, y)

    def _project(self, x, y, ell):
        dy = self.digits(y)
        fixed = dict(self.fixed)
        for i in self.differing(x, y):
            fixed[i] = dy[i]
        return self._face(fixed)

    def _face(self, fixed):
        return ProductGraph(self.factors, fixed, spec=self.spec, max_vertices=self.max_vertices)

    def parse_vertex(self, text):
        text = text.strip()
        if "," in text or text.startswith("("):
            return self.vertex(int(t) for t in text.strip("()").split(",") if t.strip())
        try:
            return self.check(int(text))
        except ValueError:
            raise InvalidVertex(f"cannot parse vertex {text!r}") from None

    def format_vertex(self, v):
        return "(" + ",".join(str(d) for d in self.digits(v)) + ")"

    def layer(self, v):
        """Number of coordinates sitting at the star centre (digit 0)."""
        if not self.is_star_product:
            raise UnsupportedFamily(f"{self.name}: layers are defined for star products only")
        self.check(v)
        return sum(1 for d in self.digits(v) if d == 0)


class Hypercube(ProductGraph):
    """Q^n with XOR-based adjacency (independent of the generic product path)."""

    family = "hypercube"

    def __init__(self, n, fixed=None, spec=None, max_vertices=None):
        super().__init__([complete_factor(2)] * n, fixed, spec=spec, max_vertices=max_vertices)
        self.n = n
        self._free_bits = tuple(1 << i for i in self.free)

    def _neighbors(self, v):
        return sorted(v ^ b for b in self._free_bits)

    def min_degree(self):
        return len(self.free)

    max_degree = min_degree

    def distance(self, x, y):
        self.check(x)
        self.check(y)
        return (x ^ y).bit_count()

    def _typical(self, x, y):
        return True

    def _face(self, fixed):
        return Hypercube(self.n, fixed, spec=self.spec, max_vertices=self.max_vertices)

    @cached_property
    def _csr(self):
        codes = self._codes_array
        n = len(codes)
        nb = np.sort(codes[:, None] ^ np.asarray(self._free_bits, dtype=np.int64)[None, :], axis=1)
        idx = nb if not self.fixed else np.searchsorted(codes, nb)
        indptr = np.arange(n + 1, dtype=np.int64) * len(self._free_bits)
        return indptr, idx.ravel().astype(np.int64)

    def parse_vertex(self, text):
        text = text.strip()
        if re.fullmatch(r"[01]+", text) and len(text) == self.n:
            return self.vertex(int(c) for c in text)
        return super().parse_vertex(text)

    def format_vertex(self, v):
        return "".join(str(d) for d in self.digits(v))


# ---------------------------------------------------------------------------
# generalised hypercube


class GeneralisedHypercube(Graph):
    """Q^n_k: bit vectors adjacent when their Hamming distance is 1..k."""

    family = "genhypercube"

    def __init__(self, n, k, spec=None, max_vertices=None):
        super().__init__(spec, max_vertices)
        self.n, self.k = n, k
        masks = []
        for w in range(1, k + 1):
            for comb in itertools.combinations(range(n), w):
                masks.append(sum(1 << i for i in comb))
        self.masks = tuple(masks)
        self.deg = len(masks)

    def contains(self, v):
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and 0 <= v < (1 << self.n)

    def _neighbors(self, v):
        return sorted(v ^ m for m in self.masks)

    def order(self):
        return 1 << self.n

    def min_degree(self):
        return self.deg

    max_degree = min_degree

    def root(self):
        return 0

    def _enumerate(self):
        return range(1 << self.n)

    def index_of(self, v):
        return int(self.check(v))

    def indices_of(self, vs):
        return np.asarray(list(vs), dtype=np.int64)

    @cached_property
    def _csr(self):
        codes = np.arange(1 << self.n, dtype=np.int64)
        nb = np.sort(codes[:, None] ^ np.asarray(self.masks, dtype=np.int64)[None, :], axis=1)
        indptr = np.arange(len(codes) + 1, dtype=np.int64) * self.deg
        return indptr, nb.ravel()

    @cached_property
    def keys(self):
        return np.arange(1 << self.n, dtype=np.uint64)

    def distance(self, x, y):
        self.check(x)
        self.check(y)
        return -(-(x ^ y).bit_count() // self.k)

    def _typical_supported(self):
        raise UnsupportedFamily("genhypercube: no typical-vertex rule is defined")

    def parse_vertex(self, text):
        text = text.strip()
        if re.fullmatch(r"[01]+", text) and len(text) == self.n:
            return sum(1 << i for i, c in enumerate(text) if c == "1")
        try:
            return self.check(int(text))
        except ValueError:
            raise InvalidVertex(f"cannot parse vertex {text!r}") from None

    def format_vertex(self, v):
        return "".join("1" if v >> i & 1 else "0" for i in range(self.n))


# ---------------------------------------------------------------------------
# permutahedra


def _check_perm(p, size=None):
    p = tuple(int(a) for a in p)
    m = len(p)
    if (size is not None and m != size) or sorted(p) != list(range(1, m + 1)):
        raise InvalidPermutation(f"{p!r} is not a permutation word over [1..{size or m}]")
    return p


def inverse(p):
    inv = [0] * len(p)
    for pos, img in enumerate(p, 1):
        inv[img - 1] = pos
    return tuple(inv)


def relative(x, y):
    """x^{-1} y as a one-line word."""
    xinv = inverse(x)
    return tuple(xinv[a - 1] for a in y)


def inversion_pairs(n_letters):
    return [(a, b) for a in range(1, n_letters + 1) for b in range(a + 1, n_letters + 1)]


def inversion_vector(pi):
    """Characteristic vector of Inv(pi) over pairs {a<b} in lexicographic order.

    {a, b} is an inversion when the larger value b appears before a in the word.
    """
    pi = _check_perm(pi)
    pos = inverse(pi)
    return np.array([1 if pos[b - 1] < pos[a - 1] else 0 for a, b in inversion_pairs(len(pi))], dtype=np.uint8)


def inversion_count(pi):
    return sum(1 for i in range(len(pi)) for j in range(i + 1, len(pi)) if pi[i] > pi[j])


class PermutationGraph(Graph):
    """Cayley graph on words over [N] generated by position swaps (i, i+1), i in ``gens``.

    The vertex set is the component of ``base``: all words reachable by
    swapping adjacent positions whose generator is allowed.  With every
    generator allowed this is the permutahedron P_{N-1}; with a subset it
    is a product of smaller permutahedra (a coset subgraph).
    """

    family = "permutahedron"

    def __init__(self, letters, gens=None, base=None, spec=None, max_vertices=None):
        super().__init__(spec, max_vertices)
        self.letters = letters
        self.gens = tuple(sorted(range(1, letters) if gens is None else gens))
        if any(not 1 <= g < letters for g in self.gens):
            raise InvalidSpec("generator positions must lie in 1..N-1")
        self.base = tuple(range(1, letters + 1)) if base is None else _check_perm(base, letters)
        blocks, cur = [], [1]
        for pos in range(1, letters):
            if pos in self.gens:
                cur.append(pos + 1)
            else:
                blocks.append(tuple(cur))
                cur = [pos + 1]
        blocks.append(tuple(cur))
        self.blocks = tuple(blocks)
        self._block_sets = tuple(frozenset(self.base[p - 1] for p in b) for b in self.blocks)

    @property
    def name(self):
        base = str(self.spec) if self.spec is not None else f"permutations:N={self.letters}"
        if self.spec is None or len(self.gens) != self.letters - 1:
            return f"{base}[gens={','.join(map(str, self.gens))};base={','.join(map(str, self.base))}]"
        return base

    def contains(self, v):
        if not isinstance(v, tuple) or len(v) != self.letters:
            return False
        if sorted(v) != list(range(1, self.letters + 1)):
            return False
        return all(frozenset(v[p - 1] for p in b) == s for b, s in zip(self.blocks, self._block_sets))

    def check(self, v):
        if isinstance(v, (list, np.ndarray)):
            v = tuple(int(a) for a in v)
        if isinstance(v, tuple) and len(v) == self.letters and sorted(v) != list(range(1, self.letters + 1)):
            raise InvalidPermutation(f"{v!r} is not a permutation word")
        return super().check(v)

    def _neighbors(self, v):
        out = []
        for i in self.gens:
            w = list(v)
            w[i - 1], w[i] = w[i], w[i - 1]
            out.append(tuple(w))
        out.sort()
        return out

    def order(self):
        return math.prod(math.factorial(len(b)) for b in self.blocks)

    def min_degree(self):
        return len(self.gens)

    max_degree = min_degree

    def root(self):
        return min(self._enumerate_iter()) if self.gens else self.base

    def random_vertex(self, rng):
        w = list(self.base)
        for b in self.blocks:
            vals = [w[p - 1] for p in b]
            rng.shuffle(vals)
            for p, a in zip(b, vals):
                w[p - 1] = a
        return tuple(int(a) for a in w)

    def _enumerate_iter(self):
        per_block = [itertools.permutations([self.base[p - 1] for p in b]) for b in self.blocks]
        for choice in itertools.product(*per_block):
            yield tuple(itertools.chain.from_iterable(choice))

    def _enumerate(self):
        return sorted(self._enumerate_iter())

    def key(self, v):
        code = 0
        for a in v:
            code = code * (self.letters + 1) + a
        return fold_key(code)

    def distance(self, x, y):
        x = self.check(x)
        y = self.check(y)
        return inversion_count(relative(x, y))

    def _typical(self, x, y):
        sigma = relative(x, y)
        count = 0
        i = 0
        while i < self.letters:
            if sigma[i] == i + 1:
                i += 1
                continue
            # must be the swap of positions i+1, i+2 (1-based) via an allowed generator
            if i + 1 < self.letters and sigma[i] == i + 2 and sigma[i + 1] == i + 1 and (i + 1) in self.gens:
                count += 1
                i += 2
                continue
            return False
        return count == inversion_count(sigma)

    def blocked_generators(self, x, y):
        """I(y): generators whose support meets a position pair inverted by x^{-1}y."""
        sigma = relative(x, y)
        touched = set()
        for i in range(self.letters):
            for j in range(i + 1, self.letters):
                if sigma[i] > sigma[j]:
                    touched.update((i + 1, j + 1))
        return sorted(g for g in self.gens if g in touched or g + 1 in touched)

    def _project(self, x, y, ell):
        keep = [g for g in self.gens if g not in set(self.blocked_generators(x, y))]
        return PermutationGraph(self.letters, keep, base=y, spec=self.spec, max_vertices=self.max_vertices)

    def parse_vertex(self, text):
        text = text.strip().strip("()[]")
        if text in ("id", "identity"):
            return self.check(tuple(range(1, self.letters + 1)))
        parts = [t for t in re.split(r"[,\s]+", text) if t]
        if len(parts) == 1 and len(parts[0]) == self.letters and self.letters < 10:
            parts = list(parts[0])
        try:
            return self.check(tuple(int(t) for t in parts))
        except ValueError:
            raise InvalidVertex(f"cannot parse permutation {text!r}") from None

    def format_vertex(self, v):
        return "(" + ",".join(map(str, v)) + ")"


def compose(*words):
    """Product of permutation words, applied right to left as functions."""
    out = tuple(range(1, len(words[0]) + 1))
    for w in words:
        out = tuple(out[a - 1] for a in w)
    return out


def adjacent_transposition(letters, i):
    w = list(range(1, letters + 1))
    w[i - 1], w[i] = w[i], w[i - 1]
    return tuple(w)


# ---------------------------------------------------------------------------
# middle layers


class MiddleLayers(Graph):
    """k- and (k+1)-subsets of [2k+1] as bitmasks, adjacent by inclusion."""

    family = "middlelayers"

    def __init__(self, k, spec=None, max_vertices=None):
        super().__init__(spec, max_vertices)
        self.k = k
        self.size = 2 * k + 1

    def contains(self, v):
        return (
            isinstance(v, (int, np.integer))
            and not isinstance(v, bool)
            and 0 <= v < (1 << self.size)
            and int(v).bit_count() in (self.k, self.k + 1)
        )

    def _neighbors(self, v):
        if v.bit_count() == self.k:
            out = [v | (1 << i) for i in range(self.size) if not v >> i & 1]
        else:
            out = [v & ~(1 << i) for i in range(self.size) if v >> i & 1]
        out.sort()
        return out

    def order(self):
        return 2 * math.comb(self.size, self.k)

    def min_degree(self):
        return self.k + 1

    max_degree = min_degree

    def root(self):
        return (1 << self.k) - 1

    def _enumerate(self):
        return sorted(v for v in range(1 << self.size) if v.bit_count() in (self.k, self.k + 1))

    def _typical(self, x, y):
        return True

    def parse_vertex(self, text):
        text = text.strip()
        if text.startswith("{"):
            elems = [int(t) for t in text.strip("{}").split(",") if t.strip()]
            return self.check(sum(1 << (e - 1) for e in elems))
        try:
            return self.check(int(text))
        except ValueError:
            raise InvalidVertex(f"cannot parse vertex {text!r}") from None

    def format_vertex(self, v):
        return "{" + ",".join(str(i + 1) for i in range(self.size) if v >> i & 1) + "}"


# ---------------------------------------------------------------------------
# construction and module-level operations


def make_graph(spec, max_vertices=None):
    """Build an immutable graph handle from a GraphSpec or its textual form."""
    if isinstance(spec, str):
        spec = parse_graph_spec(spec)
    f = spec.family
    if f == "hypercube":
        return Hypercube(spec.n, spec=spec, max_vertices=max_vertices)
    if f == "genhypercube":
        return GeneralisedHypercube(spec.n, spec.k, spec=spec, max_vertices=max_vertices)
    if f == "permutahedron":
        return PermutationGraph(spec.n + 1, spec=spec, max_vertices=max_vertices)
    if f == "stars":
        return ProductGraph([star_factor(spec.q)] * spec.n, spec=spec, max_vertices=max_vertices)
    if f == "middlelayers":
        return MiddleLayers(spec.k, spec=spec, max_vertices=max_vertices)
    factors = []
    for kind, m in spec.factors:
        factors.append(complete_factor(m) if kind == "k" else star_factor(m))
    return ProductGraph(factors, spec=spec, max_vertices=max_vertices)


def degree(g, v):
    return g.degree(v)


def neighbors(g, v):
    return g.neighbors(v)


def ball(g, x, r, max_members=DEFAULT_MAX_BALL):
    return g.ball(x, r, max_members)


def is_typical(g, x, y):
    return g.is_typical(x, y)


def projection_subgraph(g, x, y, ell):
    return g.projection(x, y, ell)


def layer_index(g, v):
    if not isinstance(g, ProductGraph) or not g.is_star_product:
        raise UnsupportedFamily(f"{g.name}: layer_index needs a star product")
    return g.layer(v)


def default_K(g):
    """Family constant K for which the family is known to lie in H(K)."""
    if isinstance(g, Hypercube):
        return 2
    if isinstance(g, ProductGraph):
        return max(g.radix)
    if isinstance(g, PermutationGraph):
        return 4
    return 2
