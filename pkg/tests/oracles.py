"""Slow, independent reference implementations used only by the tests.

Nothing here imports percolab: adjacency comes straight from the family
definitions and closures are plain Python set iterations.
"""

import itertools
from collections import deque


def cube_adj(n):
    return {v: [v ^ (1 << i) for i in range(n)] for v in range(1 << n)}


def perm_adj(letters):
    adj = {}
    for v in itertools.permutations(range(1, letters + 1)):
        out = []
        for i in range(letters - 1):
            w = list(v)
            w[i], w[i + 1] = w[i + 1], w[i]
            out.append(tuple(w))
        adj[v] = out
    return adj


def star_adj(n, q):
    """(K_{1,q})^n on digit tuples; digit 0 is the centre."""
    adj = {}
    for v in itertools.product(range(q + 1), repeat=n):
        out = []
        for i, a in enumerate(v):
            for b in (range(1, q + 1) if a == 0 else [0]):
                out.append(v[:i] + (b,) + v[i + 1 :])
        adj[v] = out
    return adj


def bfs(adj, x):
    dist = {x: 0}
    dq = deque([x])
    while dq:
        v = dq.popleft()
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                dq.append(w)
    return dist


def sync_rounds(adj, A0, need, rounds=None):
    """Synchronous rounds; ``need(v, ell)`` gives the threshold for round ell+1."""
    A = set(A0)
    hist = [frozenset(A)]
    ell = 0
    while rounds is None or ell < rounds:
        new = {v for v in adj if v not in A and sum(w in A for w in adj[v]) >= need(v, ell)}
        if not new:
            if rounds is None:
                break
        A |= new
        ell += 1
        hist.append(frozenset(A))
    return hist


def binom_tail(n, p, k):
    from math import comb

    return sum(comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(k, n + 1))
