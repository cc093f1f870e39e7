"""Compiled inner loops over CSR adjacency.

All kernels take ``need`` arrays holding the integer number of infected
neighbours a vertex requires; ``need <= 0`` means the vertex is infected
unconditionally at the next round.  Kernels release the GIL so trial
chunks can run on worker threads.
"""

import numba
import numpy as np

from .rng import u01


@numba.njit(cache=True, nogil=True)
def sync_closure(indptr, indices, need_rows, init, max_rounds, final, rounds, changed_last):
    """Synchronous rounds for each trial row of ``init``.

    Round l (0-based) applies ``need_rows[min(l, R-1)]``.  Stops at the first
    round that infects nothing, or after ``max_rounds`` rounds; in the latter
    case ``changed_last[t]`` records whether one more round would still change
    the state.
    """
    ntr, nv = init.shape
    nrows = need_rows.shape[0]
    cnt = np.zeros(nv, dtype=np.int64)
    newly = np.empty(nv, dtype=np.int64)
    for t in range(ntr):
        inf = final[t]
        for v in range(nv):
            inf[v] = init[t, v]
            cnt[v] = 0
        for v in range(nv):
            if inf[v]:
                for e in range(indptr[v], indptr[v + 1]):
                    cnt[indices[e]] += 1
        r = 0
        changed_last[t] = False
        while True:
            row = need_rows[min(r, nrows - 1)]
            m = 0
            for v in range(nv):
                if not inf[v] and cnt[v] >= row[v]:
                    newly[m] = v
                    m += 1
            if m == 0:
                break
            if r == max_rounds:
                changed_last[t] = True
                break
            for j in range(m):
                v = newly[j]
                inf[v] = True
            for j in range(m):
                v = newly[j]
                for e in range(indptr[v], indptr[v + 1]):
                    cnt[indices[e]] += 1
            r += 1
        rounds[t] = r


@numba.njit(cache=True, nogil=True)
def static_closure(indptr, indices, need, init, final):
    """Final infected sets for round-independent thresholds (queue order)."""
    ntr, nv = init.shape
    cnt = np.zeros(nv, dtype=np.int64)
    queue = np.empty(nv, dtype=np.int64)
    for t in range(ntr):
        inf = final[t]
        head = 0
        tail = 0
        for v in range(nv):
            cnt[v] = 0
            inf[v] = init[t, v] or need[v] <= 0
            if inf[v]:
                queue[tail] = v
                tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            for e in range(indptr[v], indptr[v + 1]):
                w = indices[e]
                cnt[w] += 1
                if not inf[w] and cnt[w] >= need[w]:
                    inf[w] = True
                    queue[tail] = w
                    tail += 1


@numba.njit(cache=True, nogil=True)
def coupled_thresholds(indptr, indices, need, keys, seed, trial0, ntrials, pstar, kstar):
    """Per-trial critical density under the shared-uniform coupling.

    Vertices are seeded in increasing order of their uniform u_v and the
    closure is grown incrementally; ``kstar[t]`` is the number of seeds at
    which the closure first covers everything and ``pstar[t]`` the uniform
    of the last seed (-1.0 when the empty set already percolates).  A trial
    percolates at density p exactly when p > pstar[t].
    """
    nv = keys.shape[0]
    cnt = np.zeros(nv, dtype=np.int64)
    inf = np.zeros(nv, dtype=np.bool_)
    queue = np.empty(nv, dtype=np.int64)
    u = np.empty(nv, dtype=np.float64)
    for t in range(ntrials):
        tr = trial0 + np.uint64(t)
        for v in range(nv):
            u[v] = u01(seed, tr, keys[v])
            cnt[v] = 0
            inf[v] = False
        order = np.argsort(u, kind="mergesort")
        total = 0
        tail = 0
        for v in range(nv):
            if need[v] <= 0:
                inf[v] = True
                queue[tail] = v
                tail += 1
        head = 0
        k = 0
        while True:
            while head < tail:
                v = queue[head]
                head += 1
                total += 1
                for e in range(indptr[v], indptr[v + 1]):
                    w = indices[e]
                    cnt[w] += 1
                    if not inf[w] and cnt[w] >= need[w]:
                        inf[w] = True
                        queue[tail] = w
                        tail += 1
            if total == nv:
                break
            s = order[k]
            k += 1
            if not inf[s]:
                inf[s] = True
                queue[tail] = s
                tail += 1
        kstar[t] = k
        pstar[t] = u[order[k - 1]] if k > 0 else -1.0


@numba.njit(cache=True, nogil=True)
def local_rounds(nbr, need_rows, update_sets, init, out):
    """Shrinking-horizon evolution on a ball; returns the centre's final state.

    ``nbr`` is a padded (members, maxdeg) neighbour table (-1 = padding) for
    members whose whole neighbourhood lies in the ball; ``update_sets[j]``
    lists the members re-evaluated at round j+1 (padded with -1).
    """
    ntr, nm = init.shape
    nrounds = update_sets.shape[0]
    nrows = need_rows.shape[0]
    cur = np.empty(nm, dtype=np.bool_)
    nxt = np.empty(nm, dtype=np.bool_)
    for t in range(ntr):
        for v in range(nm):
            cur[v] = init[t, v]
        for j in range(nrounds):
            row = need_rows[min(j, nrows - 1)]
            for v in range(nm):
                nxt[v] = cur[v]
            for a in range(update_sets.shape[1]):
                v = update_sets[j, a]
                if v < 0:
                    break
                if cur[v]:
                    continue
                c = 0
                for b in range(nbr.shape[1]):
                    w = nbr[v, b]
                    if w < 0:
                        break
                    if cur[w]:
                        c += 1
                if c >= row[v]:
                    nxt[v] = True
            for v in range(nm):
                cur[v] = nxt[v]
        out[t] = cur[0]


@numba.njit(cache=True, nogil=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@numba.njit(cache=True, nogil=True)
def percolating_by_size(nbr_masks, need_rows):
    """Number of percolating initial sets of each size, over all 2^V subsets.

    Vertices are bits of a 64-bit mask (V <= 30 is practical); synchronous
    rounds use ``need_rows[min(r, R-1)]``.
    """
    nv = nbr_masks.shape[0]
    nrows = need_rows.shape[0]
    full = (np.int64(1) << nv) - 1
    counts = np.zeros(nv + 1, dtype=np.int64)
    for a0 in range(full + 1):
        cur = np.int64(a0)
        r = 0
        while cur != full:
            row = need_rows[min(r, nrows - 1)]
            nxt = cur
            for v in range(nv):
                if not (cur >> v) & 1 and _popcount(cur & nbr_masks[v]) >= row[v]:
                    nxt |= np.int64(1) << v
            if nxt == cur:
                break
            cur = nxt
            r += 1
        if cur == full:
            counts[_popcount(np.int64(a0))] += 1
    return counts
