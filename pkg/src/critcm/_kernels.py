"""Jitted kernels for the hot loops.

Flat int64 arrays only, explicit seeds (numba's thread-local legacy RNG), so
one code path serves both millions of tiny oracle replicas and single runs at
n ~ 1e7.  OPEN marks an unpaired half-edge throughout.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OPEN = np.int64(-1)


# ---------------------------------------------------------------------------
# uniform matching
# ---------------------------------------------------------------------------


@njit(cache=True)
def _match_into(mate, pool, ell):
    """Sequential pairing: take the front of the pool, partner uniform,
    swap-compact.  Every perfect matching has probability 1/(ell-1)!!."""
    for h in range(ell):
        mate[h] = OPEN
        pool[h] = h
    size = ell
    while size >= 2:
        a = pool[0]
        j = 1 + np.random.randint(size - 1)
        b = pool[j]
        mate[a] = b
        mate[b] = a
        pool[j] = pool[size - 1]
        size -= 1
        pool[0] = pool[size - 1]
        size -= 1


@njit(cache=True)
def match_kernel(ell, seed):
    np.random.seed(seed)
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    _match_into(mate, pool, ell)
    return mate


# ---------------------------------------------------------------------------
# union-find components
# ---------------------------------------------------------------------------


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]  # path halving
        x = parent[x]
    return x


@njit(cache=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return ra


@njit(cache=True)
def components_kernel(owner, mate, n):
    """Root label per vertex for the (possibly partial) pairing."""
    parent = np.arange(n)
    rank = np.zeros(n, np.int8)
    ell = owner.shape[0]
    for h in range(ell):
        m = mate[h]
        if m > h:
            _union(parent, rank, owner[h], owner[m])
    for v in range(n):
        parent[v] = _find(parent, v)
    return parent


@njit(cache=True)
def incremental_labels_kernel(owner, pairs_a, pairs_b, cuts, n):
    """Union pairs in order, snapshotting vertex labels at each cut.

    pairs_a/pairs_b hold the half-edge pairs in pairing order; cuts is a
    sorted array of event counts.  Returns labels with shape (len(cuts), n).
    """
    parent = np.arange(n)
    rank = np.zeros(n, np.int8)
    out = np.empty((cuts.shape[0], n), np.int64)
    k = 0
    for ci in range(cuts.shape[0]):
        while k < cuts[ci]:
            _union(parent, rank, owner[pairs_a[k]], owner[pairs_b[k]])
            k += 1
        for v in range(n):
            out[ci, v] = _find(parent, v)
    return out


# ---------------------------------------------------------------------------
# depth-first exploration
# ---------------------------------------------------------------------------
#
# Status codes: 0 sleeping, 1 active, 2 dead.  The DFS order is a single
# stack: a discovered vertex's surviving half-edges are pushed in index
# order, so the pop order runs through them from the highest index back.
# Cycle half-edges (back-edges to the active set and self-loops) are killed
# at discovery and never pushed; stale stack entries are skipped lazily.


@njit(cache=True)
def _pool_remove(pool, pos, psize, h):
    i = pos[h]
    last = pool[psize - 1]
    pool[i] = last
    pos[last] = i
    return psize - 1


@njit(cache=True)
def _explore_into(degrees, offsets, owner, mate, status, pool, pos, stack,
                  order, deg_out, c_out):
    """Run the DFS exploration with on-demand pairing.

    Mates are revealed when a vertex is discovered: each of its unpaired
    half-edges draws a uniform partner from the unrevealed pool, which is the
    conditional law of a uniform perfect matching revealed sequentially.
    Returns the number of stages executed (== n)."""
    n = degrees.shape[0]
    ell = offsets[n]
    for h in range(ell):
        mate[h] = OPEN
        status[h] = 0
        pool[h] = h
        pos[h] = h
    psize = ell
    top = 0
    stage = 0
    visited = np.zeros(n, np.bool_)

    while True:
        # S1: smallest active half-edge = deepest live stack entry
        a = np.int64(-1)
        while top > 0:
            cand = stack[top - 1]
            if status[cand] == 1:
                a = cand
                top -= 1
                break
            top -= 1
        entry = np.int64(-1)
        s3_half = np.int64(-1)
        if a >= 0:
            # S2: consume the pre-revealed edge (a, b); b's owner wakes up
            b = mate[a]
            status[a] = 2
            status[b] = 2
            w = owner[b]
            entry = b
        else:
            if psize == 0:
                break
            # S3: uniform sleeping half-edge starts a new component
            s3_half = pool[np.random.randint(psize)]
            w = owner[s3_half]

        visited[w] = True
        cyc = np.int64(0)
        lo = offsets[w]
        hi = offsets[w + 1]
        for h in range(lo, hi):
            if h == entry or h == s3_half:
                continue
            if status[h] == 2:
                continue  # killed earlier in this discovery (self-loop)
            m = mate[h]
            if m != OPEN:
                # partner revealed earlier: it is an active half-edge
                status[h] = 2
                status[m] = 2
                cyc += 1
            else:
                psize = _pool_remove(pool, pos, psize, h)
                x = pool[np.random.randint(psize)]
                mate[h] = x
                mate[x] = h
                psize = _pool_remove(pool, pos, psize, x)
                if owner[x] == w:
                    status[h] = 2
                    status[x] = 2
                    cyc += 1
                else:
                    status[h] = 1
                    stack[top] = h
                    top += 1
        if s3_half >= 0 and status[s3_half] != 2:
            # the component-starting half-edge is ordered below its siblings
            h = s3_half
            if mate[h] == OPEN:
                psize = _pool_remove(pool, pos, psize, h)
                x = pool[np.random.randint(psize)]
                mate[h] = x
                mate[x] = h
                psize = _pool_remove(pool, pos, psize, x)
                if owner[x] == w:
                    status[h] = 2
                    status[x] = 2
                    cyc += 1
                else:
                    status[h] = 1
                    stack[top] = h
                    top += 1
            else:
                status[h] = 1
                stack[top] = h
                top += 1

        order[stage] = w
        deg_out[stage] = degrees[w]
        c_out[stage] = cyc
        stage += 1

    # isolated (degree-0) vertices close out the walk, one stage each
    for v in range(n):
        if not visited[v]:
            order[stage] = v
            deg_out[stage] = 0
            c_out[stage] = 0
            stage += 1
    return stage


@njit(cache=True)
def explore_kernel(degrees, offsets, owner, seed):
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    status = np.zeros(ell, np.uint8)
    pool = np.empty(ell, np.int64)
    pos = np.empty(ell, np.int64)
    stack = np.empty(ell + 1, np.int64)
    order = np.empty(n, np.int64)
    deg_out = np.empty(n, np.int64)
    c_out = np.empty(n, np.int64)
    stages = _explore_into(degrees, offsets, owner, mate, status, pool, pos,
                           stack, order, deg_out, c_out)
    assert stages == n
    return order, deg_out, c_out, mate


@njit(cache=True)
def _replay_into(degrees, offsets, owner, mate, status, pool, pos, stack,
                 order, deg_out, c_out):
    """Same walk on a fixed full pairing; only the S3 restarts draw."""
    n = degrees.shape[0]
    ell = offsets[n]
    for h in range(ell):
        status[h] = 0
        pool[h] = h
        pos[h] = h
    psize = ell
    top = 0
    stage = 0
    visited = np.zeros(n, np.bool_)

    while True:
        a = np.int64(-1)
        while top > 0:
            cand = stack[top - 1]
            if status[cand] == 1:
                a = cand
                top -= 1
                break
            top -= 1
        entry = np.int64(-1)
        s3_half = np.int64(-1)
        if a >= 0:
            b = mate[a]
            assert status[b] == 0
            status[a] = 2
            status[b] = 2
            psize = _pool_remove(pool, pos, psize, b)
            w = owner[b]
            entry = b
        else:
            if psize == 0:
                break
            s3_half = pool[np.random.randint(psize)]
            w = owner[s3_half]

        visited[w] = True
        cyc = np.int64(0)
        lo = offsets[w]
        hi = offsets[w + 1]
        for h in range(lo, hi):
            if h == entry or h == s3_half:
                continue
            if status[h] == 2:
                continue
            g = mate[h]
            if owner[g] == w:
                # self-loop at w; both halves die
                status[h] = 2
                status[g] = 2
                psize = _pool_remove(pool, pos, psize, h)
                if g != h:
                    psize = _pool_remove(pool, pos, psize, g)
                cyc += 1
            elif status[g] == 1:
                # back-edge into the active set
                status[h] = 2
                status[g] = 2
                psize = _pool_remove(pool, pos, psize, h)
                cyc += 1
            else:
                assert status[g] == 0
                status[h] = 1
                psize = _pool_remove(pool, pos, psize, h)
                stack[top] = h
                top += 1
        if s3_half >= 0 and status[s3_half] != 2:
            h = s3_half
            g = mate[h]
            if owner[g] == w:
                status[h] = 2
                status[g] = 2
                psize = _pool_remove(pool, pos, psize, h)
                if g != h:
                    psize = _pool_remove(pool, pos, psize, g)
                cyc += 1
            else:
                status[h] = 1
                psize = _pool_remove(pool, pos, psize, h)
                stack[top] = h
                top += 1

        order[stage] = w
        deg_out[stage] = degrees[w]
        c_out[stage] = cyc
        stage += 1

    for v in range(n):
        if not visited[v]:
            order[stage] = v
            deg_out[stage] = 0
            c_out[stage] = 0
            stage += 1
    return stage


@njit(cache=True)
def replay_kernel(degrees, offsets, owner, mate, seed):
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    status = np.zeros(ell, np.uint8)
    pool = np.empty(ell, np.int64)
    pos = np.empty(ell, np.int64)
    stack = np.empty(ell + 1, np.int64)
    order = np.empty(n, np.int64)
    deg_out = np.empty(n, np.int64)
    c_out = np.empty(n, np.int64)
    stages = _replay_into(degrees, offsets, owner, mate, status, pool, pos,
                          stack, order, deg_out, c_out)
    assert stages == n
    return order, deg_out, c_out


# ---------------------------------------------------------------------------
# small-instance batch simulators (oracle comparisons)
# ---------------------------------------------------------------------------
#
# Outcomes are canonical u64 codes: the multiset of per-component
# (size, surplus) pairs, sorted descending, packed 8 bits per component as
# size*16 + surplus.  Valid for graphs with at most 8 vertices, sizes <= 8,
# surplus <= 15.


@njit(cache=True)
def _encode_pairs(sizes, surpluses, k):
    # insertion sort, descending by (size, surplus)
    for i in range(1, k):
        s = sizes[i]
        p = surpluses[i]
        j = i - 1
        while j >= 0 and (sizes[j] < s or (sizes[j] == s and surpluses[j] < p)):
            sizes[j + 1] = sizes[j]
            surpluses[j + 1] = surpluses[j]
            j -= 1
        sizes[j + 1] = s
        surpluses[j + 1] = p
    code = np.uint64(0)
    for i in range(k):
        code = code * np.uint64(256) + np.uint64(sizes[i] * 16 + surpluses[i])
    return code


@njit(cache=True)
def _components_code(owner, mate, n, live):
    """Canonical (size, surplus) code over components of live vertices."""
    parent = np.arange(n)
    rank = np.zeros(n, np.int8)
    ell = owner.shape[0]
    for h in range(ell):
        m = mate[h]
        if m > h and live[owner[h]] and live[owner[m]]:
            _union(parent, rank, owner[h], owner[m])
    sizes = np.zeros(n, np.int64)
    edges = np.zeros(n, np.int64)
    for v in range(n):
        if live[v]:
            sizes[_find(parent, v)] += 1
    for h in range(ell):
        m = mate[h]
        if m > h and live[owner[h]] and live[owner[m]]:
            edges[_find(parent, owner[h])] += 1
    out_sizes = np.empty(n, np.int64)
    out_surp = np.empty(n, np.int64)
    k = 0
    for v in range(n):
        if sizes[v] > 0:
            out_sizes[k] = sizes[v]
            out_surp[k] = edges[v] - sizes[v] + 1
            k += 1
    return _encode_pairs(out_sizes, out_surp, k)


@njit(cache=True)
def batch_match_codes(degrees, offsets, owner, reps, seed):
    """(size, surplus) outcome codes of uniform_match + components."""
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    live = np.ones(n, np.bool_)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        _match_into(mate, pool, ell)
        out[r] = _components_code(owner, mate, n, live)
    return out


@njit(cache=True)
def batch_matching_codes(ell, reps, seed):
    """Canonical codes of the matchings themselves (uniformity check)."""
    np.random.seed(seed)
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        _match_into(mate, pool, ell)
        code = np.uint64(0)
        for h in range(ell):
            if mate[h] > h:
                code = code * np.uint64(64) + np.uint64(h * 8 + mate[h])
        out[r] = code
    return out


@njit(cache=True)
def _trace_code(deg_out, c_out, n):
    """(size, surplus) code from walk increments d - 2 - 2c."""
    sizes = np.empty(n, np.int64)
    surp = np.empty(n, np.int64)
    k = 0
    s = np.int64(0)
    floor = np.int64(0)
    start = 0
    acc_c = np.int64(0)
    for j in range(n):
        s += deg_out[j] - 2 - 2 * c_out[j]
        acc_c += c_out[j]
        if s == floor - 2:
            sizes[k] = j + 1 - start
            surp[k] = acc_c
            k += 1
            floor = s
            start = j + 1
            acc_c = 0
    return _encode_pairs(sizes, surp, k)


@njit(cache=True)
def batch_explore_codes(degrees, offsets, owner, reps, seed):
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    status = np.zeros(ell, np.uint8)
    pool = np.empty(ell, np.int64)
    pos = np.empty(ell, np.int64)
    stack = np.empty(ell + 1, np.int64)
    order = np.empty(n, np.int64)
    deg_out = np.empty(n, np.int64)
    c_out = np.empty(n, np.int64)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        _explore_into(degrees, offsets, owner, mate, status, pool, pos, stack,
                      order, deg_out, c_out)
        out[r] = _trace_code(deg_out, c_out, n)
    return out


@njit(cache=True)
def batch_replay_codes(degrees, offsets, owner, reps, seed):
    """Fresh uniform matching per replica, then the replay walk on it."""
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    status = np.zeros(ell, np.uint8)
    pool = np.empty(ell, np.int64)
    pos = np.empty(ell, np.int64)
    stack = np.empty(ell + 1, np.int64)
    order = np.empty(n, np.int64)
    deg_out = np.empty(n, np.int64)
    c_out = np.empty(n, np.int64)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        _match_into(mate, pool, ell)
        _replay_into(degrees, offsets, owner, mate, status, pool, pos, stack,
                     order, deg_out, c_out)
        out[r] = _trace_code(deg_out, c_out, n)
    return out


@njit(cache=True)
def batch_direct_codes(degrees, offsets, owner, p, reps, seed):
    """Uniform matching, then each edge kept independently w.p. p."""
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    live = np.ones(n, np.bool_)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        _match_into(mate, pool, ell)
        for h in range(ell):
            if mate[h] > h and np.random.random() > p:
                m = mate[h]
                mate[h] = OPEN
                mate[m] = OPEN
        out[r] = _components_code(owner, mate, n, live)
    return out


@njit(cache=True)
def batch_explosion_codes(degrees, p, reps, seed):
    """Half-edge detachment construction followed by degree-one cleanup.

    Each half-edge is detached with probability 1-sqrt(p) onto a fresh
    degree-one vertex; the exploded sequence is matched uniformly and n_plus
    uniformly chosen degree-one vertices are deleted.  Codes cover the
    surviving components (the law of percolation at retention p)."""
    np.random.seed(seed)
    sq = np.sqrt(p)
    n0 = degrees.shape[0]
    ell = np.int64(0)
    for v in range(n0):
        ell += degrees[v]
    n_max = n0 + ell
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    owner2 = np.empty(ell, np.int64)
    deg2 = np.empty(n_max, np.int64)
    deg_one = np.empty(n_max, np.int64)
    deleted = np.zeros(n_max, np.bool_)
    live = np.ones(n_max, np.bool_)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        # detach per half-edge
        n_plus = np.int64(0)
        h = np.int64(0)
        for v in range(n0):
            deg2[v] = 0
            for _ in range(degrees[v]):
                if np.random.random() < sq:
                    deg2[v] += 1
                else:
                    n_plus += 1
        n2 = n0 + n_plus
        # owners: original halves first (per-vertex blocks), then red halves
        for v in range(n0):
            for _ in range(deg2[v]):
                owner2[h] = v
                h += 1
        for i in range(n_plus):
            deg2[n0 + i] = 1
            owner2[h] = n0 + i
            h += 1
        _match_into(mate, pool, ell)
        # delete n_plus uniform degree-one vertices
        k1 = np.int64(0)
        for v in range(n2):
            deleted[v] = False
            live[v] = True
            if deg2[v] == 1:
                deg_one[k1] = v
                k1 += 1
        for i in range(n_plus):  # partial Fisher-Yates over the candidates
            j = i + np.random.randint(k1 - i)
            tmp = deg_one[i]
            deg_one[i] = deg_one[j]
            deg_one[j] = tmp
            deleted[deg_one[i]] = True
            live[deg_one[i]] = False
        # drop edges touching deleted vertices
        for hh in range(ell):
            m = mate[hh]
            if m > hh:
                if deleted[owner2[hh]] or deleted[owner2[m]]:
                    mate[hh] = OPEN
                    mate[m] = OPEN
        out[r] = _components_code(owner2[:ell], mate, n2, live[:n2])
    return out


@njit(cache=True)
def batch_grid_marginal_codes(degrees, offsets, owner, p, reps, seed):
    """Sequential pairing of Bin(ell/2, p) uniform pairs (edge-label coupling
    marginal): K = #{U_i <= p} of ell/2 uniforms, then K uniform pairs."""
    np.random.seed(seed)
    n = degrees.shape[0]
    ell = offsets[n]
    mate = np.empty(ell, np.int64)
    pool = np.empty(ell, np.int64)
    live = np.ones(n, np.bool_)
    out = np.empty(reps, np.uint64)
    for r in range(reps):
        kk = np.int64(0)
        for _ in range(ell // 2):
            if np.random.random() <= p:
                kk += 1
        for h in range(ell):
            mate[h] = OPEN
            pool[h] = h
        size = ell
        for _ in range(kk):
            i = np.random.randint(size)
            a = pool[i]
            pool[i] = pool[size - 1]
            size -= 1
            j = np.random.randint(size)
            b = pool[j]
            pool[j] = pool[size - 1]
            size -= 1
            mate[a] = b
            mate[b] = a
        out[r] = _components_code(owner, mate, n, live)
    return out
