"""Numba merge engines for agglomerative clustering on cosine distance.

Average linkage between clusters A and B over unit-normalized points is
1 - <S_A, S_B> / (|A| |B|) where S_C is the vector sum of cluster C, so
no pairwise-distance matrix is ever materialized.  Merged clusters get
fresh ids (n, n+1, ...) and are immutable, which keeps cached pair
distances valid for the whole run.

Tie rule everywhere: among minimum-distance pairs, merge the one with
the lexicographically smallest (a, b) id pair.
"""
import numpy as np
from numba import njit
from numba.typed import List as NumbaList


@njit(cache=True, inline="always")
def _pair_dist(sums, sizes, a, b):
    d = sums.shape[1]
    acc = 0.0
    for k in range(d):
        acc += sums[a, k] * sums[b, k]
    return 1.0 - acc / (sizes[a] * sizes[b])


@njit(cache=True)
def _heap_push(keys, ha, hb, hsize, key, a, b):
    i = hsize
    keys[i] = key
    ha[i] = a
    hb[i] = b
    while i > 0:
        p = (i - 1) // 2
        if (keys[p] < keys[i] or
                (keys[p] == keys[i] and (ha[p] < ha[i] or (ha[p] == ha[i] and hb[p] <= hb[i])))):
            break
        keys[p], keys[i] = keys[i], keys[p]
        ha[p], ha[i] = ha[i], ha[p]
        hb[p], hb[i] = hb[i], hb[p]
        i = p
    return hsize + 1


@njit(cache=True, inline="always")
def _heap_less(keys, ha, hb, i, j):
    if keys[i] != keys[j]:
        return keys[i] < keys[j]
    if ha[i] != ha[j]:
        return ha[i] < ha[j]
    return hb[i] < hb[j]


@njit(cache=True)
def _heap_pop(keys, ha, hb, hsize):
    k0, a0, b0 = keys[0], ha[0], hb[0]
    hsize -= 1
    keys[0], ha[0], hb[0] = keys[hsize], ha[hsize], hb[hsize]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        s = i
        if left < hsize and _heap_less(keys, ha, hb, left, s):
            s = left
        if right < hsize and _heap_less(keys, ha, hb, right, s):
            s = right
        if s == i:
            break
        keys[s], keys[i] = keys[i], keys[s]
        ha[s], ha[i] = ha[i], ha[s]
        hb[s], hb[i] = hb[i], hb[s]
        i = s
    return k0, a0, b0, hsize


@njit(cache=True, nogil=True)
def merge_constrained(x, indptr, indices, stop_k):
    """Heap-driven merging restricted to connectivity edges.

    Candidate pairs live in a lazy min-heap; entries referencing merged-away
    ids are discarded on pop.  Stops at stop_k clusters or when no admissible
    pair remains (disconnected components).
    """
    n, d = x.shape
    tot = 2 * n - 1
    sums = np.zeros((tot, d))
    sizes = np.zeros(tot, np.int64)
    alive = np.zeros(tot, np.bool_)
    for i in range(n):
        for k in range(d):
            sums[i, k] = x[i, k]
        sizes[i] = 1
        alive[i] = True

    nbr = NumbaList()
    nlen = np.zeros(tot, np.int64)
    for i in range(n):
        deg = indptr[i + 1] - indptr[i]
        arr = np.empty(max(deg, 4), np.int64)
        arr[:deg] = indices[indptr[i]:indptr[i + 1]]
        nbr.append(arr)
        nlen[i] = deg
    for _ in range(n - 1):
        nbr.append(np.empty(4, np.int64))

    stamp = np.full(tot, -1, np.int64)
    buf = np.empty(tot, np.int64)

    cap = max(indptr[n] * 2 + 16, 64)
    keys = np.empty(cap)
    ha = np.empty(cap, np.int64)
    hb = np.empty(cap, np.int64)
    hsize = 0
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j > i:
                hsize = _heap_push(keys, ha, hb, hsize, _pair_dist(sums, sizes, i, j), i, j)

    steps_a = np.empty(n - 1, np.int64)
    steps_b = np.empty(n - 1, np.int64)
    steps_d = np.empty(n - 1)
    steps_s = np.empty(n - 1, np.int64)
    nsteps = 0
    active = n
    nxt = n
    while active > stop_k and hsize > 0:
        key, a, b, hsize = _heap_pop(keys, ha, hb, hsize)
        if not (alive[a] and alive[b]):
            continue
        c = nxt
        nxt += 1
        alive[a] = False
        alive[b] = False
        alive[c] = True
        sizes[c] = sizes[a] + sizes[b]
        for k in range(d):
            sums[c, k] = sums[a, k] + sums[b, k]
        cnt = 0
        for t in range(nlen[a]):
            vtx = nbr[a][t]
            if alive[vtx] and stamp[vtx] != c:
                stamp[vtx] = c
                buf[cnt] = vtx
                cnt += 1
        for t in range(nlen[b]):
            vtx = nbr[b][t]
            if alive[vtx] and stamp[vtx] != c:
                stamp[vtx] = c
                buf[cnt] = vtx
                cnt += 1
        merged_nbrs = np.sort(buf[:cnt])
        arr = np.empty(max(cnt, 4), np.int64)
        arr[:cnt] = merged_nbrs
        nbr[c] = arr
        nlen[c] = cnt
        for t in range(cnt):
            vtx = merged_nbrs[t]
            lv = nlen[vtx]
            av = nbr[vtx]
            if lv == av.size:
                grown = np.empty(av.size * 2, np.int64)
                grown[:lv] = av
                nbr[vtx] = grown
                av = grown
            av[lv] = c
            nlen[vtx] = lv + 1
            if hsize + 1 > keys.size:
                ncap = keys.size * 2
                nk = np.empty(ncap)
                na = np.empty(ncap, np.int64)
                nb = np.empty(ncap, np.int64)
                nk[:hsize] = keys[:hsize]
                na[:hsize] = ha[:hsize]
                nb[:hsize] = hb[:hsize]
                keys, ha, hb = nk, na, nb
            hsize = _heap_push(keys, ha, hb, hsize, _pair_dist(sums, sizes, vtx, c), vtx, c)
        steps_a[nsteps] = a
        steps_b[nsteps] = b
        steps_d[nsteps] = key
        steps_s[nsteps] = sizes[c]
        nsteps += 1
        active -= 1
    return steps_a[:nsteps], steps_b[:nsteps], steps_d[:nsteps], steps_s[:nsteps]


@njit(cache=True, nogil=True)
def merge_unconstrained(x, stop_k):
    """Nearest-neighbor-array merging over all cluster pairs (no constraint)."""
    n, d = x.shape
    tot = 2 * n - 1
    sums = np.zeros((tot, d))
    sizes = np.zeros(tot, np.int64)
    alive = np.zeros(tot, np.bool_)
    for i in range(n):
        for k in range(d):
            sums[i, k] = x[i, k]
        sizes[i] = 1
        alive[i] = True
    nn_dist = np.full(tot, np.inf)
    nn_idx = np.full(tot, -1, np.int64)
    for i in range(n):
        best = np.inf
        bj = -1
        for j in range(n):
            if j == i:
                continue
            dist = _pair_dist(sums, sizes, i, j)
            if dist < best:
                best = dist
                bj = j
        nn_dist[i] = best
        nn_idx[i] = bj

    steps_a = np.empty(n - 1, np.int64)
    steps_b = np.empty(n - 1, np.int64)
    steps_d = np.empty(n - 1)
    steps_s = np.empty(n - 1, np.int64)
    nsteps = 0
    active = n
    nxt = n
    while active > stop_k:
        best = np.inf
        bi = -1
        for i in range(nxt):
            if alive[i] and nn_dist[i] < best:
                best = nn_dist[i]
                bi = i
        a = bi
        b = nn_idx[bi]
        if a > b:
            a, b = b, a
        c = nxt
        nxt += 1
        alive[a] = False
        alive[b] = False
        sizes[c] = sizes[a] + sizes[b]
        for k in range(d):
            sums[c, k] = sums[a, k] + sums[b, k]
        cbest = np.inf
        cj = -1
        for i in range(nxt - 1):
            if not alive[i]:
                continue
            dist = _pair_dist(sums, sizes, i, c)
            if dist < cbest:
                cbest = dist
                cj = i
            if nn_idx[i] == a or nn_idx[i] == b:
                # nearest neighbor got merged away: rescan (ascending id, so
                # ties keep the lowest id; c is the highest id and goes last)
                rb = np.inf
                rj = -1
                for j in range(nxt - 1):
                    if j != i and alive[j]:
                        dd = _pair_dist(sums, sizes, i, j)
                        if dd < rb:
                            rb = dd
                            rj = j
                if dist < rb:
                    rb = dist
                    rj = c
                nn_dist[i] = rb
                nn_idx[i] = rj
            elif dist < nn_dist[i]:
                nn_dist[i] = dist
                nn_idx[i] = c
        alive[c] = True
        nn_dist[c] = cbest
        nn_idx[c] = cj
        steps_a[nsteps] = a
        steps_b[nsteps] = b
        steps_d[nsteps] = best
        steps_s[nsteps] = sizes[c]
        nsteps += 1
        active -= 1
    return steps_a[:nsteps], steps_b[:nsteps], steps_d[:nsteps], steps_s[:nsteps]
