"""Numba kernels for the assignment solvers.

Both kernels implement the shortest-augmenting-path scheme with dual
potentials (the Jonker-Volgenant family): rows are inserted one at a
time and each insertion runs a Dijkstra search for the cheapest
augmenting path.  Minimization form; callers negate similarities.

Determinism: column scans go in ascending index order and ties in the
Dijkstra frontier resolve to the lowest column index, so equal-cost
alternatives always resolve the same way.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sap_dense(cost):
    """Solve the dense LAP (n <= m). Returns col4row: row -> assigned column."""
    n, m = cost.shape
    u = np.zeros(n)
    v = np.zeros(m)
    col4row = np.full(n, -1, np.int64)
    row4col = np.full(m, -1, np.int64)
    shortest = np.empty(m)
    path = np.empty(m, np.int64)
    visited = np.empty(m, np.bool_)
    for cur_row in range(n):
        shortest[:] = np.inf
        path[:] = -1
        visited[:] = False
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink < 0:
            lo = np.inf
            jlo = -1
            for j in range(m):
                if visited[j]:
                    continue
                r = min_val + cost[i, j] - u[i] - v[j]
                if r < shortest[j]:
                    shortest[j] = r
                    path[j] = i
                if shortest[j] < lo:
                    lo = shortest[j]
                    jlo = j
            j = jlo
            min_val = lo
            visited[j] = True
            if row4col[j] < 0:
                sink = j
            else:
                i = row4col[j]
        u[cur_row] += min_val
        for ii in range(n):
            jj = col4row[ii]
            if ii != cur_row and jj >= 0 and visited[jj]:
                u[ii] += min_val - shortest[jj]
        for j in range(m):
            if visited[j]:
                v[j] -= min_val - shortest[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return col4row


@njit(cache=True, nogil=True)
def sap_sparse(n, m, indptr, indices, costs):
    """Solve the LAP restricted to CSR edges (columns 0..m-1).

    Every row must be matchable through its edge list (callers guarantee
    this with per-row fallback columns).  Returns col4row, or a first
    element of -2 if some row has no augmenting path.

    The Dijkstra frontier is kept as a list of touched columns and the
    minimum is found by rescanning it; with k-sparse rows the frontier
    stays small, which is where the reduced-search-space speedup comes
    from.  Touched entries are reset through the same list, so one
    augmentation never pays O(m).
    """
    u = np.zeros(n)
    v = np.zeros(m)
    col4row = np.full(n, -1, np.int64)
    row4col = np.full(m, -1, np.int64)
    shortest = np.full(m, np.inf)
    path = np.full(m, -1, np.int64)
    visited = np.zeros(m, np.bool_)
    touched = np.empty(m, np.int64)
    vlist = np.empty(m, np.int64)
    fail = np.full(n, -2, np.int64)
    for cur_row in range(n):
        ntouched = 0
        nvisited = 0
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink < 0:
            for e in range(indptr[i], indptr[i + 1]):
                j = indices[e]
                if visited[j]:
                    continue
                r = min_val + costs[e] - u[i] - v[j]
                if r < shortest[j]:
                    if shortest[j] == np.inf:
                        touched[ntouched] = j
                        ntouched += 1
                    shortest[j] = r
                    path[j] = i
            lo = np.inf
            jlo = -1
            for t in range(ntouched):
                j = touched[t]
                if visited[j]:
                    continue
                if shortest[j] < lo or (shortest[j] == lo and j < jlo):
                    lo = shortest[j]
                    jlo = j
            j = jlo
            if j < 0:
                for t in range(ntouched):
                    jj = touched[t]
                    shortest[jj] = np.inf
                    path[jj] = -1
                    visited[jj] = False
                return fail
            min_val = lo
            visited[j] = True
            vlist[nvisited] = j
            nvisited += 1
            if row4col[j] < 0:
                sink = j
            else:
                i = row4col[j]
        u[cur_row] += min_val
        for t in range(nvisited):
            j = vlist[t]
            ii = row4col[j]
            if ii >= 0:
                u[ii] += min_val - shortest[j]
            v[j] -= min_val - shortest[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
        for t in range(ntouched):
            j = touched[t]
            shortest[j] = np.inf
            path[j] = -1
            visited[j] = False
    return col4row
