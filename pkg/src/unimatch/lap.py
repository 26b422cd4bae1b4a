"""Maximization linear assignment: dense solver, sparse-accelerated variant, oracle.

``solve_dense`` finds the row-to-column matching with maximum total
similarity (each row matched once, each column at most once).  When
there are more rows than columns the matrix is padded with dummy
columns holding a sentinel below every real value; rows landing on
dummies are reported unmatched.

``solve_sparse`` operates on a per-row truncated matrix where omitted
entries count as exactly zero, so its optimum equals ``solve_dense``
applied to the explicitly zero-filled dense matrix.

``solve_oracle`` is an exhaustive reference for small instances, kept
independent of the augmenting-path code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._lapcore import sap_dense, sap_sparse
from .errors import InputError, ParameterError, SizeError
from .types import Assignment, as_similarity_matrix

ORACLE_MAX_ROWS = 8
ORACLE_MAX_COLS = 10


@dataclass(frozen=True)
class SparseSimilarity:
    """Per-row retained (column, value) entries in CSR form; omitted entries are 0."""

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.indptr.shape != (self.n_rows + 1,):
            raise SizeError("indptr length must be n_rows + 1")
        if self.indices.shape != self.values.shape:
            raise SizeError("indices and values must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise InputError("retained similarity values must be finite")
        for i in range(self.n_rows):
            cols = self.indices[self.indptr[i]:self.indptr[i + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0) or cols[0] < 0 or cols[-1] >= self.n_cols):
                raise InputError(f"row {i}: retained columns must be sorted, distinct and in range")

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(self.indptr[i], self.indptr[i + 1])
        return self.indices[sl], self.values[sl]

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.float32)
        for i in range(self.n_rows):
            cols, vals = self.row(i)
            dense[i, cols] = vals
        return dense


def sparsify(sim: np.ndarray, k_a: int) -> SparseSimilarity:
    """Keep each row's k_a largest entries (ties to the lowest column); zero the rest."""
    if k_a < 1:
        raise ParameterError(f"k_a must be >= 1, got {k_a}")
    sim = as_similarity_matrix(sim)
    n, m = sim.shape
    k = min(k_a, m)
    # stable sort on negated values resolves ties toward lower column indices
    top = np.argsort(-sim, axis=1, kind="stable")[:, :k]
    top.sort(axis=1)
    indptr = np.arange(0, (n + 1) * k, k, dtype=np.int64)
    indices = top.ravel().astype(np.int64)
    values = np.take_along_axis(sim, top, axis=1).ravel()
    return SparseSimilarity(n_rows=n, n_cols=m, indptr=indptr, indices=indices, values=values)


def _pad_columns(sim: np.ndarray) -> np.ndarray:
    """Pad an n > m matrix to n x n with a sentinel strictly below all real entries."""
    n, m = sim.shape
    sentinel = float(sim.min()) - 1.0
    padded = np.full((n, n), sentinel, dtype=np.float64)
    padded[:, :m] = sim
    return padded


def _assignment_from_cols(sim: np.ndarray, col4row: np.ndarray, n_real_cols: int) -> Assignment:
    pairs = tuple((int(i), int(j)) for i, j in enumerate(col4row) if j < n_real_cols)
    entries = np.array([sim[i, j] for i, j in pairs], dtype=np.float64)
    return Assignment(pairs=pairs, total_similarity=float(entries.sum()))


def solve_dense(sim: np.ndarray) -> Assignment:
    """Maximum-total assignment of the dense similarity matrix."""
    sim = as_similarity_matrix(sim)
    n, m = sim.shape
    if n > m:
        cost = -_pad_columns(sim)
    else:
        cost = -sim.astype(np.float64)
    col4row = sap_dense(np.ascontiguousarray(cost))
    return _assignment_from_cols(sim, col4row, m)


def solve_sparse(sparse: SparseSimilarity) -> Assignment:
    """Maximum-total assignment treating all omitted entries as exactly 0.

    When every retained value is non-negative the search runs on the
    retained edges only (positive edges plus one zero-valued fallback
    column per row), which is where the reduced-search-space speedup
    comes from.  Matrices with negative retained entries fall back to
    the dense solver on the zero-filled matrix, which is always exact.
    """
    n, m = sparse.n_rows, sparse.n_cols
    if n < 1 or m < 1:
        raise SizeError("sparse similarity must have at least one row and column")
    if n > m or np.any(sparse.values < 0.0):
        return solve_dense(sparse.to_dense())

    values = sparse.values.astype(np.float64)
    # positive edges only: an edge worth 0 is indistinguishable from parking
    keep = values > 0.0
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks_idx = []
    chunks_cost = []
    for i in range(n):
        sl = slice(sparse.indptr[i], sparse.indptr[i + 1])
        cols = sparse.indices[sl][keep[sl]]
        # one private parking column per row, value 0
        chunks_idx.append(np.append(cols, m + i))
        chunks_cost.append(np.append(-values[sl][keep[sl]], 0.0))
        indptr[i + 1] = indptr[i] + cols.size + 1
    indices = np.concatenate(chunks_idx).astype(np.int64)
    costs = np.concatenate(chunks_cost)
    col4row = sap_sparse(n, m + n, indptr, indices, costs)
    if col4row[0] == -2:
        # defensive: parking guarantees feasibility, but never return garbage
        return solve_dense(sparse.to_dense())

    used = np.zeros(m, dtype=bool)
    matched = col4row < m
    used[col4row[matched]] = True
    free = np.flatnonzero(~used)
    pairs = []
    total = np.float64(0.0)
    nxt_free = 0
    for i in range(n):
        j = col4row[i]
        if j < m:
            cols, vals = sparse.row(i)
            k = int(np.searchsorted(cols, j))
            pairs.append((int(i), int(j)))
            total += np.float64(vals[k])
        else:
            # parked rows take the lowest free columns; those entries are 0
            # for the row (a positive free entry would contradict optimality)
            pairs.append((int(i), int(free[nxt_free])))
            nxt_free += 1
    return Assignment(pairs=tuple(sorted(pairs)), total_similarity=float(total))


def solve_oracle(sim: np.ndarray) -> Assignment:
    """Exact reference by exhaustive search over all injective row-to-column maps.

    Dynamic programming over column subsets enumerates every mapping
    implicitly; the reconstruction picks, row by row, the lowest column
    that still achieves the optimum.
    """
    sim = as_similarity_matrix(sim)
    n, m = sim.shape
    if n > ORACLE_MAX_ROWS or m > ORACLE_MAX_COLS:
        raise SizeError(f"oracle guard: need n <= {ORACLE_MAX_ROWS} and m <= {ORACLE_MAX_COLS}, "
                        f"got {n} x {m}")
    n_real = m
    work = sim.astype(np.float64) if n <= m else _pad_columns(sim)
    m_eff = work.shape[1]

    size = 1 << m_eff
    masks = np.arange(size)
    suffix = np.full((n + 1, size), -np.inf)
    suffix[n, :] = 0.0
    for i in range(n - 1, -1, -1):
        for j in range(m_eff):
            bit = 1 << j
            without = masks[(masks & bit) == 0]
            cand = work[i, j] + suffix[i + 1, without | bit]
            cur = suffix[i, without]
            suffix[i, without] = np.maximum(cur, cand)

    pairs = []
    total = np.float64(0.0)
    mask = 0
    for i in range(n):
        for j in range(m_eff):
            bit = 1 << j
            if mask & bit:
                continue
            if work[i, j] + suffix[i + 1, mask | bit] == suffix[i, mask]:
                if j < n_real:
                    pairs.append((i, j))
                    total += np.float64(sim[i, j])
                mask |= bit
                break
    return Assignment(pairs=tuple(pairs), total_similarity=float(total))
