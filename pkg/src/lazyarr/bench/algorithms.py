"""Graph kernels written purely against the client API.

Matrices live on the client as lists of 1-D server arrays; every product is
built from elementwise multiplies and sum reductions. Temporaries are
released as soon as their consumer has been issued, which is what lets the
client recycle them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..client import ArrayHandle, Client
from .graphs import UndirectedGraph

# Each triangle is found once per ordered pair of its edge endpoints.
SPARSE_TC_OVERCOUNT = 6


@dataclass
class DenseMatrix:
    n: int
    rows: list[ArrayHandle]
    rows_t: list[ArrayHandle] | None
    pattern: np.ndarray

    @classmethod
    def from_numpy(cls, client: Client, matrix, dtype: str = "int64") -> "DenseMatrix":
        m = np.asarray(matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        rows = [client.array(row.tolist(), dtype) for row in m]
        rows_t = None
        if not np.array_equal(m, m.T):
            rows_t = [client.array(col.tolist(), dtype) for col in m.T]
        return cls(m.shape[0], rows, rows_t, m.copy())

    @property
    def transpose_rows(self) -> list[ArrayHandle]:
        return self.rows if self.rows_t is None else self.rows_t

    def release(self):
        for h in self.rows + (self.rows_t or []):
            h.release()


@dataclass
class SparseGraph:
    n: int
    nnz: int
    p1: ArrayHandle   # CSC offsets
    c: ArrayHandle    # CSC row indices
    p2: ArrayHandle   # CSR offsets
    r: ArrayHandle    # CSR column indices

    @classmethod
    def from_graph(cls, client: Client, graph: UndirectedGraph) -> "SparseGraph":
        offsets, indices = graph.csr()
        # the adjacency is symmetric, so CSC and CSR coincide
        return cls(
            graph.n, len(indices),
            client.array(offsets.tolist(), "int64"), client.array(indices.tolist(), "int64"),
            client.array(offsets.tolist(), "int64"), client.array(indices.tolist(), "int64"),
        )

    def release(self):
        for h in (self.p1, self.c, self.p2, self.r):
            h.release()


def load_matrix_market(client: Client, path, dense_limit: int = 512):
    """Read ``path`` and upload it as a sparse graph plus, if small enough,
    the dense lower-triangular matrix used by dense triangle counting."""
    from .graphs import read_matrix_market

    graph = read_matrix_market(path)
    sparse = SparseGraph.from_graph(client, graph)
    dense = DenseMatrix.from_numpy(client, graph.lower()) if graph.n <= dense_limit else None
    return sparse, dense


def tc_dense(client: Client, L: DenseMatrix) -> int:
    """Triangles as ``sum((L @ L) * L)``, one row-times-column product per
    nonzero of ``L``; zero entries of ``L`` contribute nothing and are skipped."""
    lt = L.transpose_rows
    if len(L.rows) != L.n or len(lt) != L.n:
        raise ValueError("matrix rows do not match its dimension")
    total = 0
    for i in range(L.n):
        for j in np.nonzero(L.pattern[i])[0]:
            prod = L.rows[i] * lt[j]
            total += prod.sum() * int(L.pattern[i, j])
            prod.release()
    return int(total)


def tc_sparse(client: Client, G: SparseGraph) -> int:
    """Intersect the neighbour lists at both ends of every stored entry."""
    p1 = G.p1.to_values()
    p2 = G.p2.to_values()
    cidx = G.c.to_values()
    s = 0
    for i in range(G.n):
        lo, hi = p1[i], p1[i + 1]
        if lo == hi:
            continue
        col = G.c[lo:hi]
        for k in range(lo, hi):
            j = cidx[k]
            row = G.r[p2[j]:p2[j + 1]]
            s += client.intersect_size(col, row)
            row.release()
        col.release()
    if s % SPARSE_TC_OVERCOUNT:
        raise ArithmeticError(f"intersection total {s} is not a multiple of {SPARSE_TC_OVERCOUNT}")
    return s // SPARSE_TC_OVERCOUNT


def _vecmat(client: Client, v: ArrayHandle, columns: list[ArrayHandle]) -> ArrayHandle:
    out = []
    for col in columns:
        t = v * col
        out.append(t.sum())
        t.release()
    return client.array([float(x) for x in out], "float64")


@dataclass
class BCResult:
    delta: list[float]
    path_counts: list[float]
    depth: int


def bc_single_source(client: Client, A: DenseMatrix, source: int) -> BCResult:
    """Single-source dependencies by level-synchronous BFS and back-propagation.

    ``A`` should be a float64 adjacency so every vector stays float64.
    """
    n = A.n
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside [0, {n})")
    at = A.transpose_rows

    q = client.array([1.0 if v == source else 0.0 for v in range(n)], "float64")
    p = client.zeros(n, "float64")
    sigma: list[ArrayHandle] = []
    depth = 0
    while True:
        sigma.append(q.copy_ref())
        p_next = p + q
        p.release()
        p = p_next
        qa = _vecmat(client, q, at)
        unvisited = p.eq(0.0)
        q.release()
        q = qa * unvisited
        qa.release()
        unvisited.release()
        frontier = q.sum()
        depth += 1
        if frontier == 0:
            break
    q.release()

    delta = client.zeros(n, "float64")
    # level i pushes its dependencies back onto level i - 1; level 0 is the source
    for i in range(depth - 1, 1, -1):
        t1 = 1 + delta
        t2 = t1.safediv(sigma[i])
        t1.release()
        t3 = _vecmat(client, t2, A.rows)
        t2.release()
        t4 = sigma[i - 1] * t3
        t3.release()
        d_next = delta + t4
        delta.release()
        t4.release()
        delta = d_next

    result = BCResult(delta.to_values(), p.to_values(), depth)
    for h in (*sigma, p, delta):
        h.release()
    return result


def taxi_chain(client: Client, a: ArrayHandle) -> tuple:
    """min, max, mean, std, min, min -- in that order."""
    return (
        client.reduce("min", a),
        client.reduce("max", a),
        client.mean(a),
        client.std(a),
        client.reduce("min", a),
        client.reduce("min", a),
    )
