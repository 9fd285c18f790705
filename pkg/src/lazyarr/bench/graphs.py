"""Undirected simple graphs: generators and a Matrix Market reader."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True)
class UndirectedGraph:
    """``edges`` holds each edge once as ``(u, v)`` with ``u > v``, sorted."""

    n: int
    edges: np.ndarray
    name: str = ""

    @classmethod
    def from_pairs(cls, n: int, pairs, name: str = "") -> "UndirectedGraph":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GraphFormatError(f"edge endpoint outside [0, {n})")
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.sort(arr, axis=1)[:, ::-1]
        arr = np.unique(arr, axis=0) if arr.size else arr.reshape(0, 2)
        return cls(n, arr, name)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        if self.num_edges:
            a[self.edges[:, 0], self.edges[:, 1]] = 1
            a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def lower(self) -> np.ndarray:
        """Strictly lower-triangular 0/1 adjacency (entries ``i > j``)."""
        return np.tril(self.adjacency(), k=-1)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Offsets and sorted column indices of the full symmetric adjacency."""
        a = self.adjacency()
        counts = a.sum(axis=1)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = np.nonzero(a)[1].astype(np.int64)
        return offsets, indices

    def relabel(self, perm) -> "UndirectedGraph":
        perm = np.asarray(perm)
        return UndirectedGraph.from_pairs(self.n, perm[self.edges], self.name)


def complete(n: int) -> UndirectedGraph:
    return UndirectedGraph.from_pairs(n, [(i, j) for i in range(n) for j in range(i)], f"kn:{n}")


def path(n: int) -> UndirectedGraph:
    return UndirectedGraph.from_pairs(n, [(i + 1, i) for i in range(n - 1)], f"path:{n}")


def star(n: int) -> UndirectedGraph:
    """``n`` vertices: centre 0 joined to ``n - 1`` leaves."""
    return UndirectedGraph.from_pairs(n, [(i, 0) for i in range(1, n)], f"star:{n}")


def gnp(n: int, p: float, seed: int) -> UndirectedGraph:
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i) if rng.random() < p]
    return UndirectedGraph.from_pairs(n, pairs, f"gnp:{n}:{p}:{seed}")


def read_matrix_market(path_or_file) -> UndirectedGraph:
    """Read a square coordinate-format ``.mtx`` file as an undirected graph.

    Both ``general`` and ``symmetric`` files are accepted; either way the
    result is symmetrized with self-loops, explicit zeros and duplicates
    removed.
    """
    if hasattr(path_or_file, "read"):
        lines = path_or_file.read().splitlines()
        name = getattr(path_or_file, "name", "")
    else:
        with open(path_or_file) as fh:
            lines = fh.read().splitlines()
        name = os.path.basename(str(path_or_file))
    if not lines:
        raise GraphFormatError("empty file")
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise GraphFormatError(f"bad header line {lines[0]!r}")
    obj, fmt, field_, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise GraphFormatError("only coordinate matrices are supported")
    if field_ not in ("pattern", "real", "integer"):
        raise GraphFormatError(f"unsupported field {field_!r}")
    if symmetry not in ("general", "symmetric"):
        raise GraphFormatError(f"unsupported symmetry {symmetry!r}")

    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise GraphFormatError("missing size line")
    try:
        rows, cols, nnz = (int(x) for x in body[0].split())
    except ValueError:
        raise GraphFormatError(f"bad size line {body[0]!r}") from None
    if rows != cols:
        raise GraphFormatError(f"adjacency matrix must be square, got {rows}x{cols}")
    entries = body[1:]
    if len(entries) != nnz:
        raise GraphFormatError(f"size line declares {nnz} entries, found {len(entries)}")

    want = 2 if field_ == "pattern" else 3
    pairs = []
    for ln in entries:
        parts = ln.split()
        if len(parts) != want:
            raise GraphFormatError(f"bad entry {ln!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            value = float(parts[2]) if want == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"bad entry {ln!r}") from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise GraphFormatError(f"index out of range in entry {ln!r} (indices are 1-based)")
        if value != 0:
            pairs.append((i - 1, j - 1))
    return UndirectedGraph.from_pairs(rows, pairs, name)


def write_matrix_market(graph: UndirectedGraph, path_or_file, symmetric: bool = True):
    sym = "symmetric" if symmetric else "general"
    lines = [f"%%MatrixMarket matrix coordinate pattern {sym}"]
    pairs = [(u, v) for u, v in graph.edges.tolist()]
    if not symmetric:
        pairs += [(v, u) for u, v in pairs]
    lines.append(f"{graph.n} {graph.n} {len(pairs)}")
    lines += [f"{u + 1} {v + 1}" for u, v in pairs]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def parse_graph_spec(spec: str) -> UndirectedGraph:
    """``kn:N``, ``path:N``, ``star:N``, ``gnp:N:P[:SEED]`` or a ``.mtx`` path."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "kn":
            return complete(int(rest))
        if kind == "path":
            return path(int(rest))
        if kind == "star":
            return star(int(rest))
        if kind == "gnp":
            n, p, *seed = rest.split(":")
            if len(seed) > 1:
                raise ValueError(spec)
            return gnp(int(n), float(p), int(seed[0]) if seed else 0)
    except ValueError:
        raise GraphFormatError(f"bad generator spec {spec!r}") from None
    if spec.endswith(".mtx") or os.path.exists(spec):
        return read_matrix_market(spec)
    raise GraphFormatError(f"unknown graph input {spec!r}")


def parse_array_spec(spec: str) -> dict:
    """``rand:N:LO:HI:SEED`` -> keyword arguments for ``Client.randint``."""
    kind, _, rest = spec.partition(":")
    if kind != "rand":
        raise GraphFormatError(f"unknown array input {spec!r}")
    try:
        n, lo, hi, seed = (int(x) for x in rest.split(":"))
    except ValueError:
        raise GraphFormatError(f"bad array spec {spec!r}") from None
    return {"size": n, "lo": lo, "hi": hi, "seed": seed}
