"""Brute-force reference answers computed without any client or server."""
from __future__ import annotations

from collections import deque
from fractions import Fraction
from itertools import combinations

MAX_ORACLE_NODES = 256


def _neighbours(n, edges):
    if n > MAX_ORACLE_NODES:
        raise ValueError(f"oracle limited to {MAX_ORACLE_NODES} nodes, got {n}")
    adj = [set() for _ in range(n)]
    for u, v in edges:
        u, v = int(u), int(v)
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return adj


def oracle_triangles(n: int, edges) -> int:
    """Count triangles by checking every vertex triple."""
    adj = _neighbours(n, edges)
    return sum(1 for a, b, c in combinations(range(n), 3)
               if b in adj[a] and c in adj[a] and c in adj[b])


def oracle_bc(n: int, edges, source: int) -> tuple[list[int], list[float]]:
    """Shortest-path counts and single-source dependencies from ``source``.

    Returns ``(sigma, delta)``: ``sigma[v]`` is the number of shortest
    paths from the source to ``v`` (0 if unreachable) and ``delta[v]`` is
    the dependency of the source on ``v``, with ``delta[source] = 0``.
    """
    adj = _neighbours(n, edges)
    if not 0 <= source < n:
        raise ValueError(f"source {source} outside [0, {n})")
    sigma = [0] * n
    dist = [-1] * n
    sigma[source], dist[source] = 1, 0
    order = []
    queue = deque([source])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in sorted(adj[v]):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
    delta = [Fraction(0)] * n
    for w in reversed(order):
        for v in adj[w]:
            if dist[v] == dist[w] - 1:
                delta[v] += Fraction(sigma[v], sigma[w]) * (1 + delta[w])
    delta[source] = Fraction(0)
    return sigma, [float(d) for d in delta]
