"""Client-side caches: idle server arrays, expression results, reductions.

All entries are keyed by server array version, so an overwrite makes stale
entries unreachable without any eager bookkeeping. ``invalidate`` exists
only to keep the tables from growing without bound.
"""
from __future__ import annotations

from collections import OrderedDict, defaultdict
from typing import Any, Hashable, NamedTuple


class FreeList:
    """Idle server arrays bucketed by ``(size, dtype)``, evicted LRU-first."""

    def __init__(self, bucket_cap: int = 64, idle_budget: int = 2 ** 24):
        self.bucket_cap = bucket_cap
        self.idle_budget = idle_budget
        self.buckets: dict[tuple[int, str], OrderedDict[str, None]] = defaultdict(OrderedDict)
        self._lru: OrderedDict[str, tuple[int, str]] = OrderedDict()
        self.idle_elements = 0

    def __contains__(self, server_id: str) -> bool:
        return server_id in self._lru

    def __len__(self) -> int:
        return len(self._lru)

    def push(self, server_id: str, size: int, dtype: str) -> list[str]:
        """Park an idle array. Returns the ids evicted to stay within capacity."""
        key = (size, dtype)
        self.buckets[key][server_id] = None
        self._lru[server_id] = key
        self.idle_elements += size
        evicted = []
        bucket = self.buckets[key]
        while len(bucket) > self.bucket_cap:
            victim = next(iter(bucket))
            self.discard(victim)
            evicted.append(victim)
        while self.idle_elements > self.idle_budget and self._lru:
            victim = next(iter(self._lru))
            self.discard(victim)
            evicted.append(victim)
        return evicted

    def pop(self, size: int, dtype: str) -> str | None:
        """Take the most recently parked array of this shape, if any."""
        bucket = self.buckets.get((size, dtype))
        if not bucket:
            return None
        server_id, _ = bucket.popitem(last=True)
        del self._lru[server_id]
        self.idle_elements -= size
        return server_id

    def discard(self, server_id: str) -> bool:
        key = self._lru.pop(server_id, None)
        if key is None:
            return False
        del self.buckets[key][server_id]
        self.idle_elements -= key[0]
        return True

    def ids(self) -> list[str]:
        return list(self._lru)


class CachedResult(NamedTuple):
    server_id: str
    version: int


class ExprCache:
    """Three-address memo: ``(op, operand keys) -> (result id, result version)``."""

    def __init__(self):
        self._table: dict[Hashable, CachedResult] = {}
        self._by_sid: dict[str, set] = defaultdict(set)

    def __len__(self):
        return len(self._table)

    def get(self, key: Hashable, current_version) -> CachedResult | None:
        """Look up ``key``; ``current_version(sid)`` returns None for dead ids."""
        hit = self._table.get(key)
        if hit is None:
            return None
        if current_version(hit.server_id) != hit.version:
            self._drop(key)
            return None
        return hit

    def put(self, key: Hashable, server_id: str, version: int, operand_ids=()):
        self._table[key] = CachedResult(server_id, version)
        for sid in (server_id, *operand_ids):
            self._by_sid[sid].add(key)

    def _drop(self, key):
        self._table.pop(key, None)

    def invalidate(self, server_id: str):
        for key in self._by_sid.pop(server_id, ()):
            self._table.pop(key, None)


class ReduceCache:
    def __init__(self):
        self._table: dict[tuple, Any] = {}
        self._by_sid: dict[str, set] = defaultdict(set)

    def __len__(self):
        return len(self._table)

    def get(self, key: tuple, default=None):
        return self._table.get(key, default)

    def __contains__(self, key):
        return key in self._table

    def put(self, key: tuple, value, server_ids):
        self._table[key] = value
        for sid in server_ids:
            self._by_sid[sid].add(key)

    def invalidate(self, server_id: str):
        for key in self._by_sid.pop(server_id, ()):
            self._table.pop(key, None)
