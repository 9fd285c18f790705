from hypothesis import given, strategies as st

from lazyarr.cache import ExprCache, FreeList, ReduceCache


def test_freelist_matches_shape():
    fl = FreeList()
    fl.push("S1", 10, "int64")
    fl.push("S2", 10, "float64")
    assert fl.pop(10, "bool") is None
    assert fl.pop(5, "int64") is None
    assert fl.pop(10, "float64") == "S2"
    assert fl.pop(10, "int64") == "S1"
    assert len(fl) == 0 and fl.idle_elements == 0


def test_freelist_pops_most_recent():
    fl = FreeList()
    for sid in ("S1", "S2", "S3"):
        fl.push(sid, 4, "int64")
    assert fl.pop(4, "int64") == "S3"


def test_freelist_bucket_cap_evicts_oldest():
    fl = FreeList(bucket_cap=2)
    assert fl.push("S1", 4, "int64") == []
    assert fl.push("S2", 4, "int64") == []
    assert fl.push("S3", 4, "int64") == ["S1"]
    assert "S1" not in fl and "S3" in fl


def test_freelist_idle_budget_is_lru_across_buckets():
    fl = FreeList(idle_budget=10)
    fl.push("S1", 4, "int64")
    fl.push("S2", 4, "float64")
    assert fl.push("S3", 4, "bool") == ["S1"]
    assert fl.idle_elements == 8


def test_freelist_discard():
    fl = FreeList()
    fl.push("S1", 3, "int64")
    assert fl.discard("S1") and not fl.discard("S1")
    assert fl.pop(3, "int64") is None


@given(st.lists(st.tuples(st.sampled_from(("push", "pop")), st.integers(1, 4),
                          st.sampled_from(("int64", "bool"))), max_size=60))
def test_freelist_never_returns_wrong_shape_or_twice(ops):
    fl = FreeList(bucket_cap=3, idle_budget=9)
    shape = {}
    idle = set()
    for i, (op, size, dtype) in enumerate(ops):
        if op == "push":
            sid = f"S{i}"
            shape[sid] = (size, dtype)
            idle.add(sid)
            for victim in fl.push(sid, size, dtype):
                idle.remove(victim)
        else:
            sid = fl.pop(size, dtype)
            if sid is not None:
                assert shape[sid] == (size, dtype)
                idle.remove(sid)
        assert set(fl.ids()) == idle
        assert fl.idle_elements == sum(shape[s][0] for s in idle) <= 9


def test_expr_cache_version_check():
    cache = ExprCache()
    versions = {"S2": 0}
    cache.put(("mul", ("S1", 0), ("S1", 0)), "S2", 0, ["S1"])
    assert cache.get(("mul", ("S1", 0), ("S1", 0)), versions.get).server_id == "S2"
    versions["S2"] = 1   # the result array was overwritten
    assert cache.get(("mul", ("S1", 0), ("S1", 0)), versions.get) is None
    assert len(cache) == 0


def test_expr_cache_invalidate_by_operand():
    cache = ExprCache()
    cache.put(("neg", ("S1", 0)), "S2", 0, ["S1"])
    cache.invalidate("S1")
    assert cache.get(("neg", ("S1", 0)), lambda sid: 0) is None


def test_reduce_cache():
    rc = ReduceCache()
    rc.put(("sum", "S1", 0), 6, ["S1"])
    assert ("sum", "S1", 0) in rc and rc.get(("sum", "S1", 0)) == 6
    rc.invalidate("S1")
    assert ("sum", "S1", 0) not in rc
