import math

import pytest

from lazyarr import ArrayHandle, ClientConfig, ReleasedHandleError, ServerError
from programs import reassign_chain, doubled_square, fresh_client


def opt(**kw):
    return fresh_client(ClientConfig.optimized(**kw), trace=True)


def base(**kw):
    return fresh_client(ClientConfig.baseline(**kw), trace=True)


def sent(c):
    return [cmd for cmd, _, _ in c.trace if cmd != "connect"]


def test_construction_is_deferred():
    c = opt()
    a = c.randint(0, 10, 10, seed=1)
    b = a * a
    assert sent(c) == [] and a.state == "deferred" and b.server_id is None
    assert c.buffer_size == 2


def test_baseline_is_eager():
    c = base()
    a = c.randint(0, 10, 10, seed=1)
    assert a.state == "materialized" and sent(c) == ["create"]


def test_doubled_square_trace():
    c = opt()
    out, _ = doubled_square(c)
    assert sent(c) == ["create", "binop", "binop_store", "fetch"]
    store = c.trace[3][1]
    assert store["left"] == store["right"] == {"array": "S2"} and store["dest"] == "S2"
    assert out == [2 * x * x for x in fresh_client(ClientConfig.baseline()).randint(0, 10, 10, seed=1).to_values()]


def test_release_unused_sends_nothing():
    c = opt()
    a = c.randint(0, 10, 10, seed=1)
    a.release()
    assert sent(c) == [] and c.buffer_size == 0


def test_dead_code_cascades():
    c = opt()
    a = c.randint(0, 10, 10, seed=1)
    b = c.randint(0, 10, 10, seed=2)
    s = a + b
    a.release()
    b.release()
    assert c.buffer_size == 3   # a and b live on as shadows of s
    s.release()
    assert c.buffer_size == 0 and sent(c) == []


def test_shadow_keeps_old_value():
    c = opt()
    A = c.randint(0, 10, 10, seed=1)
    B = c.randint(0, 10, 10, seed=2)
    C = B + A
    old = A
    A = C + A
    old.release()
    ref = base()
    a, b = ref.randint(0, 10, 10, seed=1), ref.randint(0, 10, 10, seed=2)
    assert C.to_values() == [x + y for x, y in zip(b.to_values(), a.to_values())]
    assert A.to_values() == [2 * x + y for x, y in zip(a.to_values(), b.to_values())]


def test_release_materialized_without_cache_deletes():
    c = opt(array_cache=False)
    a = c.arange(5)
    a.to_values()
    a.release()
    assert sent(c)[-1] == "delete"


def test_release_materialized_with_cache_parks_array():
    c = opt()
    a = c.arange(5)
    a.to_values()
    a.release()
    assert "delete" not in sent(c) and a.server_id is None
    b = c.full(5, 3)
    assert b.to_values() == [3] * 5
    assert sent(c)[-2] == "create_store" and c.client_metrics().freelist_hits == 1


def test_double_release_is_noop_and_use_after_release_fails():
    c = opt()
    a = c.arange(3)
    a.release()
    a.release()
    with pytest.raises(ReleasedHandleError):
        a + 1


def test_copy_ref_keeps_value_alive():
    c = opt()
    a = c.arange(4)
    b = a.copy_ref()
    a.release()
    assert b.to_values() == [0, 1, 2, 3]


def test_to_values_twice_fetches_twice():
    c = opt()
    a = c.arange(3)
    a.to_values()
    a.to_values()
    assert sent(c).count("fetch") == 2
    assert c.array([], "int64").to_values() == []


def test_materialize_is_idempotent():
    c = opt()
    a = c.arange(3)
    sid = c.materialize(a)
    n = c.messages_sent
    assert c.materialize(a) == sid and c.messages_sent == n


def test_flush_sends_everything_but_fetch():
    c = opt()
    a = c.randint(0, 10, 10, seed=1)
    t1, t2 = a * a, a * a
    b = t1 + t2
    t1.release()
    t2.release()
    c.flush()
    assert sent(c) == ["create", "binop", "binop_store"]
    assert c.buffer_size == 0 and b.state == "materialized"
    c.flush()
    assert len(sent(c)) == 3


def test_buffer_cap_overflow_runs_oldest():
    c = opt(buffer_cap=2)
    a = c.arange(4)
    b = c.full(4, 1)
    assert sent(c) == []
    d = a + b
    assert a.state == "materialized" and b.state == "deferred" and d.state == "deferred"
    assert sent(c) == ["create"]


def test_store_reuse_waits_for_last_reader():
    # A is read by two later commands; only the last may overwrite it
    c = opt(cse=False)
    A = c.arange(4)
    B = c.full(4, 10)
    C = A + B
    old, A = A, A * 2
    old.release()
    assert C.to_values() == [10, 11, 12, 13]
    assert A.to_values() == [0, 2, 4, 6]


def test_cse_hits_and_invalidation_after_store():
    c = opt()
    a = c.arange(4)
    x = a * a
    y = a * a
    assert x.to_values() == y.to_values() == [0, 1, 4, 9]
    assert x.server_id == y.server_id and c.client_metrics().cache_hits_expr == 1
    x.release()
    # y still binds the shared array, so it must survive
    z = y + 1
    assert y.to_values() == [0, 1, 4, 9] and z.to_values() == [1, 2, 5, 10]


def test_cse_commutative_and_randint_excluded():
    c = opt()
    a, b = c.arange(3), c.full(3, 2)
    p, q = a + b, b + a
    p.to_values(), q.to_values()
    assert p.server_id == q.server_id
    r1, r2 = c.randint(0, 9, 3, seed=5), c.randint(0, 9, 3, seed=5)
    r1.to_values(), r2.to_values()
    assert r1.server_id != r2.server_id


def test_reduce_memo():
    c = opt()
    a = c.randint(0, 100, 50, seed=3)
    assert a.min() == a.min()
    assert [cmd for cmd in sent(c) if cmd == "reduce"] == ["reduce"]
    assert c.client_metrics().cache_hits_reduce == 1


def test_reduce_memo_invalidated_by_overwrite():
    c = opt()
    a = c.arange(5)
    s1 = a.sum()
    b = a + 1
    a.release()    # b's add may now overwrite a's array
    assert s1 == 10 and b.sum() == 15


def test_mean_std():
    c = opt()
    a = c.array([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0])
    assert a.mean() == 5.0 and a.std() == 2.0
    with pytest.raises(TypeError):
        c.array([True]).mean()


def test_server_errors_surface():
    c = opt()
    a = c.arange(3)
    z = a // 0
    with pytest.raises(ServerError) as e:
        z.to_values()
    assert e.value.kind == "arithmetic"
    with pytest.raises(ValueError):
        a + c.arange(4)
    with pytest.raises(TypeError):
        c.full(3, 1.5) // 2


def test_operators():
    c = opt()
    a = c.array([1, -2, 3])
    assert (a + 1).to_values() == [2, -1, 4]
    assert (10 - a).to_values() == [9, 12, 7]
    assert (-a).to_values() == [-1, 2, -3]
    assert abs(a).to_values() == [1, 2, 3]
    assert (a < 0).to_values() == [False, True, False]
    assert (~(a < 0)).to_values() == [True, False, True]
    assert (a / 2).to_values() == [0.5, -1.0, 1.5]
    assert a.safediv(c.array([0, 1, 2])).to_values() == [0.0, -2.0, 1.5]
    assert a[1:3].to_values() == [-2, 3]
    assert a.eq(3).to_values() == [False, False, True]
    assert len(a) == 3 and isinstance(a, ArrayHandle) and a == a


def test_nonfinite_round_trip():
    c = opt()
    a = c.array([1.0, 0.0, -1.0]) / 0
    v = a.to_values()
    assert v[0] == math.inf and math.isnan(v[1]) and v[2] == -math.inf


def test_metrics_exclude_control_messages():
    c = opt()
    c.server_stats()
    c.reset_server_stats()
    assert c.messages_sent == 0
    out, _ = reassign_chain(c)
    m = c.client_metrics()
    assert m.messages_sent == 5 and m.arrays_created == 3 and m.stores_sent == 1
    assert m.server["arrays_created"] == 3
    assert set(m.to_dict()) >= {"messages_sent", "creates_sent", "stores_sent", "deletes_sent",
                                "fetches_sent", "reduces_sent", "cache_hits_expr",
                                "cache_hits_reduce", "freelist_hits", "buffer_peak",
                                "overhead_ns", "marshal_ns", "transport_ns"}


def test_config_from_env():
    cfg = ClientConfig.from_env({"LAZYARR_CSE": "0", "LAZYARR_BUFFER_CAP": "7"})
    assert cfg.cse is False and cfg.lazy is True and cfg.buffer_cap == 7
    assert ClientConfig.from_env({}, base=ClientConfig.baseline()).label() == "base"
    assert ClientConfig.optimized().label() == "opt"
    with pytest.raises(ValueError):
        ClientConfig.from_env({"LAZYARR_LAZY": "yes"})


def test_unseeded_randint_is_reproducible():
    vals = []
    for cfg in (ClientConfig.baseline(), ClientConfig.optimized()):
        c = fresh_client(cfg, seed=9)
        vals.append([c.randint(0, 100, 5).to_values() for _ in range(2)])
    assert vals[0] == vals[1] and vals[0][0] != vals[0][1]
