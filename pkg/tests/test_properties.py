"""Randomized checks of the client's optimizations against the eager baseline."""
from hypothesis import given, settings, strategies as st

from lazyarr import ClientConfig
from programs import ALL_FLAG_COMBOS, fresh_client, generate_program, run_program, values_equal

flag_sets = st.sampled_from(ALL_FLAG_COMBOS)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32), flags=flag_sets, steps=st.integers(1, 40),
       size=st.integers(1, 9), cap=st.sampled_from((1, 2, 3, 1024)))
def test_equivalence_and_monotonicity(seed, flags, steps, size, cap):
    prog = generate_program(seed, steps=steps, size=size)
    ref, base = run_program(prog, ClientConfig.baseline())
    out, c = run_program(prog, ClientConfig(**flags, buffer_cap=cap))
    assert values_equal(ref, out)
    assert c.messages_sent <= base.messages_sent
    assert c.arrays_created <= base.arrays_created


def guarded_client(config, violations: list):
    """A client that checks every store against the pending buffer as it is sent."""
    client = fresh_client(config)
    current = []
    send, execute = client._send, client._execute

    def checked_execute(cmd):
        current.append(cmd)
        try:
            execute(cmd)
        finally:
            current.pop()

    def checked_send(cmd, args):
        if cmd.endswith("_store"):
            for pending in client.pending_commands():
                if pending is current[-1]:
                    continue
                for x in pending.inputs:
                    if getattr(x, "server_id", None) == args["dest"]:
                        violations.append((cmd, args["dest"], pending.index))
        return send(cmd, args)

    client._execute = checked_execute
    client._send = checked_send
    return client


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32), cap=st.sampled_from((2, 1024)))
def test_no_store_into_array_still_read(seed, cap):
    prog = generate_program(seed, steps=30, size=4)
    violations = []
    client = guarded_client(ClientConfig.optimized(buffer_cap=cap), violations)
    run_program(prog, client=client)
    assert violations == []


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), flags=flag_sets)
def test_unobserved_handles_cost_nothing(seed, flags):
    prog = [ins for ins in generate_program(seed, steps=20) if ins[0] not in ("print", "reduce")]
    _, c = run_program(prog, ClientConfig(**flags))
    if flags["lazy"] and flags["dead_elim"]:
        assert c.messages_sent == 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_freelist_ids_are_never_bound(seed):
    prog = generate_program(seed, steps=30, size=3)
    out, c = run_program(prog, ClientConfig.optimized())
    idle = set(c.freelist.ids())
    bound = {sid for sid, info in c._arrays.items() if info.bindings}
    assert not idle & bound
    stats = c.server_stats()
    assert stats["live_arrays"] == stats["arrays_created"] - stats["arrays_deleted"]
