"""Optimizing client for the array server.

Array operations are recorded in a command buffer instead of being sent
right away. A value is only computed when something observable needs it
(``to_values``, a reduction, a flush or a full buffer). At that point the
client walks the buffer, executes exactly the commands the value depends
on, and uses what it knows about liveness to

* drop commands whose results can never be observed,
* write results into inputs that die at that command (``*_store``),
* recycle idle server arrays of the right shape (free list),
* reuse identical earlier results (expression cache), and
* remember reduction results per array version.

With every optimization flag off the client behaves like a plain eager
proxy: one message per operation, one delete per released array.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Iterable, Mapping, NamedTuple

from .cache import ExprCache, FreeList, ReduceCache
from .protocol import (
    COMMUTATIVE_OPS,
    CONTROL_COMMANDS,
    REDUCE_OPS,
    Request,
    binop_result_dtype,
    decode_number,
    decode_reply,
    decode_values,
    encode_frame,
    encode_number,
    lookup_command,
    scalar_dtype,
    unary_result_dtype,
)
from .transport import LocalTransport, SocketTransport

DEFERRED = "deferred"
MATERIALIZED = "materialized"
FREED = "freed"


class ServerError(RuntimeError):
    """The server answered a request with ``status: error``."""

    def __init__(self, cmd: str, message: str):
        self.cmd = cmd
        self.kind, _, detail = message.partition(": ")
        super().__init__(f"{cmd}: {message}")


class ReleasedHandleError(ValueError):
    pass


@dataclass
class ClientConfig:
    lazy: bool = True
    dead_elim: bool = True
    store_reuse: bool = True
    array_cache: bool = True
    cse: bool = True
    reduce_memo: bool = True
    buffer_cap: int = 1024
    freelist_bucket_cap: int = 64
    freelist_idle_elements: int = 2 ** 24

    FLAGS = ("lazy", "dead_elim", "store_reuse", "array_cache", "cse", "reduce_memo")

    @classmethod
    def baseline(cls, **overrides) -> "ClientConfig":
        return cls(**{f: False for f in cls.FLAGS}, **overrides)

    @classmethod
    def optimized(cls, **overrides) -> "ClientConfig":
        return cls(**overrides)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] | None = None,
                 base: "ClientConfig | None" = None) -> "ClientConfig":
        """Apply ``LAZYARR_<FLAG>=0|1`` and ``LAZYARR_BUFFER_CAP`` overrides."""
        environ = os.environ if environ is None else environ
        cfg = base or cls()
        updates: dict[str, Any] = {}
        for flag in cls.FLAGS:
            raw = environ.get(f"LAZYARR_{flag.upper()}")
            if raw is None:
                continue
            if raw not in ("0", "1"):
                raise ValueError(f"LAZYARR_{flag.upper()} must be 0 or 1, got {raw!r}")
            updates[flag] = raw == "1"
        if "LAZYARR_BUFFER_CAP" in environ:
            updates["buffer_cap"] = int(environ["LAZYARR_BUFFER_CAP"])
        return replace(cfg, **updates)

    def flags(self) -> dict[str, bool]:
        return {f: getattr(self, f) for f in self.FLAGS}

    def label(self) -> str:
        on = [f for f in self.FLAGS if getattr(self, f)]
        if len(on) == len(self.FLAGS):
            return "opt"
        if not on:
            return "base"
        return "+".join(on)


class Scalar(NamedTuple):
    value: Any
    dtype: str


@dataclass(eq=False)
class Command:
    index: int
    op: str                 # create | binop | unary | slice
    name: str | None        # operator name for binop/unary
    inputs: list            # Record or Scalar
    params: dict
    output: "Record"
    executed: bool = False


@dataclass(eq=False)
class Record:
    client_id: str
    dtype: str
    size: int
    state: str = DEFERRED
    command: Command | None = None
    server_id: str | None = None
    user_refs: int = 0
    readers: set = field(default_factory=set)

    @property
    def pending_refs(self) -> int:
        return len(self.readers)

    @property
    def last_use_index(self) -> int:
        return max(self.readers, default=-1)


@dataclass(eq=False)
class ArrayInfo:
    """What the client knows about one live server array."""
    server_id: str
    size: int
    dtype: str
    version: int = 0
    bindings: set = field(default_factory=set)


@dataclass
class MetricsReport:
    messages_sent: int = 0
    creates_sent: int = 0
    stores_sent: int = 0
    deletes_sent: int = 0
    fetches_sent: int = 0
    reduces_sent: int = 0
    binops_sent: int = 0
    intersects_sent: int = 0
    arrays_created: int = 0
    cache_hits_expr: int = 0
    cache_hits_reduce: int = 0
    freelist_hits: int = 0
    buffer_peak: int = 0
    overhead_ns: int = 0
    marshal_ns: int = 0
    transport_ns: int = 0
    server: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _api(fn):
    """Attribute wall time of outermost public calls to client overhead."""

    @functools.wraps(fn)
    def wrapper(self, *args, **kwargs):
        if self._api_depth:
            return fn(self, *args, **kwargs)
        self._api_depth += 1
        t0 = time.perf_counter_ns()
        try:
            return fn(self, *args, **kwargs)
        finally:
            self._api_depth -= 1
            self._api_ns += time.perf_counter_ns() - t0

    return wrapper


def _as_scalar(x) -> Scalar:
    if hasattr(x, "item") and not isinstance(x, ArrayHandle):
        x = x.item()
    return Scalar(x, scalar_dtype(x))


def _value_key(value) -> str:
    # repr keeps -0.0 apart from 0.0 and 1 apart from 1.0
    return repr(value)


class Client:
    """A session with an array server.

    ``transport`` defaults to a private in-process server. Use
    :meth:`Client.connect` to talk to a server over TCP.
    """

    def __init__(self, transport=None, config: ClientConfig | None = None,
                 name: str = "lazyarr", seed: int = 0, trace: bool = False):
        self.transport = transport if transport is not None else LocalTransport()
        self.config = config if config is not None else ClientConfig()
        self.seed = seed
        self.freelist = FreeList(self.config.freelist_bucket_cap, self.config.freelist_idle_elements)
        self.expr_cache = ExprCache()
        self.reduce_cache = ReduceCache()
        self.trace: list[tuple[str, dict, dict]] | None = [] if trace else None
        self._counters = MetricsReport()
        self._api_depth = 0
        self._api_ns = 0
        self._wire_ns = 0
        self._tags = itertools.count(0)
        self._client_ids = itertools.count(1)
        self._cmd_index = itertools.count(0)
        self._rand_draws = itertools.count(0)
        self._buffer: dict[int, Command] = {}
        self._arrays: dict[str, ArrayInfo] = {}
        self.session_id = self._send("connect", {"client_name": name})["session_id"]

    @classmethod
    def connect(cls, host: str = "127.0.0.1", port: int = 5555, **kwargs) -> "Client":
        return cls(SocketTransport(host, port), **kwargs)

    def close(self):
        self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- wire ---------------------------------------------------------------

    def _send(self, cmd: str, args: dict) -> dict:
        c = self._counters
        t0 = time.perf_counter_ns()
        frame = encode_frame(Request(next(self._tags), cmd, args))
        t1 = time.perf_counter_ns()
        raw = self.transport.roundtrip(frame)
        t2 = time.perf_counter_ns()
        reply = decode_reply(raw)
        t3 = time.perf_counter_ns()
        server_ns = sum(reply.timing.values()) if reply.timing else 0
        c.marshal_ns += (t1 - t0) + (t3 - t2)
        c.transport_ns += max(0, (t2 - t1) - server_ns)
        self._wire_ns += t3 - t0
        if cmd not in CONTROL_COMMANDS:
            c.messages_sent += 1
            spec = lookup_command(cmd)
            if spec.store:
                c.stores_sent += 1
            if cmd == "create":
                c.creates_sent += 1
            elif cmd == "delete":
                c.deletes_sent += 1
            elif cmd == "fetch":
                c.fetches_sent += 1
            elif cmd == "reduce":
                c.reduces_sent += 1
            elif cmd == "intersect_size":
                c.intersects_sent += 1
            elif cmd.startswith("binop"):
                c.binops_sent += 1
            if spec.creates and reply.ok:
                c.arrays_created += 1
        if self.trace is not None:
            self.trace.append((cmd, args, reply.payload if reply.ok else {"error": reply.error}))
        if not reply.ok:
            raise ServerError(cmd, reply.error or "")
        return reply.payload or {}

    # -- metrics ------------------------------------------------------------

    def server_stats(self) -> dict:
        return self._send("stats", {})

    def reset_server_stats(self) -> None:
        self._send("reset_stats", {})

    def shutdown_server(self) -> None:
        self._send("shutdown", {})

    def client_metrics(self, include_server: bool = True) -> MetricsReport:
        report = replace(self._counters, server={})
        report.overhead_ns = max(0, self._api_ns - self._wire_ns)
        if include_server:
            report.server = self.server_stats()
        return report

    def reset_metrics(self) -> None:
        self._counters = MetricsReport()
        self._api_ns = self._wire_ns = 0

    @property
    def messages_sent(self) -> int:
        return self._counters.messages_sent

    @property
    def arrays_created(self) -> int:
        return self._counters.arrays_created

    @property
    def buffer_size(self) -> int:
        return len(self._buffer)

    def pending_commands(self) -> list[Command]:
        return list(self._buffer.values())

    # -- array creation -----------------------------------------------------

    @_api
    def create(self, fill: dict, dtype: str, size: int) -> "ArrayHandle":
        if not isinstance(size, int) or isinstance(size, bool) or size < 0:
            raise ValueError(f"size must be a non-negative integer, got {size!r}")
        if dtype not in ("int64", "float64", "bool"):
            raise ValueError(f"unknown dtype {dtype!r}")
        fill = dict(fill)
        if fill.get("kind") == "values":
            if len(fill["data"]) != size:
                raise ValueError(f"{len(fill['data'])} values given for size {size}")
            fill["data"] = [encode_number(v) for v in fill["data"]]
        elif fill.get("kind") == "const":
            fill["value"] = encode_number(fill["value"])
        elif fill.get("kind") == "randint":
            if fill.get("seed") is None:
                fill["seed"] = self._next_seed()
        elif fill.get("kind") != "arange":
            raise ValueError(f"unknown fill {fill!r}")
        return self._issue("create", None, [], {"fill": fill, "dtype": dtype, "size": size}, dtype, size)

    def _next_seed(self) -> int:
        # drawn at issue time so every optimization setting sees the same seeds
        return (self.seed * 1_000_003 + next(self._rand_draws)) % 2 ** 63

    def randint(self, lo: int, hi: int, size: int, seed: int | None = None,
                dtype: str = "int64") -> "ArrayHandle":
        return self.create({"kind": "randint", "lo": lo, "hi": hi, "seed": seed}, dtype, size)

    def full(self, size: int, value, dtype: str | None = None) -> "ArrayHandle":
        dtype = dtype or scalar_dtype(value)
        return self.create({"kind": "const", "value": value}, dtype, size)

    def zeros(self, size: int, dtype: str = "float64") -> "ArrayHandle":
        return self.full(size, False if dtype == "bool" else 0, dtype)

    def ones(self, size: int, dtype: str = "float64") -> "ArrayHandle":
        return self.full(size, True if dtype == "bool" else 1, dtype)

    def arange(self, size: int, dtype: str = "int64") -> "ArrayHandle":
        return self.create({"kind": "arange"}, dtype, size)

    def array(self, values: Iterable, dtype: str | None = None) -> "ArrayHandle":
        data = [v.item() if hasattr(v, "item") else v for v in values]
        if dtype is None:
            kinds = {scalar_dtype(v) for v in data} or {"float64"}
            dtype = "float64" if "float64" in kinds else "int64" if "int64" in kinds else "bool"
        if dtype == "float64":
            data = [float(v) for v in data]
        elif dtype == "int64":
            data = [int(v) for v in data]
        else:
            data = [bool(v) for v in data]
        return self.create({"kind": "values", "data": data}, dtype, len(data))

    # -- deferred operations ------------------------------------------------

    def _record_of(self, handle: "ArrayHandle") -> Record:
        if handle._client is not self:
            raise ValueError("array handle belongs to a different client")
        if handle.released:
            raise ReleasedHandleError(f"{handle.client_id} has been released")
        return handle._record

    def _operand(self, x):
        return self._record_of(x) if isinstance(x, ArrayHandle) else _as_scalar(x)

    @_api
    def binop(self, op: str, a, b) -> "ArrayHandle":
        left, right = self._operand(a), self._operand(b)
        arrays = [x for x in (left, right) if isinstance(x, Record)]
        if not arrays:
            raise TypeError("binop needs at least one array operand")
        if len(arrays) == 2 and left.size != right.size:
            raise ValueError(f"size mismatch: {left.size} vs {right.size}")
        dtype = binop_result_dtype(op, left.dtype, right.dtype)
        return self._issue("binop", op, [left, right], {}, dtype, arrays[0].size)

    @_api
    def unary(self, op: str, a: "ArrayHandle") -> "ArrayHandle":
        rec = self._record_of(a)
        dtype = unary_result_dtype(op, rec.dtype)
        return self._issue("unary", op, [rec], {}, dtype, rec.size)

    @_api
    def slice(self, a: "ArrayHandle", start: int, stop: int) -> "ArrayHandle":
        rec = self._record_of(a)
        if not 0 <= start <= stop <= rec.size:
            raise IndexError(f"range [{start}, {stop}) invalid for size {rec.size}")
        return self._issue("slice", None, [rec], {"start": start, "stop": stop}, rec.dtype, stop - start)

    def _issue(self, op, name, inputs, params, dtype, size) -> "ArrayHandle":
        rec = Record(f"C{next(self._client_ids)}", dtype, size, user_refs=1)
        cmd = Command(next(self._cmd_index), op, name, inputs, params, rec)
        rec.command = cmd
        for x in inputs:
            if isinstance(x, Record):
                x.readers.add(cmd.index)
        self._buffer[cmd.index] = cmd
        self._counters.buffer_peak = max(self._counters.buffer_peak, len(self._buffer))
        if not self.config.lazy:
            try:
                self._materialize(rec)
            except Exception:
                self._drop_command(cmd)
                raise
        else:
            while len(self._buffer) > self.config.buffer_cap:
                self._materialize(next(iter(self._buffer.values())).output)
        return ArrayHandle(self, rec)

    def _drop_command(self, cmd: Command):
        self._buffer.pop(cmd.index, None)
        cmd.output.state = FREED
        cmd.output.command = None
        for x in cmd.inputs:
            if isinstance(x, Record):
                x.readers.discard(cmd.index)

    # -- materialization ----------------------------------------------------

    @_api
    def materialize(self, handle: "ArrayHandle") -> str:
        return self._materialize(self._record_of(handle))

    def _materialize(self, rec: Record) -> str:
        if rec.state == MATERIALIZED:
            return rec.server_id
        if rec.state == FREED:
            raise ReleasedHandleError(f"{rec.client_id} no longer has a value")
        # dependency closure, executed in buffer (issue) order
        closure: dict[int, Command] = {}
        stack = [rec.command]
        while stack:
            cmd = stack.pop()
            if cmd.index in closure:
                continue
            closure[cmd.index] = cmd
            for x in cmd.inputs:
                if isinstance(x, Record) and x.state == DEFERRED:
                    stack.append(x.command)
        for index in sorted(closure):
            self._execute(closure[index])
        return rec.server_id

    def _operand_ref(self, x) -> dict:
        if isinstance(x, Record):
            return {"array": x.server_id}
        return {"scalar": encode_number(x.value), "dtype": x.dtype}

    def _operand_key(self, x) -> tuple:
        if isinstance(x, Record):
            return ("a", x.server_id, self._arrays[x.server_id].version)
        return ("s", x.dtype, _value_key(x.value))

    def _cse_key(self, cmd: Command):
        if cmd.op == "create":
            fill = cmd.params["fill"]
            kind = fill["kind"]
            if kind == "randint":
                return None
            if kind == "const":
                detail = (_value_key(fill["value"]),)
            elif kind == "values":
                detail = tuple(map(_value_key, fill["data"]))
            else:
                detail = ()
            return ("create", cmd.params["dtype"], cmd.params["size"], kind, detail)
        keys = [self._operand_key(x) for x in cmd.inputs]
        if cmd.op == "binop":
            if cmd.name in COMMUTATIVE_OPS:
                keys.sort()
            return ("binop", cmd.name, *keys)
        if cmd.op == "unary":
            return ("unary", cmd.name, keys[0])
        return ("slice", keys[0], cmd.params["start"], cmd.params["stop"])

    def _version_of(self, server_id: str) -> int | None:
        info = self._arrays.get(server_id)
        return None if info is None else info.version

    def _dead_after(self, rec: Record, index: int) -> bool:
        return rec.user_refs == 0 and rec.readers == {index}

    def _store_target(self, cmd: Command) -> ArrayInfo | None:
        """Leftmost input whose server array nobody needs after ``cmd``."""
        out = cmd.output
        for x in cmd.inputs:
            if not isinstance(x, Record) or x.state != MATERIALIZED:
                continue
            info = self._arrays[x.server_id]
            if info.size != out.size or info.dtype != out.dtype:
                continue
            if all(self._dead_after(r, cmd.index) for r in info.bindings):
                return info
        return None

    def _execute(self, cmd: Command):
        if cmd.executed:
            return
        cfg = self.config
        out = cmd.output
        cse_key = self._cse_key(cmd) if cfg.cse else None
        if cse_key is not None:
            hit = self.expr_cache.get(cse_key, self._version_of)
            if hit is not None:
                self._counters.cache_hits_expr += 1
                self.freelist.discard(hit.server_id)
                self._bind(out, self._arrays[hit.server_id])
                self._finish(cmd)
                return

        target = self._store_target(cmd) if cfg.store_reuse and cmd.op in ("binop", "unary") else None
        dest = target
        from_freelist = False
        if dest is None and cfg.array_cache:
            sid = self.freelist.pop(out.size, out.dtype)
            if sid is not None:
                dest = self._arrays[sid]
                from_freelist = True
                self._counters.freelist_hits += 1

        operand_ids = [x.server_id for x in cmd.inputs if isinstance(x, Record)]
        if dest is not None:
            # an overwrite is only legal if no unexecuted command still reads dest
            assert all(r.readers <= {cmd.index} for r in dest.bindings), "premature overwrite"
        try:
            payload = self._send(*self._wire_command(cmd, dest))
        except Exception:
            if from_freelist:
                self.freelist.push(dest.server_id, dest.size, dest.dtype)
            raise

        if dest is not None:
            dest.version += 1
            self.expr_cache.invalidate(dest.server_id)
            self.reduce_cache.invalidate(dest.server_id)
            for r in list(dest.bindings):
                # the dying inputs hand their array over to the result
                r.state = FREED
                r.server_id = None
            dest.bindings.clear()
            info = dest
        else:
            sid = payload["server_id"]
            info = self._arrays[sid] = ArrayInfo(sid, out.size, out.dtype)
        self._bind(out, info)
        if cse_key is not None and info.server_id not in operand_ids:
            self.expr_cache.put(cse_key, info.server_id, info.version, operand_ids)
        self._finish(cmd)

    def _wire_command(self, cmd: Command, dest: ArrayInfo | None) -> tuple[str, dict]:
        refs = [self._operand_ref(x) for x in cmd.inputs]
        if cmd.op == "create":
            if dest is not None:
                return "create_store", {"dest": dest.server_id, "fill": cmd.params["fill"]}
            return "create", dict(cmd.params)
        if cmd.op == "binop":
            args = {"op": cmd.name, "left": refs[0], "right": refs[1]}
        elif cmd.op == "unary":
            args = {"op": cmd.name, "a": refs[0]["array"]}
        else:
            args = {"a": refs[0]["array"], "start": cmd.params["start"], "stop": cmd.params["stop"]}
        if dest is None:
            return cmd.op, args
        args["dest"] = dest.server_id
        return cmd.op + "_store", args

    def _bind(self, rec: Record, info: ArrayInfo):
        rec.state = MATERIALIZED
        rec.server_id = info.server_id
        rec.command = None
        info.bindings.add(rec)

    def _finish(self, cmd: Command):
        cmd.executed = True
        del self._buffer[cmd.index]
        seen = set()
        for x in cmd.inputs:
            if isinstance(x, Record) and id(x) not in seen:
                seen.add(id(x))
                x.readers.discard(cmd.index)
                self._maybe_reclaim(x)
        self._maybe_reclaim(cmd.output)

    # -- reclamation --------------------------------------------------------

    def _maybe_reclaim(self, rec: Record):
        work = [rec]
        while work:
            r = work.pop()
            if r.user_refs > 0 or r.readers or r.state == FREED:
                continue
            if r.state == DEFERRED:
                if not self.config.dead_elim:
                    # no dead-command elimination: compute it, then let it go
                    self._materialize(r)
                    continue
                cmd = r.command
                del self._buffer[cmd.index]
                r.state = FREED
                r.command = None
                for x in cmd.inputs:
                    if isinstance(x, Record):
                        x.readers.discard(cmd.index)
                        work.append(x)
                continue
            info = self._arrays[r.server_id]
            info.bindings.discard(r)
            r.state = FREED
            r.server_id = None
            if not info.bindings:
                self._retire(info)

    def _retire(self, info: ArrayInfo):
        if self.config.array_cache:
            for victim in self.freelist.push(info.server_id, info.size, info.dtype):
                self._delete(victim)
        else:
            self._delete(info.server_id)

    def _delete(self, server_id: str):
        self._send("delete", {"a": server_id})
        del self._arrays[server_id]
        self.expr_cache.invalidate(server_id)
        self.reduce_cache.invalidate(server_id)

    @_api
    def release(self, handle: "ArrayHandle") -> None:
        """Drop one user reference. Releasing twice is a no-op."""
        if handle._client is not self:
            raise ValueError("array handle belongs to a different client")
        if handle.released:
            return
        handle.released = True
        rec = handle._record
        rec.user_refs -= 1
        self._maybe_reclaim(rec)

    @_api
    def copy_ref(self, handle: "ArrayHandle") -> "ArrayHandle":
        rec = self._record_of(handle)
        rec.user_refs += 1
        return ArrayHandle(self, rec)

    @_api
    def flush(self) -> None:
        while self._buffer:
            self._materialize(next(iter(self._buffer.values())).output)

    # -- observation --------------------------------------------------------

    @_api
    def reduce(self, op: str, handle: "ArrayHandle"):
        if op not in REDUCE_OPS:
            raise ValueError(f"unknown reduction {op!r}")
        sid = self._materialize(self._record_of(handle))
        key = (op, sid, self._arrays[sid].version)
        if self.config.reduce_memo and key in self.reduce_cache:
            self._counters.cache_hits_reduce += 1
            return self.reduce_cache.get(key)
        value = decode_number(self._send("reduce", {"op": op, "a": sid})["value"])
        if self.config.reduce_memo:
            self.reduce_cache.put(key, value, [sid])
        return value

    @_api
    def intersect_size(self, a: "ArrayHandle", b: "ArrayHandle") -> int:
        sa = self._materialize(self._record_of(a))
        sb = self._materialize(self._record_of(b))
        ka = (sa, self._arrays[sa].version)
        kb = (sb, self._arrays[sb].version)
        key = ("intersect", *sorted((ka, kb)))
        if self.config.reduce_memo and key in self.reduce_cache:
            self._counters.cache_hits_reduce += 1
            return self.reduce_cache.get(key)
        value = self._send("intersect_size", {"a": sa, "b": sb})["value"]
        if self.config.reduce_memo:
            self.reduce_cache.put(key, value, [sa, sb])
        return value

    @_api
    def mean(self, handle: "ArrayHandle") -> float:
        rec = self._record_of(handle)
        if rec.dtype == "bool":
            raise TypeError("mean requires a numeric array")
        if rec.size == 0:
            raise ValueError("mean of an empty array")
        return self.reduce("sum", handle) / rec.size

    @_api
    def std(self, handle: "ArrayHandle") -> float:
        """Population standard deviation from the two running sums."""
        rec = self._record_of(handle)
        m = self.mean(handle)
        sq = self.binop("mul", handle, handle)
        try:
            sumsq = self.reduce("sum", sq)
        finally:
            self.release(sq)
        var = sumsq / rec.size - m * m
        return math.sqrt(var) if var > 0 else 0.0

    @_api
    def to_values(self, handle: "ArrayHandle") -> list:
        return self.fetch(handle)

    @_api
    def fetch(self, handle: "ArrayHandle", start: int | None = None, stop: int | None = None) -> list:
        sid = self._materialize(self._record_of(handle))
        args: dict[str, Any] = {"a": sid}
        if start is not None:
            args["start"] = start
        if stop is not None:
            args["stop"] = stop
        payload = self._send("fetch", args)
        return decode_values(payload["values"], payload["dtype"])


class ArrayHandle:
    """User-facing proxy for a (possibly not yet computed) server array.

    Comparison operators other than ``==``/``!=`` build boolean arrays; use
    :meth:`eq` and :meth:`ne` for elementwise equality so handles keep
    ordinary identity semantics.
    """

    __slots__ = ("_client", "_record", "released")

    def __init__(self, client: Client, record: Record):
        self._client = client
        self._record = record
        self.released = False

    @property
    def client(self) -> Client:
        return self._client

    @property
    def client_id(self) -> str:
        return self._record.client_id

    @property
    def dtype(self) -> str:
        return self._record.dtype

    @property
    def size(self) -> int:
        return self._record.size

    @property
    def state(self) -> str:
        return self._record.state

    @property
    def server_id(self) -> str | None:
        return self._record.server_id

    @property
    def version(self) -> int | None:
        sid = self._record.server_id
        return None if sid is None else self._client._version_of(sid)

    def __len__(self):
        return self._record.size

    def __repr__(self):
        flag = " released" if self.released else ""
        return f"<ArrayHandle {self.client_id} {self.dtype}[{self.size}] {self.state}{flag}>"

    def release(self):
        self._client.release(self)

    def copy_ref(self) -> "ArrayHandle":
        return self._client.copy_ref(self)

    def to_values(self) -> list:
        return self._client.to_values(self)

    def sum(self):
        return self._client.reduce("sum", self)

    def prod(self):
        return self._client.reduce("prod", self)

    def min(self):
        return self._client.reduce("min", self)

    def max(self):
        return self._client.reduce("max", self)

    def any(self):
        return self._client.reduce("any", self)

    def all(self):
        return self._client.reduce("all", self)

    def mean(self):
        return self._client.mean(self)

    def std(self):
        return self._client.std(self)

    def __getitem__(self, key):
        if not isinstance(key, slice) or key.step not in (None, 1):
            raise TypeError("only contiguous slices are supported")
        start, stop, _ = key.indices(self.size)
        return self._client.slice(self, start, max(start, stop))

    def _bin(op, reflected=False):
        if reflected:
            return lambda self, other: self._client.binop(op, other, self)
        return lambda self, other: self._client.binop(op, self, other)

    __add__, __radd__ = _bin("add"), _bin("add", True)
    __sub__, __rsub__ = _bin("sub"), _bin("sub", True)
    __mul__, __rmul__ = _bin("mul"), _bin("mul", True)
    __truediv__, __rtruediv__ = _bin("truediv"), _bin("truediv", True)
    __floordiv__, __rfloordiv__ = _bin("floordiv"), _bin("floordiv", True)
    __mod__, __rmod__ = _bin("mod"), _bin("mod", True)
    __lt__, __le__ = _bin("lt"), _bin("le")
    __gt__, __ge__ = _bin("gt"), _bin("ge")
    del _bin

    def eq(self, other):
        return self._client.binop("eq", self, other)

    def ne(self, other):
        return self._client.binop("ne", self, other)

    def safediv(self, other):
        return self._client.binop("safediv", self, other)

    def __neg__(self):
        return self._client.unary("neg", self)

    def __abs__(self):
        return self._client.unary("abs", self)

    def __invert__(self):
        return self._client.unary("lognot", self)
