"""Eager array server: a symbol table of named 1-D arrays driven by commands.

The server does no optimization of its own. Every request is executed as it
arrives; the ``*_store`` commands let a client direct a result into an
existing array instead of allocating a new one.
"""
from __future__ import annotations

import itertools
import logging
import socketserver
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .protocol import (
    DTypeError,
    FrameError,
    ProtocolError,
    Reply,
    Request,
    TIMING_FIELDS,
    binop_result_dtype,
    decode_frame,
    decode_number,
    decode_values,
    encode_frame,
    encode_number,
    encode_values,
    read_frame,
    unary_result_dtype,
    validate_request,
)

log = logging.getLogger(__name__)

DEFAULT_ELEMENT_BUDGET = 2 ** 26
DEFAULT_PORT = 5555


class CommandError(Exception):
    """A request was well formed but could not be executed."""

    kind = "error"

    def __str__(self):
        return f"{self.kind}: {super().__str__()}"


class UnknownIdError(CommandError):
    kind = "unknown_id"


class SizeMismatchError(CommandError):
    kind = "size_mismatch"


class DTypeMismatchError(CommandError):
    kind = "dtype"


class BoundsError(CommandError):
    kind = "bounds"


class ArithmeticCommandError(CommandError):
    kind = "arithmetic"


class ResourceError(CommandError):
    kind = "resource"


class SchemaCommandError(CommandError):
    kind = "schema"


@dataclass
class ServerArray:
    server_id: str
    data: np.ndarray
    version: int = 0

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> str:
        return kernels.dtype_name(self.data)


@dataclass
class ServerMetrics:
    messages_handled: int = 0
    arrays_created: int = 0
    arrays_deleted: int = 0
    parse_ns: int = 0
    create_ns: int = 0
    delete_ns: int = 0
    compute_ns: int = 0


@dataclass
class Session:
    session_id: str
    client_name: str = ""
    last_tag: int = -1


@dataclass
class _Timing:
    parse_ns: int = 0
    create_ns: int = 0
    delete_ns: int = 0
    compute_ns: int = 0

    def as_dict(self):
        return {k: getattr(self, k) for k in TIMING_FIELDS}


class ArrayServer:
    """In-memory symbol table plus the command dispatcher.

    Commands are serialized by a single lock, so several sessions may share
    one server safely.
    """

    def __init__(self, element_budget: int = DEFAULT_ELEMENT_BUDGET):
        self.element_budget = element_budget
        self.arrays: dict[str, ServerArray] = {}
        self.metrics = ServerMetrics()
        self.created_count = 0
        self.deleted_count = 0
        self.live_elements = 0
        self._ids = itertools.count(1)
        self._sessions = itertools.count(1)
        self._lock = threading.RLock()
        self.shutdown_requested = threading.Event()

    # -- symbol table -----------------------------------------------------

    def get(self, server_id) -> ServerArray:
        try:
            return self.arrays[server_id]
        except (KeyError, TypeError):
            raise UnknownIdError(f"no array named {server_id!r}") from None

    def _register(self, data: np.ndarray, timing: _Timing) -> str:
        t0 = time.perf_counter_ns()
        sid = f"S{next(self._ids)}"
        self.arrays[sid] = ServerArray(sid, data)
        self.live_elements += data.size
        self.created_count += 1
        self.metrics.arrays_created += 1
        timing.create_ns += time.perf_counter_ns() - t0
        return sid

    def _check_budget(self, size: int):
        if size < 0:
            raise SchemaCommandError(f"size must be non-negative, got {size}")
        if self.live_elements + size > self.element_budget:
            raise ResourceError(
                f"allocating {size} elements would exceed the budget of {self.element_budget}")

    def _store(self, dest: ServerArray, result: np.ndarray):
        if result.size != dest.size:
            raise SizeMismatchError(f"result has {result.size} elements, {dest.server_id} has {dest.size}")
        if kernels.dtype_name(result) != dest.dtype:
            raise DTypeMismatchError(
                f"result dtype {kernels.dtype_name(result)} does not match {dest.server_id} ({dest.dtype})")
        np.copyto(dest.data, result)
        dest.version += 1
        return dest.server_id

    def _place(self, result: np.ndarray, dest, timing: _Timing) -> str:
        if dest is None:
            self._check_budget(result.size)
            return self._register(result, timing)
        return self._store(self.get(dest), result)

    def _operand(self, ref: dict):
        if "array" in ref:
            arr = self.get(ref["array"])
            return arr.data, arr.dtype, arr.size
        dtype = ref["dtype"]
        value = decode_number(ref["scalar"])
        return kernels.NP_DTYPES[dtype](value), dtype, None

    # -- commands ---------------------------------------------------------

    def exec_create(self, fill: dict, dtype: str, size: int, dest=None, timing=None) -> str:
        timing = timing or _Timing()
        if not isinstance(size, int) or isinstance(size, bool):
            raise SchemaCommandError(f"size must be an integer, got {size!r}")
        if dest is None:
            self._check_budget(size)
        spec = dict(fill)
        if spec["kind"] == "values":
            spec["data"] = decode_values(spec["data"], dtype)
        elif spec["kind"] == "const":
            spec["value"] = decode_number(spec["value"])
        t0 = time.perf_counter_ns()
        try:
            data = kernels.fill(spec["kind"], dtype, size, spec)
        except (ValueError, TypeError, OverflowError) as e:
            raise SchemaCommandError(str(e)) from None
        timing.compute_ns += time.perf_counter_ns() - t0
        return self._place(data, dest, timing)

    def exec_binop(self, op: str, left: dict, right: dict, dest=None, timing=None) -> str:
        timing = timing or _Timing()
        l, ldt, lsize = self._operand(left)
        r, rdt, rsize = self._operand(right)
        if lsize is None and rsize is None:
            raise SchemaCommandError("binop needs at least one array operand")
        if lsize is not None and rsize is not None and lsize != rsize:
            raise SizeMismatchError(f"operand sizes differ: {lsize} vs {rsize}")
        try:
            binop_result_dtype(op, ldt, rdt)
        except DTypeError as e:
            raise DTypeMismatchError(str(e)) from None
        t0 = time.perf_counter_ns()
        try:
            result = kernels.binop(op, l, r, ldt, rdt)
        except kernels.KernelArithmeticError as e:
            raise ArithmeticCommandError(str(e)) from None
        timing.compute_ns += time.perf_counter_ns() - t0
        return self._place(np.asarray(result), dest, timing)

    def exec_unary(self, op: str, a: str, dest=None, timing=None) -> str:
        timing = timing or _Timing()
        arr = self.get(a)
        try:
            unary_result_dtype(op, arr.dtype)
        except DTypeError as e:
            raise DTypeMismatchError(str(e)) from None
        t0 = time.perf_counter_ns()
        result = kernels.unary(op, arr.data)
        timing.compute_ns += time.perf_counter_ns() - t0
        return self._place(result, dest, timing)

    def exec_reduce(self, op: str, a: str, timing=None):
        timing = timing or _Timing()
        arr = self.get(a)
        t0 = time.perf_counter_ns()
        try:
            value = kernels.reduce(op, arr.data)
        except ValueError as e:
            raise BoundsError(str(e)) from None
        timing.compute_ns += time.perf_counter_ns() - t0
        return value

    def _bounds(self, arr: ServerArray, start, stop):
        start = 0 if start is None else start
        stop = arr.size if stop is None else stop
        if not (isinstance(start, int) and isinstance(stop, int)) or not 0 <= start <= stop <= arr.size:
            raise BoundsError(f"range [{start}, {stop}) invalid for size {arr.size}")
        return start, stop

    def exec_slice(self, a: str, start: int, stop: int, dest=None, timing=None) -> str:
        timing = timing or _Timing()
        arr = self.get(a)
        start, stop = self._bounds(arr, start, stop)
        if dest is not None and dest == a:
            raise BoundsError("slice destination may not alias its source")
        t0 = time.perf_counter_ns()
        result = arr.data[start:stop].copy()
        timing.compute_ns += time.perf_counter_ns() - t0
        return self._place(result, dest, timing)

    def exec_intersect_size(self, a: str, b: str, timing=None) -> int:
        timing = timing or _Timing()
        x, y = self.get(a), self.get(b)
        if x.dtype != "int64" or y.dtype != "int64":
            raise DTypeMismatchError("intersect_size requires int64 operands")
        t0 = time.perf_counter_ns()
        value = kernels.intersect_size(x.data, y.data)
        timing.compute_ns += time.perf_counter_ns() - t0
        return value

    def exec_fetch(self, a: str, start=None, stop=None) -> dict:
        arr = self.get(a)
        start, stop = self._bounds(arr, start, stop)
        return {"dtype": arr.dtype, "values": encode_values(arr.data[start:stop].tolist())}

    def exec_delete(self, a: str, timing=None) -> None:
        timing = timing or _Timing()
        t0 = time.perf_counter_ns()
        arr = self.arrays.pop(self.get(a).server_id)
        self.live_elements -= arr.size
        self.deleted_count += 1
        self.metrics.arrays_deleted += 1
        timing.delete_ns += time.perf_counter_ns() - t0

    def exec_stats(self) -> dict:
        m = self.metrics
        return {
            "messages_handled": m.messages_handled,
            "arrays_created": m.arrays_created,
            "arrays_deleted": m.arrays_deleted,
            "live_arrays": len(self.arrays),
            "parse_ns": m.parse_ns,
            "create_ns": m.create_ns,
            "delete_ns": m.delete_ns,
            "compute_ns": m.compute_ns,
        }

    def exec_reset_stats(self) -> None:
        self.metrics = ServerMetrics()

    # -- dispatch ---------------------------------------------------------

    def new_session(self, client_name: str = "") -> Session:
        return Session(f"session-{next(self._sessions)}", client_name)

    def _dispatch(self, req: Request, session: Session, timing: _Timing) -> dict:
        a = req.args
        cmd = req.cmd
        if cmd == "connect":
            session.client_name = str(a["client_name"])
            return {"session_id": session.session_id}
        if cmd in ("create", "create_store"):
            if cmd == "create":
                sid = self.exec_create(a["fill"], a["dtype"], a["size"], timing=timing)
                return {"server_id": sid}
            dest = self.get(a["dest"])
            return {"server_id": self.exec_create(a["fill"], dest.dtype, dest.size,
                                                  dest=dest.server_id, timing=timing)}
        if cmd in ("binop", "binop_store"):
            sid = self.exec_binop(a["op"], a["left"], a["right"], dest=a.get("dest"), timing=timing)
            return self._array_payload(sid, cmd)
        if cmd in ("unary", "unary_store"):
            sid = self.exec_unary(a["op"], a["a"], dest=a.get("dest"), timing=timing)
            return self._array_payload(sid, cmd)
        if cmd in ("slice", "slice_store"):
            sid = self.exec_slice(a["a"], a["start"], a["stop"], dest=a.get("dest"), timing=timing)
            return self._array_payload(sid, cmd)
        if cmd == "reduce":
            return {"value": encode_number(self.exec_reduce(a["op"], a["a"], timing=timing))}
        if cmd == "intersect_size":
            return {"value": self.exec_intersect_size(a["a"], a["b"], timing=timing)}
        if cmd == "fetch":
            return self.exec_fetch(a["a"], a.get("start"), a.get("stop"))
        if cmd == "delete":
            self.exec_delete(a["a"], timing=timing)
            return {}
        if cmd == "stats":
            return self.exec_stats()
        if cmd == "reset_stats":
            self.exec_reset_stats()
            return {}
        if cmd == "shutdown":
            self.shutdown_requested.set()
            return {}
        raise SchemaCommandError(f"unhandled command {cmd!r}")  # pragma: no cover

    def _array_payload(self, sid: str, cmd: str) -> dict:
        if cmd.endswith("_store"):
            return {"server_id": sid}
        arr = self.arrays[sid]
        return {"server_id": sid, "size": arr.size, "dtype": arr.dtype}

    def handle(self, request: Request, session: Session, parse_ns: int = 0) -> Reply:
        """Execute one request and build its reply."""
        timing = _Timing(parse_ns=parse_ns)
        with self._lock:
            self.metrics.messages_handled += 1
            try:
                t0 = time.perf_counter_ns()
                validate_request(request.cmd, request.args)
                timing.parse_ns += time.perf_counter_ns() - t0
                if request.tag <= session.last_tag:
                    raise SchemaCommandError(
                        f"tag {request.tag} does not increase past {session.last_tag}")
                session.last_tag = request.tag
                payload = self._dispatch(request, session, timing)
                reply = Reply(request.tag, "ok", payload=payload)
            except CommandError as e:
                reply = Reply(request.tag, "error", error=str(e))
            except ProtocolError as e:
                reply = Reply(request.tag, "error", error=f"schema: {e}")
            m = self.metrics
            m.parse_ns += timing.parse_ns
            m.create_ns += timing.create_ns
            m.delete_ns += timing.delete_ns
            m.compute_ns += timing.compute_ns
            reply.timing = timing.as_dict()
            return reply

    def handle_frame(self, frame: bytes, session: Session) -> bytes:
        """Bytes in, bytes out: the whole server-side round trip for one frame."""
        t0 = time.perf_counter_ns()
        obj = None
        try:
            obj = decode_frame(frame)
            request = Request.from_wire(obj)
        except ProtocolError as e:
            tag = obj.get("tag") if isinstance(obj, dict) else None
            tag = tag if isinstance(tag, int) and not isinstance(tag, bool) and tag >= 0 else 0
            with self._lock:
                self.metrics.messages_handled += 1
            return encode_frame(Reply(tag, "error", error=f"schema: {e}"))
        return encode_frame(self.handle(request, session, parse_ns=time.perf_counter_ns() - t0))


# -- TCP front end ---------------------------------------------------------

class _SessionHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ArrayServer = self.server.array_server
        session = server.new_session()
        log.info("session %s opened from %s", session.session_id, self.client_address)
        while True:
            try:
                frame = read_frame(self.request)
            except (ConnectionError, FrameError) as e:
                log.warning("session %s dropped: %s", session.session_id, e)
                return
            if frame is None:
                log.info("session %s closed", session.session_id)
                return
            self.request.sendall(server.handle_frame(frame, session))
            if server.shutdown_requested.is_set():
                threading.Thread(target=self.server.shutdown, daemon=True).start()
                return


class ArrayTCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, array_server: ArrayServer | None = None):
        self.array_server = array_server or ArrayServer()
        super().__init__(address, _SessionHandler)


def serve(host: str = "127.0.0.1", port: int = DEFAULT_PORT,
          element_budget: int = DEFAULT_ELEMENT_BUDGET) -> None:
    """Run a server in the foreground until a client sends ``shutdown``."""
    with ArrayTCPServer((host, port), ArrayServer(element_budget)) as tcp:
        log.info("listening on %s:%d", *tcp.server_address[:2])
        try:
            tcp.serve_forever(poll_interval=0.1)
        except KeyboardInterrupt:
            log.info("interrupted, shutting down")
