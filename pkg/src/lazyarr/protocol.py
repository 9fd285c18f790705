"""Wire format shared by the array server and the client.

A frame is a 4-byte big-endian length followed by a UTF-8 JSON object of
exactly that many bytes. Requests carry ``{tag, cmd, args}``; replies carry
``{tag, status, payload | error, timing}``.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Any, Mapping

MAX_FRAME_BYTES = 2 ** 26
HEADER = struct.Struct(">I")

DTYPES = ("int64", "float64", "bool")

ARITH_OPS = ("add", "sub", "mul", "truediv", "floordiv", "mod", "safediv")
COMPARE_OPS = ("eq", "ne", "lt", "le", "gt", "ge")
BINOPS = ARITH_OPS + COMPARE_OPS
COMMUTATIVE_OPS = frozenset({"add", "mul", "eq", "ne"})
UNARY_OPS = ("neg", "abs", "lognot")
REDUCE_OPS = ("sum", "prod", "min", "max", "any", "all")
FILL_KINDS = ("randint", "const", "arange", "values")

TIMING_FIELDS = ("parse_ns", "create_ns", "delete_ns", "compute_ns")

_NONFINITE = {"NaN": math.nan, "Inf": math.inf, "-Inf": -math.inf}


class ProtocolError(Exception):
    """Base class for wire-level failures."""


class FrameError(ProtocolError, ValueError):
    pass


class SchemaError(ProtocolError, LookupError):
    pass


class DTypeError(TypeError):
    """An operation was applied to operands of an unsupported dtype."""


@dataclass(frozen=True)
class CommandSpec:
    name: str
    args: tuple[str, ...]
    payload: tuple[str, ...]
    optional: tuple[str, ...] = ()
    creates: bool = False
    store: bool = False


def _spec(name, args, payload, optional=(), creates=False, store=False):
    return CommandSpec(name, tuple(args), tuple(payload), tuple(optional), creates, store)


_SCHEMA = {
    s.name: s
    for s in (
        _spec("connect", ["client_name"], ["session_id"]),
        _spec("create", ["dtype", "size", "fill"], ["server_id"], creates=True),
        _spec("create_store", ["dest", "fill"], ["server_id"], store=True),
        _spec("binop", ["op", "left", "right"], ["server_id", "size", "dtype"], creates=True),
        _spec("binop_store", ["op", "left", "right", "dest"], ["server_id"], store=True),
        _spec("unary", ["op", "a"], ["server_id", "size", "dtype"], creates=True),
        _spec("unary_store", ["op", "a", "dest"], ["server_id"], store=True),
        _spec("reduce", ["op", "a"], ["value"]),
        _spec("slice", ["a", "start", "stop"], ["server_id", "size", "dtype"], creates=True),
        _spec("slice_store", ["a", "start", "stop", "dest"], ["server_id"], store=True),
        _spec("intersect_size", ["a", "b"], ["value"]),
        _spec("fetch", ["a"], ["dtype", "values"], optional=["start", "stop"]),
        _spec("delete", ["a"], []),
        _spec("stats", [], ["messages_handled", "arrays_created", "arrays_deleted",
                            "live_arrays", *TIMING_FIELDS]),
        _spec("reset_stats", [], []),
        _spec("shutdown", [], []),
    )
}

# commands that are bookkeeping rather than array traffic
CONTROL_COMMANDS = frozenset({"connect", "stats", "reset_stats", "shutdown"})


def command_schema() -> dict[str, CommandSpec]:
    """Return the closed command vocabulary, keyed by command name."""
    return dict(_SCHEMA)


def lookup_command(cmd: str) -> CommandSpec:
    try:
        return _SCHEMA[cmd]
    except KeyError:
        raise SchemaError(f"unknown command {cmd!r}") from None


def operand_values(cmd: str, name: str) -> tuple[str, ...]:
    """Enumerated values accepted by an ``op`` argument, empty if free-form."""
    if name != "op":
        return ()
    return {
        "binop": BINOPS, "binop_store": BINOPS,
        "unary": UNARY_OPS, "unary_store": UNARY_OPS,
        "reduce": REDUCE_OPS,
    }.get(cmd, ())


def validate_request(cmd: str, args: Mapping[str, Any]) -> CommandSpec:
    spec = lookup_command(cmd)
    if not isinstance(args, Mapping):
        raise SchemaError(f"{cmd}: args must be an object")
    missing = [a for a in spec.args if a not in args]
    if missing:
        raise SchemaError(f"{cmd}: missing argument(s) {', '.join(missing)}")
    extra = set(args) - set(spec.args) - set(spec.optional)
    if extra:
        raise SchemaError(f"{cmd}: unexpected argument(s) {', '.join(sorted(extra))}")
    if "op" in spec.args and args["op"] not in operand_values(cmd, "op"):
        raise SchemaError(f"{cmd}: unsupported op {args['op']!r}")
    if "dtype" in spec.args and args["dtype"] not in DTYPES:
        raise SchemaError(f"{cmd}: unknown dtype {args['dtype']!r}")
    if "fill" in spec.args:
        validate_fill(args["fill"])
    for key in ("left", "right"):
        if key in spec.args:
            validate_operand(args[key])
    return spec


def validate_fill(fill: Any) -> None:
    if not isinstance(fill, Mapping) or fill.get("kind") not in FILL_KINDS:
        raise SchemaError(f"bad fill spec {fill!r}")
    required = {
        "randint": ("lo", "hi", "seed"),
        "const": ("value",),
        "arange": (),
        "values": ("data",),
    }[fill["kind"]]
    missing = [k for k in required if k not in fill]
    if missing:
        raise SchemaError(f"{fill['kind']} fill missing {', '.join(missing)}")


def validate_operand(ref: Any) -> None:
    if not isinstance(ref, Mapping):
        raise SchemaError(f"operand must be an object, got {ref!r}")
    has_array = "array" in ref
    has_scalar = "scalar" in ref
    if has_array == has_scalar:
        raise SchemaError("operand must have exactly one of 'array' or 'scalar'")
    if has_scalar and ref.get("dtype") not in DTYPES:
        raise SchemaError(f"scalar operand needs a dtype, got {ref.get('dtype')!r}")


# -- dtype rules ---------------------------------------------------------------

def binop_result_dtype(op: str, left: str, right: str) -> str:
    if op in COMPARE_OPS:
        return "bool"
    if op in ("truediv", "safediv"):
        return "float64"
    if op in ("floordiv", "mod"):
        if left != "int64" or right != "int64":
            raise DTypeError(f"{op} requires int64 operands, got {left} and {right}")
        return "int64"
    if op in ("add", "sub", "mul"):
        return "float64" if "float64" in (left, right) else "int64"
    raise SchemaError(f"unknown binop {op!r}")


def unary_result_dtype(op: str, dtype: str) -> str:
    if op == "lognot":
        if dtype != "bool":
            raise DTypeError(f"lognot requires bool, got {dtype}")
        return "bool"
    if op in ("neg", "abs"):
        if dtype == "bool":
            raise DTypeError(f"{op} is not defined on bool")
        return dtype
    raise SchemaError(f"unknown unary op {op!r}")


def scalar_dtype(value: Any) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        if not -2 ** 63 <= value < 2 ** 63:
            raise OverflowError(f"scalar {value} does not fit in int64")
        return "int64"
    if isinstance(value, float):
        return "float64"
    raise TypeError(f"unsupported scalar {value!r}")


# -- numbers -------------------------------------------------------------------

def encode_number(x: Any) -> Any:
    """JSON-safe form of a scalar; non-finite floats become strings."""
    if isinstance(x, float) and not math.isfinite(x):
        if math.isnan(x):
            return "NaN"
        return "Inf" if x > 0 else "-Inf"
    return x


def decode_number(x: Any) -> Any:
    if isinstance(x, str):
        try:
            return _NONFINITE[x]
        except KeyError:
            raise FrameError(f"bad numeric literal {x!r}") from None
    return x


def encode_values(values: list) -> list:
    return [encode_number(v) for v in values]


def decode_values(values: list, dtype: str) -> list:
    if dtype == "float64":
        return [float(decode_number(v)) for v in values]
    return list(values)


# -- messages ------------------------------------------------------------------

@dataclass
class Request:
    tag: int
    cmd: str
    args: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {"tag": self.tag, "cmd": self.cmd, "args": self.args}

    @classmethod
    def from_wire(cls, obj: Mapping[str, Any]) -> "Request":
        try:
            tag, cmd, args = obj["tag"], obj["cmd"], obj["args"]
        except KeyError as e:
            raise SchemaError(f"request missing field {e.args[0]!r}") from None
        if not isinstance(tag, int) or isinstance(tag, bool) or not 0 <= tag < 2 ** 64:
            raise SchemaError(f"tag must be an unsigned 64-bit integer, got {tag!r}")
        if not isinstance(cmd, str) or not isinstance(args, dict):
            raise SchemaError("cmd must be a string and args an object")
        return cls(tag, cmd, args)


@dataclass
class Reply:
    tag: int
    status: str
    payload: dict | None = None
    error: str | None = None
    timing: dict = field(default_factory=lambda: dict.fromkeys(TIMING_FIELDS, 0))

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_wire(self) -> dict:
        out: dict[str, Any] = {"tag": self.tag, "status": self.status}
        if self.status == "ok":
            out["payload"] = self.payload if self.payload is not None else {}
        else:
            out["error"] = self.error or ""
        out["timing"] = self.timing
        return out

    @classmethod
    def from_wire(cls, obj: Mapping[str, Any]) -> "Reply":
        try:
            tag, status = obj["tag"], obj["status"]
        except KeyError as e:
            raise SchemaError(f"reply missing field {e.args[0]!r}") from None
        if status not in ("ok", "error"):
            raise SchemaError(f"bad reply status {status!r}")
        if status == "error" and "payload" in obj:
            raise SchemaError("error reply must not carry a payload")
        return cls(tag, status, obj.get("payload"), obj.get("error"),
                   dict(obj.get("timing") or {}))


def encode_frame(message: Request | Reply | Mapping[str, Any]) -> bytes:
    """Serialize a message into a length-prefixed frame."""
    obj = message.to_wire() if isinstance(message, (Request, Reply)) else message
    try:
        body = json.dumps(obj, separators=(",", ":"), allow_nan=False).encode("utf-8")
    except ValueError as e:
        raise FrameError(f"message is not encodable: {e}") from None
    if len(body) > MAX_FRAME_BYTES:
        raise FrameError(f"frame body of {len(body)} bytes exceeds {MAX_FRAME_BYTES}")
    return HEADER.pack(len(body)) + body


def frame_length(header: bytes) -> int:
    if len(header) != HEADER.size:
        raise FrameError("truncated frame header")
    (length,) = HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise FrameError(f"frame length {length} exceeds {MAX_FRAME_BYTES}")
    return length


def decode_body(body: bytes) -> dict:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FrameError(f"frame body is not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise FrameError("frame body must be a JSON object")
    return obj


def decode_frame(data: bytes) -> dict:
    """Inverse of :func:`encode_frame`; returns the JSON object."""
    length = frame_length(data[:HEADER.size])
    body = data[HEADER.size:]
    if len(body) != length:
        raise FrameError(f"frame declares {length} bytes but carries {len(body)}")
    return decode_body(body)


def decode_request(data: bytes) -> Request:
    return Request.from_wire(decode_frame(data))


def decode_reply(data: bytes) -> Reply:
    return Reply.from_wire(decode_frame(data))


def recv_exact(sock, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_frame(sock) -> bytes | None:
    """Read one whole frame (header included); None on clean EOF."""
    first = sock.recv(HEADER.size)
    if not first:
        return None
    header = first if len(first) == HEADER.size else first + recv_exact(sock, HEADER.size - len(first))
    body = recv_exact(sock, frame_length(header))
    return header + body
