"""Elementwise kernels, fills and deterministic reductions used by the server."""
from __future__ import annotations

import numpy as np

from .protocol import DTypeError, binop_result_dtype, unary_result_dtype

REDUCE_CHUNK = 4096

NP_DTYPES = {"int64": np.int64, "float64": np.float64, "bool": np.bool_}


class KernelArithmeticError(ArithmeticError):
    pass


def dtype_name(arr: np.ndarray) -> str:
    if arr.dtype == np.bool_:
        return "bool"
    if arr.dtype == np.int64:
        return "int64"
    if arr.dtype == np.float64:
        return "float64"
    raise DTypeError(f"unsupported array dtype {arr.dtype}")


def fill(kind: str, dtype: str, size: int, spec: dict) -> np.ndarray:
    npt = NP_DTYPES[dtype]
    if kind == "const":
        return np.full(size, spec["value"], dtype=npt)
    if kind == "arange":
        return np.arange(size).astype(npt)
    if kind == "values":
        data = spec["data"]
        if len(data) != size:
            raise ValueError(f"values fill has {len(data)} elements, expected {size}")
        return np.asarray(data, dtype=npt)
    if kind == "randint":
        # Philox is counter based: same seed gives the same stream on every platform.
        rng = np.random.Generator(np.random.Philox(int(spec["seed"])))
        lo, hi = spec["lo"], spec["hi"]
        if dtype == "float64":
            return rng.uniform(lo, hi, size)
        if dtype == "bool":
            return rng.integers(0, 2, size).astype(np.bool_)
        if hi <= lo:
            raise ValueError(f"randint needs lo < hi, got [{lo}, {hi})")
        return rng.integers(lo, hi, size, dtype=np.int64)
    raise ValueError(f"unknown fill kind {kind!r}")


def _cast(x, dtype: str):
    if isinstance(x, np.ndarray):
        return x.astype(NP_DTYPES[dtype], copy=False)
    return NP_DTYPES[dtype](x)


def binop(op: str, left, right, ldtype: str, rdtype: str) -> np.ndarray:
    """Apply ``op`` to two operands, each an ndarray or a numpy scalar."""
    out_dtype = binop_result_dtype(op, ldtype, rdtype)
    with np.errstate(all="ignore"):
        if op in ("eq", "ne", "lt", "le", "gt", "ge"):
            work = "float64" if "float64" in (ldtype, rdtype) else "int64"
            l, r = _cast(left, work), _cast(right, work)
            return getattr(np, {"eq": "equal", "ne": "not_equal", "lt": "less",
                                "le": "less_equal", "gt": "greater",
                                "ge": "greater_equal"}[op])(l, r)
        l, r = _cast(left, out_dtype), _cast(right, out_dtype)
        if op == "add":
            return np.add(l, r)
        if op == "sub":
            return np.subtract(l, r)
        if op == "mul":
            return np.multiply(l, r)
        if op == "truediv":
            return np.true_divide(l, r)
        if op == "safediv":
            l, r = np.broadcast_arrays(np.asarray(l), np.asarray(r))
            out = np.zeros(l.shape, dtype=np.float64)
            np.divide(l, r, out=out, where=r != 0)
            return out
        if np.any(np.asarray(r) == 0):
            raise KernelArithmeticError(f"integer {op} by zero")
        if op == "floordiv":
            return np.floor_divide(l, r)
        return np.mod(l, r)


def unary(op: str, a: np.ndarray) -> np.ndarray:
    unary_result_dtype(op, dtype_name(a))
    with np.errstate(all="ignore"):
        if op == "neg":
            return np.negative(a)
        if op == "abs":
            return np.abs(a)
        return np.logical_not(a)


def _chunked(values: np.ndarray, ufunc, identity):
    # left-to-right inside each chunk, chunks combined left-to-right
    acc = identity
    for start in range(0, len(values), REDUCE_CHUNK):
        part = ufunc.accumulate(values[start:start + REDUCE_CHUNK])[-1]
        acc = ufunc(acc, part)
    return acc


def reduce(op: str, a: np.ndarray):
    """Reduce ``a`` to a Python scalar with a pinned combination order."""
    kind = dtype_name(a)
    with np.errstate(all="ignore"):
        if op in ("sum", "prod"):
            work = a.astype(np.int64) if kind == "bool" else a
            ufunc = np.add if op == "sum" else np.multiply
            identity = work.dtype.type(0 if op == "sum" else 1)
            return _chunked(work, ufunc, identity).item()
        if op in ("min", "max"):
            if a.size == 0:
                raise ValueError(f"{op} of an empty array")
            return (a.min() if op == "min" else a.max()).item()
        if op == "any":
            return bool(np.any(a))
        if op == "all":
            return bool(np.all(a))
    raise ValueError(f"unknown reduction {op!r}")


def intersect_size(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.intersect1d(a, b, assume_unique=False).size)
