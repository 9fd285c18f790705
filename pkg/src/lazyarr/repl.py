"""A small interactive language over client arrays.

Statements::

    A = randint(0, 10, 10)        # also randint(lo, hi, n, seed), arange(n), zeros(n), ones(n)
    B = (A * A) + (A * A)         # + - * / // % and unary -
    print(B)                      # or print(<expr>)
    sum(B)                        # sum prod min max any all mean std
    del A
    stats
    flush
    quit

Assignments only record work; nothing reaches the server until a value is
printed, reduced or flushed. Intermediate results of an expression are
released as soon as the expression has been built. Reassigning or deleting
a name releases the array it held.
"""
from __future__ import annotations

import ast
import sys
from typing import TextIO

from .client import ArrayHandle, Client, ServerError

PRINT_LIMIT = 30
REDUCTIONS = ("sum", "prod", "min", "max", "any", "all", "mean", "std")
CONSTRUCTORS = ("randint", "arange", "zeros", "ones")
_BINOPS = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "truediv",
           ast.FloorDiv: "floordiv", ast.Mod: "mod"}


class ReplError(Exception):
    pass


class Repl:
    def __init__(self, client: Client, out: TextIO | None = None):
        self.client = client
        self.out = out or sys.stdout
        self.names: dict[str, ArrayHandle] = {}
        self.done = False

    def write(self, text: str):
        self.out.write(text + "\n")

    # -- evaluation ---------------------------------------------------------

    def _eval(self, node, temps: list):
        """Evaluate an expression node; new arrays are appended to ``temps``."""
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in self.names:
                raise ReplError(f"name {node.id!r} is not defined")
            return self.names[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            val = self._eval(node.operand, temps)
            if isinstance(node.op, ast.UAdd):
                return val
            if isinstance(val, ArrayHandle):
                return self._keep(-val, temps)
            return -val
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            left = self._eval(node.left, temps)
            right = self._eval(node.right, temps)
            if not isinstance(left, ArrayHandle) and not isinstance(right, ArrayHandle):
                raise ReplError("arithmetic needs at least one array operand")
            return self._keep(self.client.binop(_BINOPS[type(node.op)], left, right), temps)
        if isinstance(node, ast.Call):
            return self._call(node, temps)
        raise ReplError(f"unsupported expression: {ast.unparse(node)}")

    @staticmethod
    def _keep(handle, temps):
        temps.append(handle)
        return handle

    def _func_name(self, node: ast.Call) -> str:
        f = node.func
        if isinstance(f, ast.Attribute) and isinstance(f.value, ast.Name):
            return f.attr          # allow a module prefix such as ``ak.randint``
        if isinstance(f, ast.Name):
            return f.id
        raise ReplError(f"unsupported call: {ast.unparse(node)}")

    def _call(self, node: ast.Call, temps):
        name = self._func_name(node)
        if node.keywords:
            raise ReplError("keyword arguments are not supported")
        if name in CONSTRUCTORS:
            args = [self._eval(a, temps) for a in node.args]
            if any(isinstance(a, ArrayHandle) for a in args):
                raise ReplError(f"{name} takes numbers only")
            c = self.client
            if name == "randint" and len(args) in (3, 4):
                return self._keep(c.randint(int(args[0]), int(args[1]), int(args[2]),
                                            seed=int(args[3]) if len(args) == 4 else None), temps)
            if name == "arange" and len(args) == 1:
                return self._keep(c.arange(int(args[0])), temps)
            if name in ("zeros", "ones") and len(args) == 1:
                return self._keep(getattr(c, name)(int(args[0])), temps)
            raise ReplError(f"wrong number of arguments to {name}")
        if name in REDUCTIONS:
            if len(node.args) != 1:
                raise ReplError(f"{name} takes one argument")
            arr = self._eval(node.args[0], temps)
            if not isinstance(arr, ArrayHandle):
                raise ReplError(f"{name} needs an array")
            if name in ("mean", "std"):
                return getattr(self.client, name)(arr)
            return self.client.reduce(name, arr)
        raise ReplError(f"unknown function {name!r}")

    def _evaluate(self, node):
        """Evaluate ``node``; returns (value, temps-to-release)."""
        temps: list[ArrayHandle] = []
        try:
            value = self._eval(node, temps)
        except Exception:
            for t in temps:
                t.release()
            raise
        return value, temps

    # -- statements ---------------------------------------------------------

    def format_array(self, h: ArrayHandle) -> str:
        c = self.client
        if h.size <= PRINT_LIMIT:
            vals = c.fetch(h)
            return "[" + " ".join(map(_fmt, vals)) + "]"
        half = PRINT_LIMIT // 2
        head = c.fetch(h, 0, half)
        tail = c.fetch(h, h.size - half, h.size)
        return "[" + " ".join(map(_fmt, head)) + " ... " + " ".join(map(_fmt, tail)) + "]"

    def _assign(self, name: str, node):
        if isinstance(node, ast.Name):
            if node.id not in self.names:
                raise ReplError(f"name {node.id!r} is not defined")
            value = self.names[node.id].copy_ref()
        else:
            value, temps = self._evaluate(node)
            if isinstance(value, ArrayHandle):
                if value in temps:
                    temps.remove(value)
                else:
                    value = value.copy_ref()
            for t in temps:
                t.release()
            if not isinstance(value, ArrayHandle):
                raise ReplError("only arrays can be assigned")
        old = self.names.get(name)
        self.names[name] = value
        if old is not None:
            old.release()

    def _show(self, node):
        value, temps = self._evaluate(node)
        try:
            if isinstance(value, ArrayHandle):
                self.write(self.format_array(value))
            else:
                self.write(_fmt(value))
        finally:
            for t in temps:
                t.release()

    def _stats(self):
        m = self.client.client_metrics()
        s = m.server
        self.write(f"messages sent: {m.messages_sent}")
        self.write(f"server arrays created: {s.get('arrays_created', 0)}  "
                   f"deleted: {s.get('arrays_deleted', 0)}  live: {s.get('live_arrays', 0)}")
        self.write(f"expression cache hits: {m.cache_hits_expr}  reduction cache hits: "
                   f"{m.cache_hits_reduce}  free-list hits: {m.freelist_hits}")
        self.write(f"pending commands: {self.client.buffer_size}")

    def execute(self, line: str) -> None:
        """Run one statement, reporting errors without raising."""
        text = line.strip()
        if not text or text.startswith("#"):
            return
        if text in ("quit", "exit", "quit()", "exit()"):
            self.done = True
            return
        if text in ("stats", "stats()"):
            return self._guard(self._stats)
        if text in ("flush", "flush()"):
            return self._guard(self.client.flush)
        try:
            tree = ast.parse(text, mode="exec")
        except SyntaxError as e:
            self.write(f"syntax error: {e.msg}")
            return
        for stmt in tree.body:
            self._guard(self._statement, stmt)

    def _statement(self, stmt):
        if isinstance(stmt, (ast.Import, ast.ImportFrom)):
            return
        if isinstance(stmt, ast.Assign):
            if len(stmt.targets) != 1 or not isinstance(stmt.targets[0], ast.Name):
                raise ReplError("assign to a single name")
            return self._assign(stmt.targets[0].id, stmt.value)
        if isinstance(stmt, ast.Delete):
            for t in stmt.targets:
                if not isinstance(t, ast.Name) or t.id not in self.names:
                    raise ReplError(f"name {ast.unparse(t)!r} is not defined")
                self.names.pop(t.id).release()
            return
        if isinstance(stmt, ast.Expr):
            node = stmt.value
            if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id == "print":
                if len(node.args) != 1 or node.keywords:
                    raise ReplError("print takes one argument")
                return self._show(node.args[0])
            return self._show(node)
        raise ReplError(f"unsupported statement: {ast.unparse(stmt)}")

    def _guard(self, fn, *args):
        try:
            fn(*args)
        except ReplError as e:
            self.write(f"error: {e}")
        except ServerError as e:
            self.write(f"server error: {e}")
        except (ValueError, TypeError, IndexError, OverflowError) as e:
            self.write(f"error: {e}")

    def run(self, stream: TextIO, prompt: str = "") -> None:
        while not self.done:
            if prompt:
                self.out.write(prompt)
                self.out.flush()
            line = stream.readline()
            if not line:
                break
            self.execute(line)

    def close(self):
        for h in self.names.values():
            h.release()
        self.names.clear()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if isinstance(v, float):
        return repr(v)
    return str(v)
