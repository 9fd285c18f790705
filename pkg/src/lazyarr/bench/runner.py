"""Run one benchmark under one client configuration and report the counts."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

from ..client import Client, ClientConfig
from ..transport import LocalTransport, SocketTransport
from .algorithms import DenseMatrix, SparseGraph, bc_single_source, taxi_chain, tc_dense, tc_sparse
from .graphs import parse_array_spec, parse_graph_spec
from .oracles import MAX_ORACLE_NODES, oracle_bc, oracle_triangles

BENCHMARKS = ("tc-dense", "tc-sparse", "bc", "taxi")

DENSE_LIMIT = 512
SPARSE_LIMIT = 4096

TIMING_KEYS = (
    "client_overhead_ns", "marshal_ns", "server_create_ns", "server_delete_ns",
    "server_compute_ns", "server_overhead_ns", "transport_ns",
)


@dataclass
class BenchReport:
    benchmark: str
    input: str
    mode: str
    flags: dict
    result: object
    messages_sent: int
    arrays_created: int
    arrays_deleted: int
    timings: dict
    oracle: object = None
    oracle_match: bool | None = None
    seed: int = 0
    counters: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        return cls(**d)


def results_equal(a, b, rel: float = 1e-12) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(results_equal(a[k], b[k], rel) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(results_equal(x, y, rel) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if math.isnan(a) and math.isnan(b):
            return True
        return math.isclose(a, b, rel_tol=rel, abs_tol=0.0) or a == b
    return a == b


def _bc_matches(result: dict, oracle: dict, atol: float = 1e-9) -> bool:
    if [int(x) for x in result["path_counts"]] != oracle["path_counts"]:
        return False
    if any(x != int(x) for x in result["path_counts"]):
        return False
    return all(abs(x - y) <= atol for x, y in zip(result["delta"], oracle["delta"]))


def run_benchmark(benchmark: str, input_spec: str, config: ClientConfig | None = None,
                  seed: int = 0, source: int = 0, transport=None,
                  with_oracle: bool = True) -> BenchReport:
    """Execute ``benchmark`` on ``input_spec`` in a fresh client session.

    Counts include uploading the input. ``transport`` defaults to a private
    in-process server.
    """
    if benchmark not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {benchmark!r}; choose from {', '.join(BENCHMARKS)}")
    config = config or ClientConfig()
    client = Client(transport or LocalTransport(), config=config, name=f"bench-{benchmark}", seed=seed)
    t0 = time.perf_counter()
    oracle = None
    match = None
    try:
        if benchmark == "taxi":
            kwargs = parse_array_spec(input_spec)
            a = client.randint(kwargs["lo"], kwargs["hi"], kwargs["size"], seed=kwargs["seed"])
            result = list(taxi_chain(client, a))
            a.release()
        else:
            graph = parse_graph_spec(input_spec)
            if benchmark == "tc-dense":
                if graph.n > DENSE_LIMIT:
                    raise ValueError(f"dense triangle count limited to {DENSE_LIMIT} nodes")
                L = DenseMatrix.from_numpy(client, graph.lower())
                result = tc_dense(client, L)
                L.release()
            elif benchmark == "tc-sparse":
                if graph.n > SPARSE_LIMIT:
                    raise ValueError(f"sparse triangle count limited to {SPARSE_LIMIT} nodes")
                G = SparseGraph.from_graph(client, graph)
                result = tc_sparse(client, G)
                G.release()
            else:
                if graph.n > SPARSE_LIMIT:
                    raise ValueError(f"betweenness limited to {SPARSE_LIMIT} nodes")
                A = DenseMatrix.from_numpy(client, graph.adjacency(), "float64")
                bc = bc_single_source(client, A, source)
                A.release()
                result = {"delta": bc.delta, "path_counts": bc.path_counts, "depth": bc.depth}
            if with_oracle and graph.n <= MAX_ORACLE_NODES:
                if benchmark == "bc":
                    sig, delta = oracle_bc(graph.n, graph.edges, source)
                    oracle = {"path_counts": sig, "delta": delta}
                    match = _bc_matches(result, oracle)
                else:
                    oracle = oracle_triangles(graph.n, graph.edges)
                    match = result == oracle
        elapsed = time.perf_counter() - t0
        metrics = client.client_metrics()
    finally:
        client.close()

    srv = metrics.server
    timings = {
        "client_overhead_ns": metrics.overhead_ns,
        "marshal_ns": metrics.marshal_ns,
        "server_create_ns": srv.get("create_ns", 0),
        "server_delete_ns": srv.get("delete_ns", 0),
        "server_compute_ns": srv.get("compute_ns", 0),
        "server_overhead_ns": srv.get("parse_ns", 0),
        "transport_ns": metrics.transport_ns,
    }
    counters = metrics.to_dict()
    counters.pop("server")
    return BenchReport(
        benchmark=benchmark, input=input_spec, mode=config.label(), flags=config.flags(),
        result=result, messages_sent=metrics.messages_sent, arrays_created=metrics.arrays_created,
        arrays_deleted=metrics.deletes_sent, timings=timings, oracle=oracle, oracle_match=match,
        seed=seed, counters=counters, elapsed_s=round(elapsed, 6),
    )


def remote_transport_factory(host: str, port: int):
    return lambda: SocketTransport(host, port)
