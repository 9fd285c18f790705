import json
import socket
import subprocess
import sys
import time

import pytest

from lazyarr import Client
from lazyarr.cli import main


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def run_cli(*args, stdin=None, timeout=60):
    return subprocess.run([sys.executable, "-m", "lazyarr", *args], input=stdin,
                          capture_output=True, text=True, timeout=timeout)


@pytest.fixture
def server():
    port = free_port()
    proc = subprocess.Popen([sys.executable, "-m", "lazyarr", "--port", str(port), "serve",
                             "--log-level", "WARNING"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    deadline = time.time() + 10
    while True:
        try:
            socket.create_connection(("127.0.0.1", port), timeout=0.2).close()
            break
        except OSError:
            if time.time() > deadline or proc.poll() is not None:
                proc.kill()
                raise RuntimeError("server did not start")
            time.sleep(0.05)
    yield port, proc
    if proc.poll() is None:
        proc.kill()
        proc.wait()


def test_serve_connect_shutdown(server):
    port, proc = server
    with Client.connect("127.0.0.1", port) as c:
        a = c.arange(5)
        assert (a * 2).to_values() == [0, 2, 4, 6, 8]
        c.shutdown_server()
    assert proc.wait(timeout=10) == 0


def test_double_bind_fails(server):
    port, _ = server
    r = run_cli("serve", "--port", str(port), timeout=20)
    assert r.returncode == 3 and "cannot listen" in r.stderr


def test_report_fresh_server_is_zero(server):
    port, _ = server
    r = run_cli("report", "--port", str(port))
    assert r.returncode == 0
    counters = dict(line.split() for line in r.stdout.splitlines()[1:5])
    assert counters == {"messages_handled": "0", "arrays_created": "0", "arrays_deleted": "0",
                        "live_arrays": "0"}, r.stdout


def test_concurrent_sessions(server):
    port, _ = server
    clients = [Client.connect("127.0.0.1", port, name=f"c{i}") for i in range(3)]
    handles = [c.full(4, i) for i, c in enumerate(clients)]
    assert [h.to_values() for h in handles] == [[i] * 4 for i in range(3)]
    for c in clients:
        c.close()


def test_repl_against_server(server):
    port, _ = server
    script = "A = randint(0, 10, 10)\nB = (A * A) + (A * A)\nC = randint(0, 10, 10)\nprint(B)\nstats\n"
    r = run_cli("repl", "--port", str(port), stdin=script)
    assert r.returncode == 0
    assert "messages sent: 4" in r.stdout and "server arrays created: 2" in r.stdout
    r2 = run_cli("repl", "--embedded", stdin=script)
    assert r2.stdout == r.stdout


def test_bench_remote(server):
    port, _ = server
    r = run_cli("bench", "tc-dense", "--input", "kn:4", "--remote", "--port", str(port))
    assert r.returncode == 0 and json.loads(r.stdout)["result"] == 4


def bench(capsys, *args):
    code = main(["bench", *args])
    out = capsys.readouterr().out
    return code, out


def test_bench_examples(capsys):
    code, out = bench(capsys, "tc-dense", "--input", "kn:4", "--mode", "opt")
    report = json.loads(out)
    assert code == 0 and report["result"] == 4 and report["oracle_match"] is True
    code, out = bench(capsys, "bc", "--input", "path:3", "--source", "0")
    assert code == 0 and json.loads(out)["result"]["delta"] == [0.0, 1.0, 0.0]


def test_bench_taxi_pair(capsys, tmp_path):
    out_file = tmp_path / "taxi.jsonl"
    reports = []
    for mode in ("base", "opt"):
        code, out = bench(capsys, "taxi", "--input", "rand:1000:0:100:7", "--mode", mode,
                          "--output", str(out_file))
        assert code == 0
        reports.append(json.loads(out))
    assert reports[0]["result"] == reports[1]["result"]
    assert reports[1]["messages_sent"] < reports[0]["messages_sent"]
    assert main(["report", str(out_file)]) == 0
    table = capsys.readouterr().out
    assert "messages base/opt" in table


def test_bench_flag_overrides(capsys):
    code, out = bench(capsys, "tc-sparse", "--input", "gnp:20:0.3:1", "--mode", "opt", "--no-cse",
                      "--no-array-cache")
    flags = json.loads(out)["flags"]
    assert code == 0 and flags["cse"] is False and flags["array_cache"] is False and flags["lazy"]
    code, out = bench(capsys, "tc-sparse", "--input", "gnp:20:0.3:1", "--mode", "base", "--lazy")
    assert json.loads(out)["flags"] == {**dict.fromkeys(json.loads(out)["flags"], False), "lazy": True}


def test_check_pair_writes_both(capsys, tmp_path):
    out_file = tmp_path / "pair.jsonl"
    code, out = bench(capsys, "tc-sparse", "--input", "gnp:64:0.1:3", "--check-pair",
                      "--output", str(out_file))
    assert code == 0 and len(out.strip().splitlines()) == 1
    assert main(["report", str(out_file)]) == 0
    table = capsys.readouterr().out
    ratio = float(table.rsplit("arrays created base/opt = ", 1)[1].split()[0])
    assert ratio >= 2


def test_single_report_has_no_ratio(capsys, tmp_path):
    out_file = tmp_path / "one.jsonl"
    bench(capsys, "tc-dense", "--input", "kn:5", "--output", str(out_file))
    assert main(["report", str(out_file)]) == 0
    assert "ratios" not in capsys.readouterr().out


def test_exit_codes(capsys, tmp_path):
    assert main(["bench", "tc-dense", "--input", "nosuch:3"]) == 2
    assert main(["bench", "tc-dense", "--input", str(tmp_path / "missing.mtx")]) == 2
    bad = tmp_path / "bad.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate pattern general\n3 3 1\n0 1\n")
    assert main(["bench", "tc-sparse", "--input", str(bad)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["bench", "nosuch", "--input", "kn:3"])
    assert e.value.code == 2
    port = free_port()
    assert main(["bench", "taxi", "--input", "rand:10:0:5:1", "--remote", "--port", str(port)]) == 3
    assert main(["report", "--port", str(port)]) == 3
    assert main(["repl", "--port", str(port)]) == 3
    assert main(["report", str(bad)]) == 2


def test_verification_failure_exit_code(capsys, monkeypatch):
    import lazyarr.bench.runner as runner
    monkeypatch.setattr(runner, "oracle_triangles", lambda n, edges: -1)
    assert main(["bench", "tc-dense", "--input", "kn:4"]) == 1
