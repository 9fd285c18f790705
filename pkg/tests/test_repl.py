import io

from lazyarr import ClientConfig
from lazyarr.repl import Repl
from programs import fresh_client

DOUBLED_SQUARE = """\
import lazyarr as ak
A = ak.randint(0, 10, 10)
B = (A * A) + (A * A)
C = ak.randint(0, 10, 10)
print(B)
"""


def session(script, config=None, seed=0):
    c = fresh_client(config or ClientConfig.optimized(), seed=seed)
    out = io.StringIO()
    repl = Repl(c, out)
    repl.run(io.StringIO(script))
    return out.getvalue(), c, repl


def test_doubled_square_session_counts():
    text, c, _ = session(DOUBLED_SQUARE)
    assert c.messages_sent == 4 and c.arrays_created == 2
    text_b, cb, _ = session(DOUBLED_SQUARE, ClientConfig.baseline())
    assert cb.messages_sent == 8 and cb.arrays_created == 5
    assert text == text_b and text.startswith("[") and len(text.split()) == 10


def test_undefined_name_reports_and_continues():
    text, _, repl = session("print(Q)\nA = arange(3)\nprint(A)\n")
    assert text.splitlines() == ["error: name 'Q' is not defined", "[0 1 2]"]
    assert "A" in repl.names


def test_alias_survives_delete():
    text, _, _ = session("A = arange(4)\nB = A\ndel A\nprint(B)\nprint(A)\n")
    assert text.splitlines() == ["[0 1 2 3]", "error: name 'A' is not defined"]


def test_reductions_and_scalars():
    text, _, _ = session("A = arange(5)\nsum(A)\nmax(A * 2)\nmean(A)\nstd(ones(4))\nA - 1\n")
    assert text.splitlines() == ["10", "8", "2.0", "0.0", "[-1 0 1 2 3]"]


def test_server_error_reported():
    text, _, _ = session("A = arange(3)\nprint(A // 0)\nprint(A)\n")
    lines = text.splitlines()
    assert lines[0].startswith("server error:") and lines[1] == "[0 1 2]"


def test_bad_syntax_and_statements():
    text, _, _ = session("A = \nA.x = 1\nfoo(1)\n1 + 2\nquit\nprint(arange(2))\n")
    lines = text.splitlines()
    assert lines[0].startswith("syntax error") and len(lines) == 4


def test_long_arrays_abbreviated():
    text, _, _ = session("print(arange(100))\n")
    assert text.strip() == "[" + " ".join(map(str, range(15))) + " ... " + \
        " ".join(map(str, range(85, 100))) + "]"


def test_reassignment_releases_and_stats():
    text, c, _ = session("A = arange(3)\nprint(A)\nA = A + 1\nprint(A)\nstats\n")
    assert text.splitlines()[:2] == ["[0 1 2]", "[1 2 3]"]
    assert "messages sent: 4" in text and "live: 1" in text


def test_sessions_reproducible():
    script = DOUBLED_SQUARE + "X = randint(0, 100, 40)\nprint(X)\nmean(X)\nstats\n"
    assert session(script, seed=3)[0] == session(script, seed=3)[0]
