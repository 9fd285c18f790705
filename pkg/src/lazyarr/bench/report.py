"""Cost-breakdown tables over saved benchmark reports."""
from __future__ import annotations

import json
from collections import OrderedDict

from .runner import TIMING_KEYS, BenchReport

CATEGORY_LABELS = OrderedDict([
    ("client_overhead_ns", "client overhead"),
    ("marshal_ns", "marshalling"),
    ("server_create_ns", "server create"),
    ("server_delete_ns", "server delete"),
    ("server_compute_ns", "server compute"),
    ("server_overhead_ns", "server overhead"),
    ("transport_ns", "transport"),
])


class ReportFormatError(ValueError):
    pass


def load_reports(paths) -> list[BenchReport]:
    reports = []
    for path in paths:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    missing = {"benchmark", "input", "mode", "messages_sent",
                               "arrays_created", "timings"} - d.keys()
                    if missing:
                        raise ReportFormatError(f"missing {', '.join(sorted(missing))}")
                    reports.append(BenchReport.from_dict(d))
                except (json.JSONDecodeError, TypeError, AttributeError, ReportFormatError) as e:
                    raise ReportFormatError(f"{path}:{lineno}: not a benchmark report ({e})") from None
    if not reports:
        raise ReportFormatError("no reports found")
    return reports


def _ratio(base: float, opt: float) -> str:
    return f"{base / opt:.2f}" if opt else "inf"


def format_table(reports: list[BenchReport]) -> str:
    """One column per report, one row per cost category; base/opt ratios
    are appended for each benchmark/input that has both modes."""
    headers = [f"{r.benchmark} {r.input} [{r.mode}]" for r in reports]
    rows = [("", headers)]
    for key in TIMING_KEYS:
        rows.append((CATEGORY_LABELS[key] + " (ms)",
                     [f"{r.timings.get(key, 0) / 1e6:.3f}" for r in reports]))
    rows.append(("messages sent", [str(r.messages_sent) for r in reports]))
    rows.append(("arrays created", [str(r.arrays_created) for r in reports]))
    rows.append(("arrays deleted", [str(r.arrays_deleted) for r in reports]))

    width0 = max(len(label) for label, _ in rows)
    widths = [max(len(cells[i]) for _, cells in rows) for i in range(len(reports))]
    lines = []
    for label, cells in rows:
        lines.append("  ".join([label.ljust(width0)] + [c.rjust(w) for c, w in zip(cells, widths)]))

    pairs = []
    groups: OrderedDict[tuple, dict] = OrderedDict()
    for r in reports:
        groups.setdefault((r.benchmark, r.input), {})[r.mode] = r
    for (bench, inp), modes in groups.items():
        if "base" in modes and "opt" in modes:
            b, o = modes["base"], modes["opt"]
            pairs.append(f"{bench} {inp}: messages base/opt = "
                         f"{_ratio(b.messages_sent, o.messages_sent)}, arrays created base/opt = "
                         f"{_ratio(b.arrays_created, o.arrays_created)}")
    if pairs:
        lines.append("")
        lines.append("ratios")
        lines.extend("  " + p for p in pairs)
    return "\n".join(lines)


def paired_ratio(reports: list[BenchReport], field: str = "arrays_created") -> dict:
    out = {}
    groups: dict[tuple, dict] = {}
    for r in reports:
        groups.setdefault((r.benchmark, r.input), {})[r.mode] = r
    for key, modes in groups.items():
        if "base" in modes and "opt" in modes:
            o = getattr(modes["opt"], field)
            out[key] = getattr(modes["base"], field) / o if o else float("inf")
    return out
