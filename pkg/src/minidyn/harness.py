"""Benchmark driver: sweeps execution modes and version limits over a corpus.

Each (benchmark, mode, limit) cell gets a fresh VM.  The program is loaded,
``main`` is called ``warmup`` times, then ``iters`` more times; the dynamic
counters (type tests, ops executed) cover the measured calls only, while
compilation counters (ops emitted, compiler invocations, stub hits, version
histogram) are cumulative since code is only ever generated once.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .bbv import INF, format_limit, parse_limit
from .values import JSRuntimeError, display
from .vm import DEFAULT_FUEL, MODES, TEST_KEYS, VM, Counters, FuelExhausted, build

log = logging.getLogger(__name__)

DEFAULT_LIMITS = (0, 1, 2, 5, INF)
LAZY_MODES = ("bbv-lazy",)


def corpus_dir() -> Path:
    """Directory holding the bundled benchmark programs."""
    return Path(str(resources.files("minidyn") / "benchmarks"))


def list_programs(paths) -> list:
    """Expand files and directories into a sorted list of ``.js`` programs."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("*.js")))
        else:
            out.append(p)
    return out


@dataclass
class ExperimentConfig:
    programs: list = field(default_factory=lambda: [corpus_dir()])
    modes: tuple = MODES
    limits: tuple = DEFAULT_LIMITS
    warmup: int = 1
    iters: int = 1
    entry: str = "main"
    fuel: int = DEFAULT_FUEL

    def __post_init__(self):
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")
        self.limits = tuple(parse_limit(x) if isinstance(x, str) else x for x in self.limits)
        if self.warmup < 1 and any(m in LAZY_MODES for m in self.modes):
            raise ValueError("lazy modes need at least one warmup iteration")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")

    def to_dict(self) -> dict:
        return {
            "programs": [Path(p).name for p in list_programs(self.programs)],
            "modes": list(self.modes),
            "limits": [format_limit(x) for x in self.limits],
            "warmup": self.warmup,
            "iters": self.iters,
            "entry": self.entry,
        }


@dataclass
class StatsReport:
    config: dict
    rows: list = field(default_factory=list)  # one dict per (benchmark, mode, limit)
    failures: list = field(default_factory=list)  # (benchmark, mode, limit, message)

    def row(self, benchmark, mode, maxvers) -> dict:
        """Look up one row; ``maxvers`` may be an int, INF, or its string form."""
        key = (benchmark, mode, format_limit(parse_limit(maxvers) if isinstance(maxvers, str) else maxvers))
        for r in self.rows:
            if (r["benchmark"], r["mode"], r["maxvers"]) == key:
                return r
        raise KeyError((benchmark, mode, maxvers))

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows, "failures": [list(f) for f in self.failures]}


def result_hash(outcome, output) -> str:
    h = hashlib.sha256(json.dumps([list(outcome), list(output)]).encode())
    return h.hexdigest()[:16]


def measure(prog, mode, maxvers, cfg: ExperimentConfig) -> dict:
    """Run one cell of the sweep; returns the report row (without ratios)."""
    vm = VM(prog, mode, maxvers, fuel=cfg.fuel)
    before = Counters()  # an error during warm-up charges the whole run
    try:
        vm.load()
        for _ in range(cfg.warmup):
            vm.call_global(cfg.entry)
        before = vm.counters()
        for _ in range(cfg.iters):
            value = vm.call_global(cfg.entry)
        outcome = ("ok", display(value))
    except JSRuntimeError as e:
        outcome = ("error", str(e))
    after = vm.counters()
    dyn = after.minus(before)
    return {
        "mode": mode,
        "maxvers": format_limit(maxvers),
        "result_hash": result_hash(outcome, vm.output),
        "outcome": list(outcome),
        "tests_total": dyn.tests_total,
        "tests_by_kind": {k: dyn.tests[k] for k in TEST_KEYS},
        "ops_executed": dyn.ops_executed,
        "ops_emitted": after.ops_emitted,
        "compiler_invocations": after.compiler_invocations,
        "stub_hits": after.stub_hits,
        "versions_histogram": {str(k): n for k, n in sorted(after.versions_histogram.items())},
    }


def _ratio(x, base):
    if base == 0:
        return 1.0 if x == 0 else None
    return round(x / base, 6)


def run_suite(cfg: ExperimentConfig) -> StatsReport:
    """Run the full benchmarks x modes x limits cross product."""
    report = StatsReport(cfg.to_dict())
    modes = list(cfg.modes)
    if "baseline" not in modes:
        modes.insert(0, "baseline")  # ratios need it
    for path in list_programs(cfg.programs):
        name = path.stem
        try:
            prog = build(path.read_text())
        except Exception as e:  # syntax or lowering error: record and go on
            log.warning("%s: %s", name, e)
            report.failures.append((name, "*", "*", f"compile: {e}"))
            continue
        rows = []
        for mode in modes:
            for lim in cfg.limits:
                try:
                    row = measure(prog, mode, lim, cfg)
                except (FuelExhausted, RecursionError, ValueError) as e:
                    log.warning("%s %s %s: %s", name, mode, format_limit(lim), e)
                    report.failures.append((name, mode, format_limit(lim), str(e)))
                    continue
                rows.append({"benchmark": name, **row})
        base = next((r for r in rows if r["mode"] == "baseline"), None)
        for r in rows:
            r["ratios"] = {
                "tests": _ratio(r["tests_total"], base["tests_total"]) if base else None,
                "ops_emitted": _ratio(r["ops_emitted"], base["ops_emitted"]) if base else None,
            }
        report.rows.extend(rows)
    return report


# -- serialization -----------------------------------------------------------

CSV_FIELDS = (
    ["benchmark", "mode", "maxvers", "result_hash", "tests_total"]
    + [f"tests_{k}" for k in TEST_KEYS]
    + ["ops_emitted", "ops_executed", "compiler_invocations", "stub_hits",
       "versions_histogram", "ratio_tests", "ratio_ops_emitted"]
)


def _flat(row) -> dict:
    d = {k: row[k] for k in ("benchmark", "mode", "maxvers", "result_hash", "tests_total",
                             "ops_emitted", "ops_executed", "compiler_invocations", "stub_hits")}
    for k in TEST_KEYS:
        d[f"tests_{k}"] = row["tests_by_kind"][k]
    d["versions_histogram"] = ";".join(f"{k}:{v}" for k, v in row["versions_histogram"].items())
    d["ratio_tests"] = row["ratios"]["tests"]
    d["ratio_ops_emitted"] = row["ratios"]["ops_emitted"]
    return d


def format_report(report: StatsReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in report.rows:
            w.writerow(_flat(r))
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        cols = ["benchmark", "mode", "maxvers", "tests_total", "ratio_tests",
                "ops_emitted", "ratio_ops_emitted", "stub_hits", "versions_histogram"]
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        for r in report.rows:
            f = _flat(r)
            lines.append("| " + " | ".join(str(f[c]) for c in cols) + " |")
        for b, m, lim, msg in report.failures:
            lines.append(f"\nFAILED {b} {m} {lim}: {msg}")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(report: StatsReport, path, fmt=None) -> Path:
    """Write the report; the format defaults to the file suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".") or "json"
    path.write_text(format_report(report, fmt))
    return path
