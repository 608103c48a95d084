"""Acceptance criteria 1-12.

Each test records a one-line verdict in ``conftest.ACCEPTANCE``; the verdicts
are printed in the terminal summary as ``criterion NN: PASS|FAIL  detail``.
Tolerances are pinned in the assertions (all exact except where noted).
"""

import time
from collections import Counter

import pytest

import conftest
from minidyn.analysis import analyze
from minidyn.bbv import INF, format_limit
from minidyn.irinterp import run_ir
from minidyn.reference import FuelExhausted as RefFuelExhausted
from minidyn.reference import run_reference
from minidyn.values import JSRuntimeError, display, tag_of
from minidyn.vm import VM, build, run
from progen import generate

LIMITS = (0, 1, 2, 5, INF)
CONFIGS = [("baseline", 0), ("analysis", 0)] + [
    (m, k) for m in ("bbv-lazy", "bbv-eager") for k in LIMITS]
N_RANDOM = 1000
N_SOUNDNESS = 200
OPS_BUDGET = 100  # ops emitted, as a multiple of the baseline's


def record(n, ok, detail):
    conftest.ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, detail


def per_call(vm, fn_name, args):
    before = vm.counters()
    log_before = Counter(vm.test_log) if vm.test_log is not None else None
    value = vm.call_global(fn_name, args)
    d = vm.counters().minus(before)
    log = Counter(vm.test_log) - log_before if log_before is not None else None
    return value, d, log


# -- 1. sum walkthrough ----------------------------------------------------------------


def test_criterion_01_sum_walkthrough(corpus):
    prog = build(corpus["sum"])
    problems = []
    for k in (2, 5, INF):
        vm = VM(prog, "bbv-lazy", k, trace_tests=True)
        vm.load()
        vm.call_global("sum", [500])  # warm-up
        value, d, log = per_call(vm, "sum", [500])
        if value != 499 * 500 // 2 or type(value) is not int:
            problems.append(f"maxvers={format_limit(k)} result {value!r}")
        if d.tests_total != 1 or dict(log) != {("sum", "n.1"): 1}:
            problems.append(f"maxvers={format_limit(k)} tests/call {d.tests_total} {dict(log)}")
    vm = VM(prog, "baseline")
    vm.load()
    vm.call_global("sum", [500])
    value, base, _ = per_call(vm, "sum", [500])
    if value != 124750 or base.tests_total < 2500:
        problems.append(f"baseline result {value} tests/call {base.tests_total}")
    record(1, not problems,
           f"sum(500)=124750; lazy 1 test/call (is_i32 n); baseline {base.tests_total} tests/call"
           + (f"; {problems}" if problems else ""))


# -- 2. bits-in-byte -------------------------------------------------------------------


def test_criterion_02_bits_in_byte(corpus):
    prog = build(corpus["bits-in-byte"])
    lazy = VM(prog, "bbv-lazy", 5, trace_tests=True)
    ana = VM(prog, "analysis", trace_tests=True)
    bad, ratios = [], []
    for vm in (lazy, ana):
        vm.load()
        vm.call_global("main")  # warm-up
    for b in range(256):
        v1, dl, log = per_call(lazy, "bitsinbyte", [b])
        v2, da, _ = per_call(ana, "bitsinbyte", [b])
        on_b = sum(n for (fn, val), n in log.items() if fn == "bitsinbyte" and val == "b.1")
        if v1 != v2 or v1 != bin(b).count("1") or on_b != 1:
            bad.append((b, v1, on_b))
        if dl.tests_total == 0 or da.tests_total < 8 * dl.tests_total:
            bad.append((b, dl.tests_total, da.tests_total))
        ratios.append(da.tests_total / max(dl.tests_total, 1))
    record(2, not bad,
           f"lazy: 1 test on b per call for b=0..255; analysis/lazy tests per call "
           f"min {min(ratios):.1f}x (>= 8x)" + (f"; bad {bad[:3]}" if bad else ""))


# -- 3-8: corpus sweep ---------------------------------------------------------------------


def test_criterion_03_globals(default_report):
    got = {(m, format_limit(k)): default_report.row("globals-bitwise-and", m, k)["ratios"]["tests"]
           for m in ("analysis", "bbv-lazy") for k in LIMITS}
    record(3, all(r == 1.0 for r in got.values()),
           f"globals-bitwise-and tests ratio analysis/bbv-lazy = {sorted(set(got.values()))}")


def benchmarks(report):
    return sorted({r["benchmark"] for r in report.rows})


def test_criterion_04_dominance(default_report):
    bad, lines = [], []
    for b in benchmarks(default_report):
        lz = default_report.row(b, "bbv-lazy", 5)["tests_total"]
        an = default_report.row(b, "analysis", 5)["tests_total"]
        ba = default_report.row(b, "baseline", 5)["tests_total"]
        lines.append(f"{b}={lz}/{an}/{ba}")
        if not lz <= an <= ba:
            bad.append(b)
    record(4, not bad, f"lazy5 <= analysis <= baseline on all {len(lines)} benchmarks"
           + (f"; violated {bad}" if bad else ""))


def test_criterion_05_limit_sweep(default_report):
    bad = []
    for b in benchmarks(default_report):
        seq = [default_report.row(b, "bbv-lazy", k)["tests_total"] for k in LIMITS]
        if any(x < y for x, y in zip(seq, seq[1:])):
            bad.append((b, seq))
    record(5, not bad, "bbv-lazy tests non-increasing over limits 0,1,2,5,inf"
           + (f"; violated {bad}" if bad else ""))


COUNTER_KEYS = ("tests_total", "tests_by_kind", "ops_executed", "ops_emitted",
                "compiler_invocations", "stub_hits", "versions_histogram")


def test_criterion_06_disabled_mode(default_report, corpus):
    bad = []
    for b in benchmarks(default_report):
        base = default_report.row(b, "baseline", 0)
        lazy = default_report.row(b, "bbv-lazy", 0)
        if any(base[k] != lazy[k] for k in COUNTER_KEYS) or base["result_hash"] != lazy["result_hash"]:
            bad.append(b)
        # whole-run counters too, not only the measured call
        if run(corpus[b], "baseline").counters != run(corpus[b], "bbv-lazy", 0).counters:
            bad.append(b + " (whole run)")
    record(6, not bad, "bbv-lazy maxvers=0 counters identical to baseline on the corpus"
           + (f"; differ {bad}" if bad else ""))


def test_criterion_07_histogram(default_report):
    hist = Counter()
    for b in benchmarks(default_report):
        for k, n in default_report.row(b, "bbv-lazy", INF)["versions_histogram"].items():
            hist[int(k)] += n
    total = sum(hist.values())
    share = hist[1] / total
    record(7, share > 0.5 and max(hist) <= 20,
           f"limit inf: {hist[1]}/{total} blocks ({share:.0%}) have one version; max {max(hist)} versions")


def test_criterion_08_eager_vs_lazy(default_report):
    names = benchmarks(default_report)
    tot = {m: [0, 0] for m in ("bbv-lazy", "bbv-eager", "baseline")}
    for b in names:
        for m in tot:
            r = default_report.row(b, m, 5)
            tot[m][0] += r["ops_emitted"]
            tot[m][1] += r["tests_total"]
    elim_lazy = tot["baseline"][1] - tot["bbv-lazy"][1]
    elim_eager = tot["baseline"][1] - tot["bbv-eager"][1]
    record(8, tot["bbv-eager"][0] > tot["bbv-lazy"][0] and elim_eager < elim_lazy,
           f"limit 5: ops emitted eager {tot['bbv-eager'][0]} > lazy {tot['bbv-lazy'][0]}; "
           f"tests eliminated eager {elim_eager} < lazy {elim_lazy}")


# -- 9, 10, 12: randomized sweep -------------------------------------------------------------


def lazy_layout_ok(vm):
    """Versions laid out in first-execution order and none compiled but unexecuted."""
    starts = [v.start for v in vm.exec_order]
    compiled = [v for v in vm.all_versions() if v.start is not None]
    return starts == sorted(starts) and len(starts) == len(compiled) and all(v.executed for v in compiled)


def sweep_program(src, stats, label):
    try:
        want = run_reference(src)
    except RefFuelExhausted:
        stats["ref_fuel"] += 1
        return
    prog = build(src)
    base_emitted = None
    counters = {}
    for mode, k in CONFIGS:
        vm = VM(prog, mode, k)
        try:
            vm.load()
            outcome = ("ok", display(vm.call_global("main")))
        except JSRuntimeError as e:
            outcome = ("error", str(e))
        stats["runs"] += 1
        if (outcome, vm.output) != want:
            stats["mismatch"].append((src, mode, k, outcome, want[0]))
        c = vm.counters()
        counters[(mode, k)] = c
        if mode == "baseline":
            base_emitted = c.ops_emitted
        if mode != "bbv-eager" and not lazy_layout_ok(vm):  # eager compiles ahead of execution
            stats["layout"].append((src, mode, k))
        for fs in vm.fnstates.values():
            for bid, vs in fs.versions.items():
                if sum(1 for v in vs if not v.generic) > k:
                    stats["bound"].append((src, mode, k, fs.fn.name, bid))
        if c.ops_emitted > OPS_BUDGET * max(base_emitted, 1):
            stats["budget"].append((label, mode, format_limit(k), round(c.ops_emitted / max(base_emitted, 1), 1)))
        stats["max_emit_ratio"] = max(stats["max_emit_ratio"], c.ops_emitted / max(base_emitted, 1))
    if counters[("baseline", 0)] != counters[("bbv-lazy", 0)]:
        stats["disabled"].append(src)


@pytest.fixture(scope="module")
def sweep(corpus):
    stats = {"runs": 0, "ref_fuel": 0, "mismatch": [], "layout": [], "bound": [], "budget": [],
             "disabled": [], "max_emit_ratio": 0.0, "errors": 0}
    t0 = time.perf_counter()
    for name, src in corpus.items():
        sweep_program(src, stats, name)
    corpus_runs = stats["runs"]
    for seed in range(N_RANDOM):
        src = generate(seed)
        stats["errors"] += run_reference(src)[0][0] == "error"
        sweep_program(src, stats, f"seed {seed}")
    stats["corpus_runs"] = corpus_runs
    stats["seconds"] = time.perf_counter() - t0
    return stats


def test_criterion_09_lazy_layout(sweep):
    n = len(sweep["layout"])
    record(9, n == 0, f"{sweep['runs']} runs: versions laid out in first-execution order, "
           f"no compiled-but-unexecuted versions (lazy-compiled modes); violations {n}")


def test_criterion_10_differential(sweep):
    n = len(sweep["mismatch"])
    record(10, n == 0 and sweep["ref_fuel"] == 0,
           f"corpus + {N_RANDOM} random programs ({sweep['errors']} raising) x {len(CONFIGS)} configs = "
           f"{sweep['runs']} runs agree with the reference; mismatches {n}; sweep {sweep['seconds']:.0f}s"
           + (f"; first {sweep['mismatch'][0][1:]}" if n else ""))


def test_criterion_12_version_bound(sweep):
    nb, nbud = len(sweep["bound"]), len(sweep["budget"])
    record(12, nb == 0 and nbud == 0 and not sweep["disabled"],
           f"non-generic versions <= maxvers in all {sweep['runs']} runs (violations {nb}); "
           f"ops emitted <= {OPS_BUDGET}x baseline (max {sweep['max_emit_ratio']:.1f}x, violations {nbud}"
           + (f": {sweep['budget'][:5]}" if nbud else "") + ")")


# -- 11. analysis soundness ----------------------------------------------------------------


def observe(src):
    """Run the IR interpreter, checking observed tags against the analysis; returns violations."""
    prog = build(src)
    results = {name: analyze(fn) for name, fn in prog.functions.items()}
    bad = []
    checks = 0

    def on_block(fn, pred, bid, env):
        nonlocal checks
        res = results[fn.name]
        state = res.block_in[bid] if pred is None else res.edge_state.get((pred, bid))
        if state is None:
            bad.append((fn.name, pred, bid, "edge not executable"))
            return
        for v, tags in state.items():
            if v in env:
                checks += 1
                if tag_of(env[v]) not in tags:
                    bad.append((fn.name, bid, v))

    run_ir(prog, on_block=on_block)
    return bad, checks


def test_criterion_11_analysis_soundness(corpus):
    bad, checks = [], 0
    sources = list(corpus.values()) + [generate(10_000 + s) for s in range(N_SOUNDNESS)]
    for src in sources:
        b, c = observe(src)
        bad += b
        checks += c
    record(11, not bad, f"{len(sources)} instrumented runs, {checks} value-tag observations, "
           f"all within inferred sets; violations {len(bad)}")
