"""Execution engine: results, runtime errors, counters, and the reference interpreter."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minidyn.bbv import INF
from minidyn.reference import run_reference
from minidyn.values import JSRuntimeError
from minidyn.vm import MODES, TEST_KEYS, VM, FuelExhausted, build, run
from progen import generate

CONFIGS = [("baseline", 0), ("analysis", 0)] + [
    (m, k) for m in ("bbv-lazy", "bbv-eager") for k in (0, 1, 2, 5, INF)]


@pytest.fixture(scope="module")
def sum_prog(corpus):
    return build(corpus["sum"])


@pytest.mark.parametrize("mode,maxvers", CONFIGS)
def test_sum_500(sum_prog, mode, maxvers):
    r = run(sum_prog, mode, maxvers, entry="sum", args=[500])
    assert r.error is None
    assert r.value == 499 * 500 // 2 and type(r.value) is int


def test_sum_baseline_test_count(sum_prog):
    n = 500
    r = run(sum_prog, "baseline", entry="sum", args=[n])
    # i < n tests i and n on every header visit (n + 1 of them);
    # s += i tests s and i, i++ tests i, on each of the n iterations
    assert r.counters.tests_total == 2 * (n + 1) + 3 * n
    assert r.counters.tests_total >= 5 * n


def test_sum_lazy_single_test(sum_prog):
    for k in (2, 5, INF):
        assert run(sum_prog, "bbv-lazy", k, entry="sum", args=[500]).counters.tests_total == 1


def test_bitsinbyte_matches_popcount(corpus):
    prog = build(corpus["bits-in-byte"])
    for mode, k in (("baseline", 0), ("bbv-lazy", 5), ("analysis", 0)):
        vm = VM(prog, mode, k)
        vm.load()
        assert [vm.call_global("bitsinbyte", [b]) for b in range(256)] == [bin(b).count("1") for b in range(256)]


def test_runtime_error_keeps_counters():
    src = "function f(x) { return x & 1; } function main() { return f('a'); }"
    r = run(src, "baseline")
    assert r.error == "TypeError: bitwise operator on non-number"
    assert r.outcome() == ("error", r.error)
    assert r.counters.tests_total > 0 and r.counters.ops_executed > 0
    lazy = run("function main() { var x = 'a'; return x & 1; }", "bbv-lazy")
    assert lazy.error == r.error and lazy.counters.tests_total == 0  # operand is a literal


def test_fuel_limit():
    with pytest.raises(FuelExhausted):
        run("function main() { while (1) {} }", fuel=10_000)


def test_closures_and_print():
    src = """
    function counter() { var n = 0; return function () { n = n + 1; return n; }; }
    function main() {
        var c = counter(), d = counter();
        c(); c();
        print("c", c(), "d", d());
        return c() + d();
    }"""
    for mode, k in CONFIGS:
        r = run(src, mode, k)
        assert r.outcome() == ("ok", "i32:6") and r.output == ["c 3 d 1"]


def test_objects_arrays_strings():
    src = """
    function main() {
        var o = {a: 1, b: 'x'}, arr = [1, 2.5, 'z'];
        o.c = arr.length + o.a;
        arr[3] = o.b + o.c;
        return arr[3] + arr[1] + 'abc'.length;
    }"""
    assert run(src).outcome() == run_reference(src)[0] == ("ok", "str:'x42.53'")


def test_call_arity_mismatch_pads_undefined():
    r = run("function f(a, b) { return b; } function main() { return f(1); }")
    assert r.outcome() == ("ok", "undefined")


def test_unknown_global_call():
    r = run("function main() { return nope(); }")
    assert r.error is not None and r.error.startswith("TypeError")


def test_modes_constant():
    assert MODES == ("baseline", "analysis", "bbv-lazy", "bbv-eager")
    with pytest.raises(ValueError):
        VM(build("function main() { return 1; }"), "jit")


# -- reference interpreter -------------------------------------------------------------


def test_reference_examples(corpus):
    assert run_reference(corpus["sum"], entry="sum", args=[500])[0] == ("ok", "i32:124750")
    assert run_reference(corpus["bits-in-byte"], entry="bitsinbyte", args=[255])[0] == ("ok", "i32:8")
    assert run_reference("function main() { return 'a' + 1; }")[0] == ("ok", "str:'a1'")


def test_corpus_agrees_with_reference(corpus):
    for name, src in corpus.items():
        want = run_reference(src)
        prog = build(src)
        for mode, k in CONFIGS:
            r = run(prog, mode, k)
            assert (r.outcome(), r.output) == want, (name, mode, k)


# -- counters --------------------------------------------------------------------------


def check_counters(c):
    assert set(c.tests) == set(TEST_KEYS)
    assert sum(c.tests.values()) == c.tests_total
    assert all(v >= 0 for v in c.tests.values())
    assert c.ops_executed >= 0 and c.ops_emitted >= 0 and c.stub_hits <= c.compiler_invocations


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(CONFIGS))
def test_counter_consistency(seed, config):
    mode, k = config
    vm = VM(build(generate(seed)), mode, k)
    snaps = [vm.counters()]
    try:
        vm.load()
        snaps.append(vm.counters())
        vm.call_global("main")
    except JSRuntimeError:
        pass
    snaps.append(vm.counters())
    for c in snaps:
        check_counters(c)
    for a, b in zip(snaps, snaps[1:]):  # monotone during a run
        d = b.minus(a)
        assert min(d.tests.values()) >= 0
        assert min(d.ops_executed, d.ops_emitted, d.compiler_invocations, d.stub_hits) >= 0


@pytest.mark.parametrize("name", ["sum", "bits-in-byte", "closure-counter", "float-mix"])
def test_warm_up_stability(corpus, name):
    vm = VM(build(corpus[name]), "bbv-lazy", 5)
    vm.load()
    vm.call_global("main")
    before = vm.counters()
    vm.call_global("main")
    d = vm.counters().minus(before)
    assert d.stub_hits == 0 and d.compiler_invocations == 0 and d.ops_emitted == 0


def test_counters_json_round_trip(sum_prog):
    import json

    c = run(sum_prog, "bbv-lazy", 5).counters
    d = json.loads(c.to_json())
    assert d["tests_total"] == c.tests_total and d["tests"] == c.tests
    assert all(isinstance(k, str) for k in d["versions_histogram"])
