"""Typing contexts, version lookup, and lazy/eager compilation."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minidyn.bbv import (
    GENERIC, INF, Engine, FnState, TypingContext, context_comp, format_limit, parse_limit,
)
from minidyn.codebuf import Enter, Stub, TagTest
from minidyn.values import JSRuntimeError, TypeTag
from minidyn.vm import VM, build
from progen import generate

I, F = TypeTag.INT32, TypeTag.FLOAT64


def ctx(**kw):
    return TypingContext.of(kw)


@pytest.fixture(scope="module")
def sum_prog(corpus):
    return build(corpus["sum"])


# -- context compatibility -------------------------------------------------------


def test_context_comp_examples():
    assert context_comp(ctx(a=I, b=F), ctx(a=I, b=F)) == 0
    assert context_comp(ctx(a=I), ctx()) == 1
    assert context_comp(ctx(a=I), ctx(a=F)) == INF
    assert context_comp(ctx(), ctx(a=I)) == INF


def test_context_normalization():
    assert ctx(b=F, a=I) == ctx(a=I, b=F)
    assert TypingContext.of({"a": I, "b": None}) == ctx(a=I)
    assert ctx().generic and GENERIC.generic
    assert ctx(a=I).get("a") is I and ctx(a=I).get("b") is None


tags = st.sampled_from(list(TypeTag))
contexts = st.dictionaries(st.sampled_from("abcd"), tags, max_size=4).map(TypingContext.of)


@given(contexts, contexts)
def test_context_comp_properties(p, s):
    score = context_comp(p, s)
    pd, sd = p.as_dict(), s.as_dict()
    if all(pd.get(v) == t for v, t in sd.items()):
        assert score == len(set(pd) - set(sd))
    else:
        assert score == INF
    assert context_comp(p, p) == 0
    assert context_comp(p, GENERIC) == len(pd)


# -- version lookup ----------------------------------------------------------------


def engine_for(prog, name, maxvers):
    return Engine(vm=None, maxvers=maxvers), FnState(prog.functions[name])


def test_request_new_version(sum_prog):
    eng, fs = engine_for(sum_prog, "sum", 5)
    v, created = eng.request_version(fs, "b1", ctx(**{"n.1": I}))
    assert created and v.ctx == ctx(**{"n.1": I})
    again, created = eng.request_version(fs, "b1", ctx(**{"n.1": I}))
    assert again is v and not created


def test_request_inexact_compatible(sum_prog):
    eng, fs = engine_for(sum_prog, "sum", 1)
    generic, _ = eng.request_version(fs, "b1", GENERIC)
    other, _ = eng.request_version(fs, "b1", ctx(**{"n.1": F}))
    assert fs.nongeneric_count("b1") == 1  # table full
    v, created = eng.request_version(fs, "b1", ctx(**{"n.1": I, "i.2": I}))
    assert v is generic and not created


def test_request_prefers_lowest_score(sum_prog):
    eng, fs = engine_for(sum_prog, "sum", 2)
    eng.request_version(fs, "b1", GENERIC)
    one, _ = eng.request_version(fs, "b1", ctx(**{"n.1": I}))
    eng.request_version(fs, "b1", ctx(**{"s.4": F}))
    v, _ = eng.request_version(fs, "b1", ctx(**{"n.1": I, "i.2": I}))
    assert v is one  # score 1 beats the generic version's score 2


def test_request_incompatible_falls_back_to_generic(sum_prog):
    eng, fs = engine_for(sum_prog, "sum", 1)
    eng.request_version(fs, "b1", ctx(**{"n.1": F}))
    v, created = eng.request_version(fs, "b1", ctx(**{"n.1": I}))
    assert v.generic and created
    assert [x.ctx for x in fs.versions["b1"]] == [ctx(**{"n.1": F}), GENERIC]


def test_limit_zero_always_generic(sum_prog):
    eng, fs = engine_for(sum_prog, "sum", 0)
    for c in (ctx(**{"n.1": I}), ctx(**{"i.2": F}), GENERIC):
        v, _ = eng.request_version(fs, "b1", c)
        assert v.generic
    assert len(fs.versions["b1"]) == 1


@settings(max_examples=200)
@given(st.lists(contexts, max_size=12), st.sampled_from([0, 1, 2, 5, INF]))
def test_version_table_bound(reqs, limit):
    prog = build("function f(a, b, c, d) { return a; }")
    eng, fs = engine_for(prog, "f", limit)
    for c in reqs:
        v, _ = eng.request_version(fs, fs.fn.entry, c)
        assert context_comp(c, v.ctx) != INF
    assert fs.nongeneric_count(fs.fn.entry) <= limit
    assert sum(1 for v in fs.versions[fs.fn.entry] if v.generic) <= 1


def test_parse_limit():
    assert parse_limit("inf") == INF and parse_limit("5") == 5 and parse_limit(0) == 0
    assert format_limit(INF) == "inf" and format_limit(2) == "2"
    with pytest.raises(ValueError):
        parse_limit("-1")


# -- lazy compilation of sum -----------------------------------------------------------


def test_entry_compile_emits_test_and_two_stubs(sum_prog):
    vm = VM(sum_prog, "bbv-lazy", 5)
    fs = vm.fnstates["sum"]
    vm.engine.entry_pc(fs)
    ops = [op for op in vm.code if not isinstance(op, Enter)]
    tests = [i for i, op in enumerate(ops) if isinstance(op, TagTest)]
    assert len(tests) == 1
    t = ops[tests[0]]
    assert t.tag is I and t.label == ("sum", "n.1")
    assert all(isinstance(op, Stub) for op in ops[tests[0] + 1:])
    assert len(ops) - tests[0] - 1 == 2
    assert [vm.code[x].block for x in t.targets] == ["b8", "b9"]


def test_known_int_header_compiles_to_nothing(sum_prog):
    vm = VM(sum_prog, "bbv-lazy", 5)
    vm.load()
    vm.call_global("sum", [500])
    fs = vm.fnstates["sum"]
    header = [v for v in fs.versions["b1"] if v.ctx.get("i.2") is I]
    assert header and all(v.ctx.get("s.4") is I for v in header)
    for v in header:
        assert isinstance(vm.code[v.start + 1], Enter)  # the is_i32(i) test folded away


def test_stub_hit_patches_branch(sum_prog):
    vm = VM(sum_prog, "bbv-lazy", 5)
    vm.load()
    assert vm.call_global("sum", [500]) == 124750
    t = next(op for op in vm.code if isinstance(op, TagTest) and op.label == ("sum", "n.1"))
    assert not isinstance(vm.code[t.targets[0]], Stub)  # int32 arm now compiled
    assert isinstance(vm.code[t.targets[1]], Stub)  # non-int32 arm never ran
    assert t.meta.fallthrough == 0 and t.meta.inverted


def test_warm_call_has_no_compilation(sum_prog):
    vm = VM(sum_prog, "bbv-lazy", 5)
    vm.load()
    vm.call_global("sum", [500])
    before = vm.counters()
    assert vm.call_global("sum", [600]) == 179700
    d = vm.counters().minus(before)
    assert (d.stub_hits, d.compiler_invocations, d.ops_emitted) == (0, 0, 0)
    assert d.tests_total == 1


def test_loop_versions_reach_fixed_point(sum_prog):
    counts = []
    for n in (3, 50, 500):
        vm = VM(sum_prog, "bbv-lazy", INF)
        vm.load()
        vm.call_global("sum", [n])
        counts.append({b: len(vs) for b, vs in vm.fnstates["sum"].versions.items()})
    assert counts[0] == counts[1] == counts[2]
    assert counts[0]["b1"] == 2


def test_float_argument_gets_own_versions(sum_prog):
    vm = VM(sum_prog, "bbv-lazy", 5)
    vm.load()
    assert vm.call_global("sum", [10]) == 45
    assert vm.call_global("sum", [10.5]) == 55
    assert vm.call_global("sum", [10]) == 45
    n_versions = [v for v in vm.fnstates["sum"].versions["b1"]]
    assert any(v.ctx.get("n.1") is F for v in n_versions)


# -- eager compilation ---------------------------------------------------------------


def test_eager_emits_more_than_lazy(sum_prog):
    res = {}
    for mode in ("bbv-lazy", "bbv-eager"):
        vm = VM(sum_prog, mode, 5)
        vm.load()
        assert vm.call_global("sum", [500]) == 124750
        res[mode] = (vm.counters().ops_emitted, sum(1 for _ in vm.all_versions()))
    assert res["bbv-eager"][0] > res["bbv-lazy"][0]
    assert res["bbv-eager"][1] > res["bbv-lazy"][1]
    vm = VM(sum_prog, "bbv-eager", 5)
    vm.load()
    vm.call_global("sum", [500])
    assert vm.counters().stub_hits == 0


def test_straight_line_same_code_in_both_modes():
    prog = build("function main() { var a = [1, 2.5, 'x']; var o = {k: a}; return o; }")
    dumps = []
    for mode in ("bbv-lazy", "bbv-eager"):
        vm = VM(prog, mode)
        vm.load()
        vm.call_global("main")
        dumps.append(vm.dump_code())
    assert dumps[0] == dumps[1]


@pytest.mark.parametrize("mode", ["bbv-lazy", "bbv-eager"])
def test_limit_zero_equals_baseline(corpus, mode):
    for name in ("sum", "bits-in-byte", "polymorphic-null-object"):
        prog = build(corpus[name])
        runs = []
        for m in ("baseline", mode):
            vm = VM(prog, m, 0)
            vm.load()
            vm.call_global("main")
            runs.append(vm.counters())
        assert runs[0] == runs[1]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0, 1, 2, 5, INF]), st.sampled_from(["bbv-lazy", "bbv-eager"]))
def test_version_bound_random(seed, limit, mode):
    vm = VM(build(generate(seed)), mode, limit)
    try:
        vm.load()
        vm.call_global("main")
    except JSRuntimeError:
        pass
    for fs in vm.fnstates.values():
        for bid, vs in fs.versions.items():
            assert sum(1 for v in vs if not v.generic) <= limit
            assert len({v.ctx for v in vs}) == len(vs)
