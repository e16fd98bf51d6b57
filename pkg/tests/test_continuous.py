from collections import Counter

import pytest
from hypothesis import given, strategies as st

from oracles import big_step, flat_store
from intermittent.continuous import (ContConfig, EvalError, InputOracle, eval_expr, initial_cont,
                                     run_cont, sleep, step_cont, trace_cont)
from intermittent.harness import GenConfig, gen_program
from intermittent.lang import ArrIdx, BinOp, Const, If, Var, parse, seq, Skip, Assign
from intermittent.state import CHECKPOINT, In, Read, Val, init_store


def const_oracle(v):
    return InputOracle(0, (v,))


def test_eval_variable_records_read():
    n = init_store({"w": 4})
    assert eval_expr(n, {}, Var("w")) == (Val(4), [Read("w", Val(4))])


def test_eval_constant_reads_nothing():
    assert eval_expr({}, {}, Const(True)) == (Val(True), [])


def test_eval_array_with_computed_index():
    n = init_store({"a": (0, 0, 7)})
    v, reads = eval_expr(n, {}, ArrIdx("a", BinOp("+", Const(1), Const(1))))
    assert v == Val(7)
    assert reads == [Read(("a", 2), Val(7))]
    n2 = init_store({"a": (0, 0, 7), "j": 1})
    _, reads = eval_expr(n2, {}, ArrIdx("a", BinOp("+", Var("j"), Const(1))))
    assert reads == [Read("j", Val(1)), Read(("a", 2), Val(7))]


def test_eval_faults():
    n = init_store({"a": (0, 0), "j": 5, "b": True})
    with pytest.raises(EvalError):
        eval_expr(n, {}, ArrIdx("a", Var("j")))
    with pytest.raises(EvalError):
        eval_expr(n, {}, BinOp("+", Var("b"), Const(1)))


def test_skip_sequencing_is_free():
    sigma = ContConfig(5, {}, {}, seq(Skip(), Skip()))
    nxt, obs, rule = step_cont(sigma, const_oracle(0))
    assert (nxt.tau, nxt.cmd, obs, rule) == (5, Skip(), (), "Skip")


def test_tainted_guard_branches_like_clean():
    body = If(Var("g"), Assign("x", Const(1)), Assign("x", Const(2)))
    for g in (Val(True), Val(True, 3, True)):
        sigma = ContConfig(0, {"g": g, "x": Val(0)}, {}, body)
        nxt, _, rule = step_cont(sigma, const_oracle(0))
        assert rule == "If-T" and nxt.cmd == Assign("x", Const(1))


def test_input_is_timestamped_and_tainted():
    p = parse("nv { i = 0 } main { i := IN() }")
    final, obs = run_cont(p, const_oracle(2))
    assert obs == [In(0, 2)]
    assert final.nv["i"] == Val(2, 0) and final.nv["i"].tainted


def test_checkpoint_is_a_timed_noop():
    p = parse("nv { x = 0 } main { checkpoint(x); x := 1 }")
    trace = trace_cont(p, const_oracle(0))
    assert trace.steps[0].obs == (CHECKPOINT,)
    assert trace.final.tau == 2


def test_sleep():
    sigma = ContConfig(2, init_store({"i": 0}), {}, parse("nv { i = 0 } main { i := IN() }").body)
    later = sleep(sigma, 8)
    assert (later.nv, later.vol, later.cmd, later.tau) == (sigma.nv, sigma.vol, sigma.cmd, 8)
    _, obs, _ = step_cont(later, InputOracle(0, (0, 2), {8: 2, 3: 0}))
    assert obs == (In(8, 2),)
    with pytest.raises(ValueError):
        sleep(sigma, 2)


def test_skip_program_terminates_immediately():
    final, obs = run_cont(parse("main { skip }"), const_oracle(0))
    assert final.tau == 0 and obs == []


def test_fig5_observation_suffix(fig5):
    final, obs = run_cont(fig5, InputOracle(0, (0, 2), {3: 0}))
    ins = [o for o in obs if isinstance(o, In)]
    assert ins == [In(3)]
    assert obs[-1] == Read("z", Val(3))
    assert obs.index(In(3)) < len(obs) - 1
    assert final.nv["x"] == Val(3) and final.nv["z"] == Val(0)


@pytest.mark.parametrize("value", [0, 2, 9])
def test_fig2_matches_big_step(fig2, value):
    final, obs = run_cont(fig2, const_oracle(value))
    ref = big_step(fig2.body, flat_store(fig2.nv), flat_store(fig2.vol), lambda tau: value)
    assert {k: v.v for k, v in final.nv.items()} == ref.nv
    assert [(o.loc, o.val.v) for o in obs if isinstance(o, Read)] == ref.reads
    assert final.tau == ref.tau
    branch = "then" if value > 1 else "else"
    assert (final.nv["y"].v == 1) == (branch == "then")


@pytest.mark.parametrize("seed", range(50))
def test_straight_line_matches_big_step(seed):
    p = gen_program(GenConfig(seed=seed, max_depth=0))
    assert not any(isinstance(c, If) for c in _commands(p.body))
    oracle = InputOracle(seed)
    final, obs = run_cont(p, oracle)
    ref = big_step(p.body, flat_store(p.nv), flat_store(p.vol), oracle)
    assert {k: v.v for k, v in final.nv.items()} == ref.nv
    assert {k: v.v for k, v in final.vol.items()} == ref.vol
    got = Counter((o.loc, o.val.v) for o in obs if isinstance(o, Read))
    assert got == Counter(ref.reads)
    assert [(o.tau, o.value) for o in obs if isinstance(o, In)] == ref.inputs


def _commands(c):
    from intermittent.lang import Seq
    while isinstance(c, Seq):
        yield c.first
        c = c.rest
    yield c


@given(st.integers(0, 10**6))
def test_general_programs_match_big_step(seed):
    p = gen_program(GenConfig(seed=seed))
    oracle = InputOracle(seed)
    final, obs = run_cont(p, oracle)
    ref = big_step(p.body, flat_store(p.nv), flat_store(p.vol), oracle)
    assert {k: v.v for k, v in final.nv.items()} == ref.nv
    assert [(o.loc, o.val.v) for o in obs if isinstance(o, Read)] == ref.reads
    assert final.tau == ref.tau


@given(st.integers(0, 10**6))
def test_determinism_and_time(seed):
    p = gen_program(GenConfig(seed=seed))
    oracle = InputOracle(seed)
    t1, t2 = trace_cont(p, oracle), trace_cont(p, oracle)
    assert [s.config for s in t1.steps] == [s.config for s in t2.steps]
    assert t1.observations() == t2.observations()
    taus = [c.tau for c in t1.configs()]
    assert taus == sorted(taus)
    ins = [o.tau for o in t1.observations() if isinstance(o, In)]
    assert ins == sorted(set(ins))


def test_oracle_is_deterministic_and_overridable():
    o = InputOracle(7, (0, 2))
    assert [o(t) for t in range(20)] == [o(t) for t in range(20)]
    assert set(o(t) for t in range(50)) == {0, 2}
    assert o.with_overrides({3: 9})(3) == 9
    assert InputOracle.from_json(o.to_json()) == o


def test_initial_config(fig2):
    sigma = initial_cont(fig2)
    assert sigma.tau == 0 and sigma.cmd == fig2.body and sigma.vol == {}
