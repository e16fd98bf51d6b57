import pytest
from hypothesis import given, strategies as st

from intermittent.analysis import instrument
from intermittent.continuous import InputOracle, run_cont
from intermittent.harness import GenConfig, gen_program, schedule_for
from intermittent.intermittent import (BasicModel, CheckpointAtomicityError, initial_int,
                                       nearest_reboot_state, run_int, step_int)
from intermittent.lang import Checkpoint, parse
from intermittent.machine import EMPTY_SCHEDULE, Failure, FailureSchedule, ScheduleError, drive
from intermittent.state import CHECKPOINT, REBOOT, In, Read, Val, expansion

FIG5_ORACLE = InputOracle(0, (0, 2), {3: 2, 14: 0})
FIG5_SCHEDULE = FailureSchedule.of((7, 4))


def test_schedule_invariants():
    with pytest.raises(ScheduleError):
        FailureSchedule.of((3, 1), (3, 2))
    with pytest.raises(ScheduleError):
        FailureSchedule.of((3, 0))
    s = FailureSchedule.of((1, 2), Failure(4, 1, True))
    assert FailureSchedule.from_json(s.to_json()) == s


def test_checkpoint_saves_named_locations():
    p = parse("nv { a = 0; w = 1; x = 2; y = 3; z = 4 } main { checkpoint(w, y, z); x := 9 }")
    cfg, obs = step_int(initial_int(p), InputOracle(), EMPTY_SCHEDULE, 0)
    assert obs == (CHECKPOINT,)
    assert set(cfg.kappa.nv) == {"w", "y", "z"}
    assert cfg.kappa.cmd == parse("nv { x = 0 } main { x := 9 }").body


def test_failure_and_reboot_timing():
    p = parse("nv { x = 0 } main { checkpoint(); x := 1; x := 2 }")
    _, obs, trace = run_int(p, InputOracle(), FailureSchedule.of((2, 4)))
    fail = next(s for s in trace.steps if s.rule == "PowerFail")
    reboot = next(s for s in trace.steps if s.rule == "Reboot")
    before = trace.steps[fail.index - 1].config.tau
    assert fail.config.tau == before + 1 and fail.obs == ()
    assert reboot.config.tau == fail.config.tau + 4
    assert reboot.obs == (REBOOT,)
    assert REBOOT in obs


def test_failure_before_any_checkpoint_restarts_program():
    p = parse("nv { x = 0 } vol { t = 5 } main { t := t + 1; x := t; checkpoint() }")
    final, _, trace = run_int(p, InputOracle(), FailureSchedule.of((1, 1)))
    reboot = next(s for s in trace.steps if s.rule == "Reboot")
    assert reboot.config.cmd == p.body
    assert reboot.config.vol == {"t": Val(5)}
    assert final.nv["x"] == Val(6)


def test_step_int_rejects_failure_at_checkpoint():
    p = parse("nv { x = 0 } main { checkpoint(); x := 1 }")
    with pytest.raises(CheckpointAtomicityError):
        step_int(initial_int(p), InputOracle(), FailureSchedule.of((0, 1)), 0)


def test_driver_defers_failure_past_checkpoint():
    p = parse("nv { x = 0 } main { checkpoint(); x := 1 }")
    _, _, trace = run_int(p, InputOracle(), FailureSchedule.of((0, 1)))
    assert [s.rule for s in trace.steps[:3]] == ["CkPt", "PowerFail", "Reboot"]


def test_two_phase_checkpoint_can_tear():
    p = parse("nv { x = 0 } main { x := 1; checkpoint(x); x := 2 }")
    model = BasicModel(p, InputOracle(), atomic_checkpoint=False)
    trace = drive(model, None, FailureSchedule.of((1, 1)))
    assert trace.steps[1].rule == "PowerFail"
    assert trace.steps[1].config.kappa.nv == {"x": Val(1)}
    assert trace.steps[1].config.kappa.cmd == p.body


def test_empty_schedule_equals_continuous(corpus):
    for name, p in corpus.items():
        if not hasattr(p, "body"):
            continue
        oracle = InputOracle(3)
        f1, o1, _ = run_int(p, oracle)
        f2, o2 = run_cont(p, oracle)
        assert f1.erase() == f2, name
        assert o1 == o2, name


def test_fig5_observations(fig5):
    p = instrument(fig5, "war+emw-tainted")
    final, obs, trace = run_int(p, FIG5_ORACLE, FIG5_SCHEDULE)
    skeleton = [o for o in obs if not isinstance(o, Read) or o.loc == "z"]
    assert skeleton == [CHECKPOINT, In(3), REBOOT, In(14), Read("z", Val(3))]
    assert final.nv["y"] == Val(0) and final.nv["x"] == Val(3)


def _continuous_outcomes(p):
    outs = []
    for a in (0, 2):
        final, _ = run_cont(p, InputOracle(0, (a,)))
        outs.append({k: v.v for k, v in final.nv.items()})
    return outs


def test_fig2b_rio_bug_under_war_only(fig5):
    p = instrument(fig5, "war-only")
    assert "y" not in p.body.first.omega
    final, _, _ = run_int(p, FIG5_ORACLE, FIG5_SCHEDULE)
    got = {k: v.v for k, v in final.nv.items()}
    assert got["y"] == 1 and got["x"] == 3
    assert got not in _continuous_outcomes(fig5)


def test_nearest_reboot_state(fig5):
    p = instrument(fig5, "war+emw-tainted")
    _, _, clean = run_int(p, FIG5_ORACLE)
    assert nearest_reboot_state(clean) == clean.initial.nv
    _, _, one = run_int(p, FIG5_ORACLE, FIG5_SCHEDULE)
    reboot = next(s for s in one.steps if s.rule == "Reboot")
    assert nearest_reboot_state(one) == reboot.config.nv
    before = one.steps[reboot.index - 1].config
    assert reboot.config.nv == {**before.nv, **before.kappa.nv}
    two_sched = FailureSchedule.of((7, 4), (12, 2))
    _, _, two = run_int(p, InputOracle(0, (0, 2), {3: 2, 14: 0}), two_sched)
    reboots = [s for s in two.steps if s.rule == "Reboot"]
    assert len(reboots) == 2
    assert nearest_reboot_state(two) == reboots[-1].config.nv


@given(st.integers(0, 10**6), st.integers(0, 10**6))
def test_reboot_postcondition_and_time(pseed, sseed):
    p = instrument(gen_program(GenConfig(seed=pseed)), "war+emw-tainted")
    oracle = InputOracle(pseed)
    model = BasicModel(p, oracle)
    trace = drive(model, None, schedule_for(model, sseed, 0.2))
    configs = trace.configs()
    for s in trace.steps:
        before, after = configs[s.index], s.config
        assert after.tau >= before.tau
        if s.rule == "Reboot":
            saved = before.kappa.nv
            assert after.tau == before.tau + before.cmd.n
            for loc in before.nv:
                want = saved[loc] if loc in saved else before.nv[loc]
                assert after.nv[loc] == want
            assert after.vol == before.kappa.vol and after.cmd == before.kappa.cmd


@pytest.mark.parametrize("name", ["fig2", "fig5", "rio_flag", "swap"])
def test_rate_one_terminates_under_cap(corpus, name):
    p = instrument(corpus[name], "war+emw-tainted")
    model = BasicModel(p, InputOracle(1))
    trace = drive(model, None, schedule_for(model, 5, 1.0))
    assert trace.final.is_terminal()
    assert trace.capped


def test_checkpoint_restores_only_expansion():
    p = parse("nv { a[2] = {0, 0}; x = 0 } main { checkpoint(a); a[0] := 1; a[1] := 2; x := 3 }")
    cfg = initial_int(p)
    cfg, _ = step_int(cfg, InputOracle(), EMPTY_SCHEDULE, 0)
    assert set(cfg.kappa.nv) == expansion(cfg.nv, {"a"})
    assert isinstance(p.body.first, Checkpoint)
