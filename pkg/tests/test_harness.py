import pytest
from hypothesis import given, settings, strategies as st

from intermittent.analysis import input_dependent_branches, instrument
from intermittent.continuous import InputOracle
from intermittent.equiv import check_correspondence
from intermittent.harness import (GenConfig, correspondence_case, gen_program, gen_schedule,
                                  gen_task_program, load_corpus, load_regressions, make_model,
                                  program_hash, read_trace_records, replay, run_campaign,
                                  run_model, shrink, trace_from_records, write_trace)
from intermittent.lang import If, Seq, diagnostics, parse, pretty, size, task_diagnostics
from intermittent.machine import EMPTY_SCHEDULE, FailureSchedule


def test_generation_is_deterministic():
    cfg = GenConfig(seed=11)
    assert pretty(gen_program(cfg)) == pretty(gen_program(cfg))
    assert pretty(gen_task_program(cfg)) == pretty(gen_task_program(cfg))
    assert gen_schedule(50, 3, 0.2) == gen_schedule(50, 3, 0.2)
    assert program_hash(gen_program(cfg)) != program_hash(gen_program(cfg.with_seed(12)))


def test_schedule_rate_bounds():
    assert gen_schedule(100, 1, 0.0) == EMPTY_SCHEDULE
    full = gen_schedule(30, 1, 1.0)
    assert [f.at for f in full.failures] == list(range(30))
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            gen_schedule(10, 0, bad)


def test_boundary_steps_are_hot():
    hits = sum(any(f.at == 0 for f in gen_schedule(20, s, 0.01).failures) for s in range(400))
    assert hits > 60  # at least a quarter of schedules fail at step 0


def test_bad_generator_config():
    with pytest.raises(ValueError):
        GenConfig(max_depth=-1)
    with pytest.raises(ValueError):
        GenConfig(input_domain=())


def _ifs(c):
    if isinstance(c, Seq):
        return _ifs(c.first) + _ifs(c.rest)
    if isinstance(c, If):
        return 1 + _ifs(c.then) + _ifs(c.orelse)
    return 0


@pytest.mark.parametrize("seed", range(20))
def test_depth_zero_is_straight_line(seed):
    assert _ifs(gen_program(GenConfig(seed=seed, max_depth=0)).body) == 0


def test_input_dependent_branch_share():
    hits = sum(input_dependent_branches(gen_program(GenConfig(seed=s))) > 0 for s in range(1000))
    assert hits >= 300


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_generated_programs_are_well_formed(seed):
    cfg = GenConfig(seed=seed)
    p = gen_program(cfg)
    assert diagnostics(p) == [] and size(p.body) > 0
    assert task_diagnostics(gen_task_program(cfg)) == []


def test_empty_campaign():
    rep = run_campaign(GenConfig(), models=(), n_cases=5)
    assert rep.cases == [] and rep.ok and rep.summary() == {}
    with pytest.raises(ValueError):
        run_campaign(GenConfig(), policies=("nope",))
    with pytest.raises(ValueError):
        run_campaign(GenConfig(), models=("jit",))


def test_campaign_and_replay():
    cfg = GenConfig(seed=5)
    rep = run_campaign(cfg, policies=("war-only",), models=("basic",), n_cases=40, schedules=3,
                       rate=0.2, shrink_failures=False)
    assert len(rep.cases) == 120
    assert rep.failures, "war-only should break on some generated program"
    for case in rep.failures[:5] + rep.cases[:5]:
        assert replay(case, cfg, rate=0.2) == case.verdict
    again = run_campaign(cfg, policies=("war-only",), models=("basic",), n_cases=40,
                         schedules=3, rate=0.2, shrink_failures=False)
    assert [c.verdict for c in again.cases] == [c.verdict for c in rep.cases]


def test_correct_policy_campaign_is_clean():
    rep = run_campaign(GenConfig(seed=2), models=("basic", "undo", "redo"), n_cases=15,
                       schedules=3, rate=0.2, pairs=("basic-undo", "redo-task"),
                       include_corpus=True)
    assert rep.ok, [c.to_json() for c in rep.failures]
    checks = {c.check for c in rep.cases}
    assert checks == {"correspondence", "bisim:basic-undo", "bisim:redo-task"}
    assert any(c.case.startswith("corpus:") for c in rep.cases)


def test_regressions_have_expected_verdicts():
    corpus = load_corpus()
    regs = load_regressions()
    assert {r.name for r in regs} >= {"fig2b-rio", "fig2b-emw"}
    for r in regs:
        rep, _ = correspondence_case(corpus[r.program], r.policy, "basic", r.schedule, r.oracle)
        assert ("pass" if rep.holds else "fail") == r.expect, r.name


def test_trace_file_round_trip(tmp_path, fig5):
    p = instrument(fig5, "war+emw-tainted")
    oracle = InputOracle(0, (0, 2), {3: 2, 14: 0})
    trace = run_model("basic", p, oracle, FailureSchedule.of((7, 4)))
    path = tmp_path / "t.jsonl"
    write_trace(path, trace)
    records = read_trace_records(path)
    back = trace_from_records(records)
    assert [s.rule for s in back.steps] == [s.rule for s in trace.steps]
    assert back.observations() == trace.observations()
    assert back.final.memories() == trace.final.memories()
    assert check_correspondence(p, back)[0].holds
    with pytest.raises(ValueError):
        trace_from_records(records[1:])


def test_make_model_rejects_mismatches(corpus):
    with pytest.raises(TypeError):
        make_model("task", corpus["fig2"], InputOracle())
    with pytest.raises(TypeError):
        make_model("basic", corpus["swap_tasks"], InputOracle())
    with pytest.raises(ValueError):
        make_model("nope", corpus["fig2"], InputOracle())


def test_shrink_keeps_failure_and_reduces(fig5):
    sched = FailureSchedule.of((7, 4))
    oracle = InputOracle(0, (0, 2), {3: 2, 14: 0})

    def fails(q):
        return not correspondence_case(q, "war-only", "basic", sched, oracle)[0].holds

    small = shrink(fig5, fails)
    assert fails(small)
    assert size(small.body) <= size(fig5.body)


def test_shrink_to_minimal_trigger():
    p = parse("nv { x = 0; y = 0 } main { x := 1; y := 2; x := 3 }")
    small = shrink(p, lambda q: "y := 2" in pretty(q))
    assert size(small.body) == 1 and "y := 2" in pretty(small)
