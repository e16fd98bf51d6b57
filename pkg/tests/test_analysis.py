from hypothesis import given, strategies as st

from oracles import flat_store, names, region_paths, semantic_emw
from intermittent.analysis import (EMPTY, POLICIES, analyze, check_rio, check_war,
                                   checkpoint_omegas, checkpoint_sites, collect_emw,
                                   collect_war_dino, emw_sets, fill_checkpoints, input_dependent_branches, instrument,
                                   must_write, policy_sets, war_sets)
from intermittent.continuous import InputOracle, trace_cont
from intermittent.harness import GenConfig, gen_program
from intermittent.lang import parse, pretty

FIG6 = {"w", "y", "z"}


def with_omega(p, omega):
    return fill_checkpoints(p, {0: frozenset(omega)})


def inner_branch(fig2):
    els = fig2.body.rest.orelse          # b := 1; i := IN(); if (i > 1) C else D
    return els.rest.rest


def test_war_saved_location_is_ok():
    p = parse("nv { x = 0; w = 0 } main { checkpoint(w); x := w; w := x + 1 }")
    assert check_war(p) == []


def test_war_violation_names_instruction_and_location():
    p = parse("nv { x = 0; w = 0 } main { checkpoint(); x := w; w := x + 1 }")
    [v] = check_war(p)
    assert v.kind == "war" and v.missing == ("w",) and v.region == 0
    assert v.instr == "w := x + 1"


def test_write_dominated_is_ok():
    p = parse("nv { a = 0; x = 0; w = 0 } main { checkpoint(); w := 3; "
              "if (a > 0) { x := w; w := x } else { skip } }")
    assert check_war(p) == []


def test_dino_collection():
    p = parse("nv { x = 0; w = 0 } main { checkpoint(); x := w; w := x + 1 }")
    assert "w" in war_sets(p)[0]
    assert check_war(collect_war_dino(p)) == []
    q = parse("nv { x = 0; w = 0 } main { checkpoint(); x := 1; w := 2 }")
    assert war_sets(q)[0] == EMPTY
    r = parse("nv { a[3] = {0, 0, 0}; x = 0 } main { checkpoint(); x := a[0]; a[2] := 1 }")
    assert war_sets(r)[0] == {"a"}


def test_rio_on_example(fig2):
    assert check_rio(with_omega(fig2, FIG6)) == []
    bad = check_rio(with_omega(fig2, {"w", "z"}))
    assert bad and all(v.kind == "rio" for v in bad)
    assert "y" in {m for v in bad for m in v.missing}
    assert any(v.instr == "y := 1" for v in bad)


def test_clean_branch_may_write_one_side():
    p = parse("nv { a = 0; b = 0 } main { checkpoint(); if (a > 0) { b := 1 } else { skip } }")
    assert check_rio(p) == []
    assert emw_sets(p)[0] == EMPTY
    assert emw_sets(p, taint_optimized=False)[0] == {"b"}


def test_must_write_examples(fig2):
    C, D = inner_branch(fig2).then, inner_branch(fig2).orelse
    assert must_write(C, {"b", "i"}) == {"b", "i", "x", "y"}
    assert must_write(D, {"b", "i"}) == {"b", "i", "x", "z", "w"}
    assert must_write(inner_branch(fig2), {"b", "i"}) == {"b", "i", "x"}
    assert must_write(parse("main { skip }").body, {"q"}) == {"q"}
    arr = parse("nv { a[2] = {0, 0} } main { a[0] := 1; a[1] := 2 }")
    assert must_write(arr.body) == EMPTY


def test_must_write_stops_at_checkpoint():
    p = parse("nv { x = 0; y = 0 } main { x := 1; checkpoint(); y := 1 }")
    assert must_write(p.body) == {"x"}


def test_emw_on_example(fig2):
    sets = emw_sets(fig2)
    assert sets[0] == FIG6
    assert sets[None] == EMPTY
    report = analyze(fig2)
    region0 = next(r for r in report["regions"] if r["checkpoint"] == 0)
    assert region0["emw_tainted"] == ["w", "y", "z"]
    assert not report["ok"]


def test_no_input_program_has_empty_tainted_emw():
    p = parse("nv { a = 0; x = 0; y = 0 } main { checkpoint(); "
              "if (a > 0) { x := 1 } else { y := 1 } }")
    assert all(s == EMPTY for s in emw_sets(p).values())


def test_tainted_array_index_adds_whole_array():
    p = parse("nv { i = 0; a[3] = {0, 0, 0} } main { checkpoint(); i := IN(); a[i] := 1 }")
    assert emw_sets(p)[0] == {"a"}


def test_policies_on_example(fig2):
    full = instrument(fig2, "war+emw-tainted")
    assert FIG6 <= set(full.body.first.omega)
    war_only = instrument(fig2, "war-only")
    assert "y" not in war_only.body.first.omega
    assert check_rio(full) == [] and check_war(full) == []


@given(st.integers(0, 10**6))
def test_policy_differences_are_untainted_emw(seed):
    p = gen_program(GenConfig(seed=seed))
    loose, tight = policy_sets(p, "emw"), policy_sets(p, "war+emw-tainted")
    e_all, e_t = emw_sets(p, False), emw_sets(p, True)
    for k in loose:
        assert tight[k] <= loose[k]
        assert loose[k] - tight[k] <= e_all[k] - e_t[k]


@given(st.integers(0, 10**6), st.sampled_from(POLICIES))
def test_instrument_is_idempotent(seed, policy):
    p = instrument(gen_program(GenConfig(seed=seed)), policy)
    assert instrument(p, policy) == p


@given(st.integers(0, 10**6))
def test_collectors_are_sound(seed):
    p = gen_program(GenConfig(seed=seed))
    assert check_war(collect_war_dino(p)) == []
    assert check_rio(collect_emw(p)) == []
    assert check_rio(collect_emw(p, taint_optimized=False)) == []
    assert check_rio(instrument(p, "war+emw-tainted")) == []
    assert check_rio(instrument(p, "emw")) == []


@given(st.integers(0, 10**6))
def test_dino_keeps_existing_sets(seed):
    p = instrument(gen_program(GenConfig(seed=seed)), "war+emw-tainted")
    before = checkpoint_omegas(p)
    after = checkpoint_omegas(collect_war_dino(p, keep_existing=True))
    assert all(before[k] <= after[k] for k in before)


@given(st.integers(0, 10**6), st.data())
def test_supersets_still_pass(seed, data):
    p = instrument(gen_program(GenConfig(seed=seed)), "war+emw-tainted")
    extra = data.draw(st.sets(st.sampled_from(sorted(p.nv))))
    bigger = fill_checkpoints(p, {k: v | extra for k, v in checkpoint_omegas(p).items()})
    assert check_war(bigger) == [] and check_rio(bigger) == []


def _reached_ids(p, oracle):
    """(checkpoint id, (nv, vol, continuation)) for each checkpoint a continuous run passes."""
    sites = checkpoint_sites(p)
    trace = trace_cont(p, oracle)
    cfgs = trace.configs()
    out = []
    for s in trace.steps:
        if s.rule == "CheckPoint":
            before = cfgs[s.index]
            out.append((sites[id(before.cmd)], (_plain(before.nv), _plain(before.vol),
                                                 before.cmd.rest)))
    return out


def _plain(m):
    return {k: v.v for k, v in m.items()}


@given(st.integers(0, 10**6))
def test_static_emw_covers_brute_force(seed):
    cfg = GenConfig(seed=seed, n_inputs=2, max_depth=4)
    p = gen_program(cfg)
    sets = emw_sets(p)
    for cid, (nv, vol, rest) in _reached_ids(p, InputOracle(seed)):
        sem = semantic_emw(rest, nv, vol, cfg.input_domain) & set(p.nv)
        assert sem <= sets[cid], (pretty(p), cid, sem, sets[cid])


def test_brute_force_on_example(fig2):
    runs = region_paths(fig2.body.rest, flat_store(fig2.nv), flat_store(fig2.vol))
    assert len(runs) == 2
    assert semantic_emw(fig2.body.rest, flat_store(fig2.nv), flat_store(fig2.vol)) == FIG6
    for r in runs:
        assert {"b", "i", "x"} <= names(r.written)


def test_input_dependent_branch_count(fig2):
    assert input_dependent_branches(fig2) == 1


def test_analysis_report_shape(fig2):
    rep = analyze(instrument(fig2))
    assert rep["ok"]
    keys = {"checkpoint", "omega", "war", "emw", "emw_tainted", "must_write", "violations"}
    assert all(set(r) == keys for r in rep["regions"])
    assert [r["checkpoint"] for r in rep["regions"]] == [None, 0]
