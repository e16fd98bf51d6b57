import pytest
from hypothesis import given, strategies as st

from intermittent.harness import GenConfig, gen_program, gen_task_program
from intermittent.lang import (ArrIdx, Assign, BinOp, Checkpoint, Const, If, Input, ParseError,
                               Program, Seq, Skip, ToTask, ValidationError, Var, diagnostics,
                               parse, parse_any, parse_tasks, pretty, rd, seq, size, validate)


def kinds(exc: ValidationError):
    return {d.kind for d in exc.diagnostics}


def test_minimal_program_parses():
    p = parse("nv { x = 0 } vol {} main { skip }")
    assert p == Program({"x": 0}, {}, Skip(), {})


def test_declaration_blocks_are_optional():
    assert parse("main { skip }").body == Skip()


def test_undeclared_read_is_reported():
    with pytest.raises(ValidationError) as e:
        parse("nv { x = 0 } main { x := y }")
    assert kinds(e.value) == {"undeclared"}
    assert "y" in str(e.value)


def test_rd_of_array_expression():
    e = BinOp("+", Var("x"), ArrIdx("a", Var("j")))
    assert rd(e) == {"x", "a", "j"}


def test_reboot_in_source_is_a_placement_error():
    with pytest.raises(ValidationError) as e:
        parse("nv { x = 0 } main { reboot(3) }")
    assert kinds(e.value) == {"placement"}


def test_constant_index_out_of_bounds():
    with pytest.raises(ValidationError) as e:
        parse("nv { a[4] = {0, 0, 0, 0} } main { a[5] := 1 }")
    assert kinds(e.value) == {"bounds"}
    parse("nv { a[4] = {0, 0, 0, 0} } main { a[3] := 1 }")


def test_checkpoint_set_must_be_non_volatile():
    with pytest.raises(ValidationError):
        parse("nv { x = 0 } vol { t = 0 } main { checkpoint(t); x := 1 }")


def test_duplicate_declaration():
    with pytest.raises(ValidationError) as e:
        parse("nv { x = 0 } vol { x = 1 } main { skip }")
    assert "duplicate" in kinds(e.value)


def test_kind_mismatch():
    with pytest.raises(ValidationError) as e:
        parse("nv { a[2] = {0, 0}; x = 0 } main { x := a }")
    assert "kind-mismatch" in kinds(e.value)


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as e:
        parse("nv { x = 0 }\nmain { x := }")
    assert e.value.line == 2


def test_if_only_in_tail_position():
    with pytest.raises(ParseError):
        parse("nv { x = 0 } main { if (x > 0) { x := 1 } else { skip }; x := 2 }")


def test_totask_outside_task_program():
    with pytest.raises(ValidationError) as e:
        parse("nv { x = 0 } main { toTask(1) }")
    assert kinds(e.value) == {"placement"}


def test_input_and_checkpoint_syntax():
    p = parse("nv { i = 0; a[2] = {0, 0} } main { checkpoint(i, a); i := IN(); a[i] := IN() }")
    assert p.body == seq(Checkpoint(("a", "i")), Input("i"), Input("a", Var("i")))


def test_precedence():
    p = parse("nv { x = 0 } main { x := 1 + 2 * 3 }")
    assert p.body == Assign("x", BinOp("+", Const(1), BinOp("*", Const(2), Const(3))))


def test_task_program_parses(corpus):
    tp = corpus["swap_tasks"]
    assert set(tp.tasks) == {1, 2, 3}
    assert tp.tasks[2].omega == ("x", "y")
    assert tp.entry == 1
    assert "a" in tp.local_vol


def test_dangling_task_id():
    with pytest.raises(ValidationError) as e:
        parse_tasks("nv { x = 0 } task 1 () { x := 1; toTask(7) }")
    assert kinds(e.value) == {"label"}


def test_task_may_not_checkpoint():
    with pytest.raises(ValidationError):
        parse_tasks("nv { x = 0 } task 1 () { checkpoint(); x := 1 }")


def test_parse_any_dispatches(corpus):
    from intermittent.harness import corpus_text
    assert isinstance(parse_any(corpus_text("fig2")), Program)
    assert not isinstance(parse_any(corpus_text("swap_tasks")), Program)


def test_seq_rejects_branch_in_the_middle():
    from intermittent.lang import LangError
    with pytest.raises(LangError):
        seq(If(Const(True), Skip(), Skip()), Skip())


def test_size_counts_nodes(fig2):
    assert size(fig2.body) == 10  # instructions, branches excluded


def test_corpus_round_trips(corpus):
    for name, p in corpus.items():
        assert parse_any(pretty(p)) == p, name


@given(st.integers(0, 2**32 - 1))
def test_generated_programs_round_trip(seed):
    p = gen_program(GenConfig(seed=seed))
    assert diagnostics(p) == []
    assert parse(pretty(p)) == p


@given(st.integers(0, 2**32 - 1))
def test_generated_task_programs_round_trip(seed):
    tp = gen_task_program(GenConfig(seed=seed))
    validate(tp)
    assert parse_tasks(pretty(tp)) == tp


def test_seq_builder_shapes():
    assert seq() == Skip()
    assert seq(Skip()) == Skip()
    assert seq(Assign("x", Const(1)), ToTask(2)) == Seq(Assign("x", Const(1)), ToTask(2))
