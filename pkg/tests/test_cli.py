import json
import subprocess
import sys

import pytest

from intermittent.cli import main

FIG5_SCHEDULE = [{"at": 7, "off": 4}]
FIG5_ORACLE = {"seed": 0, "domain": [0, 2], "overrides": {"3": 2, "14": 0}}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def fig5_files(tmp_path):
    s, o = tmp_path / "s.json", tmp_path / "o.json"
    s.write_text(json.dumps(FIG5_SCHEDULE))
    o.write_text(json.dumps(FIG5_ORACLE))
    return tmp_path, str(s), str(o)


def test_parse_round_trips(capsys):
    code, out, _ = run(capsys, "parse", "corpus:fig2")
    assert code == 0 and "checkpoint(" in out and "IN()" in out


def test_parse_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.imt"
    bad.write_text("nv { x = 0 }\nmain { x := }")
    code, _, err = run(capsys, "parse", str(bad))
    assert code == 2 and "2:" in err


def test_analyze_flags_uninstrumented_example(capsys):
    code, out, _ = run(capsys, "analyze", "corpus:fig2")
    assert code == 1
    rep = json.loads(out)
    region = next(r for r in rep["regions"] if r["checkpoint"] == 0)
    assert region["emw_tainted"] == ["w", "y", "z"]
    assert not rep["ok"]


def test_instrument_then_analyze(capsys, tmp_path):
    code, out, _ = run(capsys, "instrument", "corpus:fig2", "--policy", "war+emw-tainted")
    assert code == 0
    path = tmp_path / "inst.imt"
    path.write_text(out)
    code, out, _ = run(capsys, "analyze", str(path))
    assert code == 0 and json.loads(out)["ok"]


def test_run_and_verify_empty_schedule(capsys, tmp_path):
    trace = tmp_path / "t.jsonl"
    assert main(["run", "corpus:fig2", "--policy", "war+emw-tainted", "--schedule", "empty",
                 "-o", str(trace)]) == 0
    lines = trace.read_text().splitlines()
    assert json.loads(lines[0])["rule"] == "init"
    code, out, _ = run(capsys, "verify", "corpus:fig2", str(trace))
    assert code == 0 and json.loads(out)["holds"]


def test_verify_finds_the_walkthrough_bug(capsys, fig5_files):
    tmp, s, o = fig5_files
    trace = tmp / "t.jsonl"
    for policy, want in (("war-only", 1), ("war+emw-tainted", 0)):
        assert main(["run", "corpus:fig5", "--policy", policy, "--schedule", s, "--oracle", o,
                     "-o", str(trace)]) == 0
        code, out, _ = run(capsys, "verify", "corpus:fig5", str(trace))
        assert code == want
        if want:
            assert json.loads(out)["witness"]["location"] == "y"


def test_bisim(capsys, fig5_files):
    _, s, _ = fig5_files
    code, out, _ = run(capsys, "bisim", "corpus:swap", "--pair", "basic-redo", "--schedule", s)
    assert code == 0 and json.loads(out)["holds"]
    code, out, _ = run(capsys, "bisim", "corpus:swap_tasks", "--pair", "redo-task")
    assert code == 0


def test_fuzz_war_only_fails_with_witness(capsys):
    code, out, _ = run(capsys, "fuzz", "--cases", "100", "--schedules", "2",
                       "--policy", "war-only", "--no-shrink")
    assert code == 1
    rep = json.loads(out)
    fails = [c for c in rep["cases"] if c["verdict"] == "fail"]
    assert fails and all("witness" in c for c in fails)
    assert any(c["case"] == "regression:fig2b-rio" for c in fails)


def test_fuzz_output_is_reproducible(capsys):
    args = ("fuzz", "--cases", "8", "--schedules", "2", "--seed", "3", "--pair", "basic-undo")
    first = run(capsys, *args)
    second = run(capsys, *args)
    assert first[0] == 0 and first[1] == second[1]


def test_missing_file_and_bad_flag(capsys):
    assert run(capsys, "parse", "does-not-exist.imt")[0] == 2
    assert run(capsys, "run", "corpus:nope")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus", "corpus:fig2"])
    assert exc.value.code == 2


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "intermittent.cli", "analyze", "corpus:swap"],
                          capture_output=True, text=True)
    assert proc.returncode in (0, 1) and json.loads(proc.stdout)["regions"]
