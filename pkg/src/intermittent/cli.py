"""Command-line entry point.

Exit codes: 0 when every check passes, 1 for verdict failures, 2 for usage,
input or I/O errors. Program arguments are file paths or ``corpus:NAME``
for the bundled examples.
"""
from __future__ import annotations

import argparse
import json
import sys

from .analysis import POLICIES, analyze, instrument
from .continuous import InputOracle
from .equiv import PAIRS, bisim_lockstep, check_correspondence, normalize_pair
from .harness import (CORRESPONDENCE_MODELS, MODELS, GenConfig, corpus_text, program_hash,
                      read_trace_records, run_campaign, run_model, schedule_for, make_model,
                      trace_from_records, write_trace)
from .lang import LangError, Program, TaskProgram, parse_any, pretty
from .machine import (DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, FailureSchedule,
                      FuelExhausted, ScheduleError)
from .variants.tasks import translate_tasks

OK, FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_program(arg: str) -> Program | TaskProgram:
    text = corpus_text(arg[7:]) if arg.startswith("corpus:") else open(arg).read()
    return parse_any(text)


def _checkpoint_program(arg: str) -> Program:
    p = load_program(arg)
    if isinstance(p, TaskProgram):
        raise UsageError(f"{arg} is a task program; this command needs a checkpoint program")
    return p


def _oracle(args) -> InputOracle:
    if args.oracle:
        if args.oracle_seed is not None:
            _warn("both --oracle and --oracle-seed given; using the oracle file")
        with open(args.oracle) as fh:
            return InputOracle.from_json(json.load(fh))
    return InputOracle(args.oracle_seed or 0, tuple(args.domain))


def _schedule(args, model) -> FailureSchedule:
    spec = args.schedule
    if spec not in (None, "empty") and not spec.startswith("seed:"):
        if args.schedule_seed is not None:
            _warn("both a schedule file and --schedule-seed given; using the file")
        with open(spec) as fh:
            return FailureSchedule.from_json(json.load(fh))
    seed, rate = args.schedule_seed, args.rate
    if spec and spec.startswith("seed:"):
        parts = spec.split(":")
        try:
            seed = int(parts[1])
            if len(parts) > 2:
                rate = float(parts[2])
        except (IndexError, ValueError):
            raise UsageError(f"bad schedule {spec!r}; expected seed:N or seed:N:RATE") from None
    if seed is None or spec == "empty":
        return EMPTY_SCHEDULE
    return schedule_for(model, seed, rate, args.fuel, jit_fail_rate=args.jit_fail_rate)


# -- subcommands -----------------------------------------------------------

def cmd_parse(args) -> int:
    p = load_program(args.program)
    _emit(pretty(p), args.out)
    return OK


def cmd_analyze(args) -> int:
    p = _checkpoint_program(args.program)
    report = analyze(p)
    _emit(_json(report), args.out)
    return OK if report["ok"] else FAILED


def cmd_instrument(args) -> int:
    p = _checkpoint_program(args.program)
    _emit(pretty(instrument(p, args.policy)), args.out)
    return OK


def _prepared(args):
    p = load_program(args.program)
    if getattr(args, "policy", None):
        if isinstance(p, TaskProgram):
            raise UsageError("--policy applies to checkpoint programs only")
        p = instrument(p, args.policy)
    return p


def cmd_run(args) -> int:
    p = _prepared(args)
    if (args.model == "task") != isinstance(p, TaskProgram):
        raise UsageError("the task model runs task programs; the others run checkpoint programs")
    oracle = _oracle(args)
    model = make_model(args.model, p, oracle)
    schedule = _schedule(args, model)
    try:
        trace = run_model(args.model, p, oracle, schedule, args.fuel, args.retry_cap)
    except FuelExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILED
    trace.meta.update(program=program_hash(p), policy=args.policy)
    if args.out:
        write_trace(args.out, trace)
    else:
        for rec in trace.to_records():
            sys.stdout.write(json.dumps(rec, sort_keys=True) + "\n")
    if trace.capped:
        _warn("retry cap reached; some scheduled failures were dropped")
    return OK


def cmd_verify(args) -> int:
    trace = trace_from_records(read_trace_records(args.trace))
    if args.policy is None and trace.meta.get("policy"):
        args.policy = trace.meta["policy"]
    p = _prepared(args)
    if trace.meta.get("program") and trace.meta["program"] != program_hash(p):
        _warn("trace was recorded for a different program")
    if isinstance(p, TaskProgram):
        p, _ = translate_tasks(p)
    oracle = InputOracle.from_json(trace.meta["oracle"]) if trace.meta.get("oracle") else None
    report, _ = check_correspondence(p, trace, oracle, args.fuel)
    _emit(_json({"model": trace.model, **report.to_json()}), args.out)
    return OK if report.holds else FAILED


def cmd_bisim(args) -> int:
    pair = normalize_pair(args.pair)
    p = _prepared(args)
    if (pair == "redo-task") != isinstance(p, TaskProgram):
        raise UsageError("redo-task needs a task program; the other pairs need checkpoint programs")
    oracle = _oracle(args)
    first = "task" if pair == "redo-task" else "basic"
    schedule = _schedule(args, make_model(first, p, oracle))
    report = bisim_lockstep(p, pair, oracle, schedule, args.fuel, args.retry_cap)
    _emit(_json({"pair": pair, "schedule": schedule.to_json(), **report.to_json()}), args.out)
    return OK if report.holds else FAILED


def cmd_fuzz(args) -> int:
    cfg = GenConfig(seed=args.seed, max_depth=args.depth, n_vars=args.vars,
                    n_arrays=args.arrays, n_inputs=args.inputs,
                    checkpoint_density=args.density, input_domain=tuple(args.domain))
    report = run_campaign(cfg, args.policy, args.model, args.cases, args.schedules, args.rate,
                          args.pair, include_corpus=not args.no_corpus,
                          shrink_failures=not args.no_shrink, fuel=args.fuel)
    doc = report.to_json()
    if not args.timings:
        for case in doc["cases"]:
            case.pop("millis", None)
    _emit(_json(doc), args.out)
    for f in report.failures:
        w = f.witness or {}
        where = "" if "location" not in w else f" witness {w['location']}"
        if "region" in w:
            where += " (entry region)" if w["region"] is None else f" (region {w['region']})"
        print(f"FAIL {f.case} {f.check} {f.policy or ''} {f.model or ''}:{where} {f.reason}",
              file=sys.stderr)
    print(f"summary: {json.dumps(report.summary())}", file=sys.stderr)
    return OK if report.ok else FAILED


# -- argument parsing ------------------------------------------------------

def _common_run(sp, policy=True):
    sp.add_argument("program", help="program file or corpus:NAME")
    if policy:
        sp.add_argument("--policy", choices=POLICIES,
                        help="instrument the program with this policy first")
    sp.add_argument("--schedule", default=None,
                    help="'empty', 'seed:N[:RATE]' or a JSON schedule file")
    sp.add_argument("--schedule-seed", type=int, help="random schedule seed")
    sp.add_argument("--rate", type=float, default=0.1, help="failure rate for random schedules")
    sp.add_argument("--jit-fail-rate", type=float, default=0.0,
                    help="probability that a JIT emergency checkpoint fails")
    sp.add_argument("--oracle-seed", type=int, help="input oracle seed (default 0)")
    sp.add_argument("--oracle", help="JSON input oracle file")
    sp.add_argument("--domain", type=int, nargs="+", default=[0, 2], help="input domain")
    sp.add_argument("--retry-cap", type=int, default=DEFAULT_RETRY_CAP)
    sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    sp.add_argument("-o", "--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intermittent",
                                 description="Checkpoint-based intermittent computing laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("parse", help="parse, validate and pretty-print a program")
    sp.add_argument("program")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("analyze", help="WAR, EMW and must-write sets and violations (JSON)")
    sp.add_argument("program")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("instrument", help="fill checkpoint sets according to a policy")
    sp.add_argument("program")
    sp.add_argument("--policy", choices=POLICIES, default="war+emw-tainted")
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_instrument)

    sp = sub.add_parser("run", help="execute a program and emit a JSON-lines trace")
    _common_run(sp)
    sp.add_argument("--model", choices=MODELS, default="basic")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify", help="check a trace against the correctness definition")
    sp.add_argument("program")
    sp.add_argument("trace")
    sp.add_argument("--policy", choices=POLICIES,
                    help="instrument the program first (default: the policy recorded in the trace)")
    sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bisim", help="lockstep bisimulation check between two models")
    _common_run(sp)
    sp.add_argument("--pair", required=True, help=f"one of {', '.join(PAIRS)}")
    sp.set_defaults(func=cmd_bisim)

    sp = sub.add_parser("fuzz", help="random campaign; emits a JSON campaign report")
    d = GenConfig()
    sp.add_argument("--cases", type=int, default=100)
    sp.add_argument("--schedules", type=int, default=10, help="schedules per program")
    sp.add_argument("--policy", action="append", choices=POLICIES,
                    help="instrumentation policy (repeatable; default war+emw-tainted)")
    sp.add_argument("--model", action="append", choices=CORRESPONDENCE_MODELS,
                    help="model checked for correspondence (repeatable; default basic)")
    sp.add_argument("--pair", action="append", default=[], help="bisimulation pair (repeatable)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rate", type=float, default=0.1)
    sp.add_argument("--depth", type=int, default=d.max_depth)
    sp.add_argument("--vars", type=int, default=d.n_vars)
    sp.add_argument("--arrays", type=int, default=d.n_arrays)
    sp.add_argument("--inputs", type=int, default=d.n_inputs)
    sp.add_argument("--density", type=float, default=d.checkpoint_density)
    sp.add_argument("--domain", type=int, nargs="+", default=list(d.input_domain))
    sp.add_argument("--no-corpus", action="store_true", help="skip the bundled corpus")
    sp.add_argument("--no-shrink", action="store_true", help="report failures unreduced")
    sp.add_argument("--timings", action="store_true",
                    help="include per-case timings (output is then not reproducible)")
    sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    sp.add_argument("-o", "--out")
    sp.set_defaults(func=cmd_fuzz)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "fuzz":
        args.policy = args.policy or ["war+emw-tainted"]
        args.model = args.model or ["basic"]
    try:
        return args.func(args)
    except (LangError, UsageError, ScheduleError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    raise SystemExit(main())
