"""Random programs and schedules, fuzz campaigns, the regression corpus and trace files."""
from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Callable, Iterable, Sequence

from .analysis import POLICIES, instrument
from .continuous import ContinuousModel, EvalError, InputOracle
from .equiv import RelationReport, bisim_lockstep, check_correspondence, normalize_pair
from .intermittent import BasicModel
from .lang import (ArrIdx, Assign, AssignArr, BinOp, Checkpoint, Command, Const, If, Input,
                   Program, Seq, Skip, Task, TaskProgram, ToTask, Var, diagnostics, parse_any,
                   pretty, seq)
from .machine import (DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure, FailureSchedule,
                      FuelExhausted, Model, Trace, TraceStep, drive)
from .state import CHECKPOINT, obs_from_json, store_from_json
from .variants.jit import JitModel
from .variants.redo import RedoModel
from .variants.tasks import TaskModel
from .variants.undo import UndoModel

# -- generation ------------------------------------------------------------


@dataclass(frozen=True)
class GenConfig:
    """Bounds for random programs. Each program draws its actual sizes below these."""
    seed: int = 0
    max_depth: int = 6
    n_vars: int = 8  # scalars, input holders included
    n_arrays: int = 2
    array_len: int = 3
    n_inputs: int = 3
    checkpoint_density: float = 0.15
    input_domain: tuple[int, ...] = (0, 2)
    volatile_frac: float = 0.25
    max_seq: int = 4

    def __post_init__(self):
        for name in ("max_depth", "n_vars", "n_arrays", "array_len", "n_inputs", "max_seq"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.input_domain:
            raise ValueError("input domain must not be empty")

    def with_seed(self, seed: int) -> "GenConfig":
        return replace(self, seed=seed)


_CMP = ("<", "<=", ">", ">=", "==", "!=")
_ARITH = ("+", "-", "*")


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random, holders: list[str], scalars: list[str],
                 arrays: list[str], arr_len: int, inputs: int, extra_reads: Sequence[str] = ()):
        self.cfg, self.rng = cfg, rng
        self.holders, self.scalars, self.arrays = holders, scalars, arrays
        self.arr_len = arr_len
        self.inputs_left = inputs
        self.readable = list(scalars) + list(holders) + list(extra_reads)

    def index(self):
        if self.holders and self.rng.random() < 0.35:
            return Var(self.rng.choice(self.holders))
        return Const(self.rng.randrange(self.arr_len))

    def expr(self, depth: int = 2):
        r = self.rng.random()
        if depth > 0 and r < 0.35:
            return BinOp(self.rng.choice(_ARITH), self.expr(depth - 1), self.expr(depth - 1))
        if self.arrays and r < 0.5:
            return ArrIdx(self.rng.choice(self.arrays), self.index())
        if r < 0.85 and self.readable:
            return Var(self.rng.choice(self.readable))
        return Const(self.rng.randint(0, 3))

    def guard(self):
        def cmp():
            left = (Var(self.rng.choice(self.holders))
                    if self.holders and self.rng.random() < 0.75 else self.expr(1))
            return BinOp(self.rng.choice(_CMP), left, Const(self.rng.randint(0, 2)))
        g = cmp()
        if self.rng.random() < 0.2:
            g = BinOp(self.rng.choice(("&&", "||")), g, cmp())
        return g

    def instr(self):
        rng = self.rng
        r = rng.random()
        if self.inputs_left > 0 and self.holders and r < 0.3:
            self.inputs_left -= 1
            if self.arrays and rng.random() < 0.2:
                return Input(rng.choice(self.arrays), Const(rng.randrange(self.arr_len)))
            return Input(rng.choice(self.holders))
        if self.holders and r < 0.32:
            return Assign(rng.choice(self.holders), Const(rng.choice(self.cfg.input_domain)))
        if self.arrays and r < 0.52:
            return AssignArr(rng.choice(self.arrays), self.index(), self.expr())
        return Assign(rng.choice(self.scalars), self.expr())

    def cmd(self, depth: int, tail=None, density: float | None = None) -> Command:
        density = self.cfg.checkpoint_density if density is None else density
        parts: list = []
        for _ in range(self.rng.randint(1, max(1, self.cfg.max_seq))):
            if parts and self.rng.random() < density:
                parts.append(Checkpoint())
            parts.append(self.instr())
        if depth > 0 and self.rng.random() < 0.7:
            if self.rng.random() < density:
                parts.append(Checkpoint())
            if self.inputs_left > 0 and self.holders and self.rng.random() < 0.4:
                self.inputs_left -= 1
                parts.append(Input(self.rng.choice(self.holders)))
            parts.append(If(self.guard(), self.cmd(depth - 1, tail, density),
                            self.cmd(depth - 1, tail, density)))
        elif tail is not None:
            parts.append(tail)
        return seq(*parts)


def _count_inputs(c: Command) -> int:
    if isinstance(c, Seq):
        return _count_inputs(c.first) + _count_inputs(c.rest)
    if isinstance(c, If):
        return _count_inputs(c.then) + _count_inputs(c.orelse)
    return int(isinstance(c, Input))


def _layout(cfg: GenConfig, rng: random.Random):
    n_in = rng.randint(1, cfg.n_inputs) if cfg.n_inputs else 0
    n_holders = min(n_in, 2, max(cfg.n_vars - 1, 0))
    holders = [f"in{k}" for k in range(n_holders)]
    n_plain = max(1, rng.randint(1, max(1, cfg.n_vars - n_holders)))
    scalars = [f"v{k}" for k in range(n_plain)]
    arrays = [f"a{k}" for k in range(rng.randint(0, cfg.n_arrays))]
    arr_len = max(cfg.array_len, max(cfg.input_domain) + 1, 1)
    return n_in, holders, scalars, arrays, arr_len


def gen_program(cfg: GenConfig) -> Program:
    """A random validated program that starts with ``checkpoint()``.

    Input holders (``in0``, ``in1``) receive only ``IN()`` results or values
    from the input domain, so they are safe dynamic array indices.
    """
    rng = random.Random(cfg.seed)
    n_in, holders, scalars, arrays, arr_len = _layout(cfg, rng)
    depth = rng.randint(0, cfg.max_depth)
    g = _Gen(cfg, rng, holders, scalars, arrays, arr_len, n_in)
    lead = []
    if holders and rng.random() < 0.7:
        g.inputs_left -= 1
        lead.append(Input(holders[0]))
    body = seq(*lead, g.cmd(depth))
    if n_in and holders and _count_inputs(body) == 0:
        body = Seq(Input(holders[0]), body)
    body = Seq(Checkpoint(), body)
    vol_names = [s for s in scalars[1:] if rng.random() < cfg.volatile_frac]
    nv = {n: rng.randint(0, 3) for n in scalars if n not in vol_names}
    nv.update({h: cfg.input_domain[0] for h in holders})
    nv.update({a: tuple(rng.randint(0, 3) for _ in range(arr_len)) for a in arrays})
    vol = {n: 0 for n in vol_names}
    p = Program(nv, vol, body, {})
    assert not diagnostics(p), diagnostics(p)
    return p


def gen_task_program(cfg: GenConfig) -> TaskProgram:
    """A random task program. Tasks only move forward, so every run terminates.

    Every task writes its locals before anything else, which keeps reads of
    volatile locals well-formed.
    """
    rng = random.Random(cfg.seed)
    n_in, holders, scalars, arrays, arr_len = _layout(cfg, rng)
    local_vol, local_nv = ["t0"], (["l0"] if rng.random() < 0.5 else [])
    locals_ = local_vol + local_nv
    n_tasks = rng.randint(2, 3)
    g = _Gen(cfg, rng, holders, scalars, arrays, arr_len, n_in, extra_reads=())
    tasks: dict[int, Task] = {}
    shared_names = scalars + holders + arrays
    for tid in range(1, n_tasks + 1):
        inits = [Assign(name, g.expr(1)) for name in locals_]
        g.readable = scalars + holders + locals_
        tail = ToTask(rng.randint(tid + 1, n_tasks)) if tid < n_tasks else None
        body = g.cmd(rng.randint(0, min(cfg.max_depth, 2)), tail, density=0.0)
        omega = tuple(sorted(n for n in shared_names if rng.random() < 0.4))
        tasks[tid] = Task(omega, seq(*inits, body))
        g.readable = scalars + holders
    shared = {n: rng.randint(0, 3) for n in scalars}
    shared.update({h: cfg.input_domain[0] for h in holders})
    shared.update({a: tuple(rng.randint(0, 3) for _ in range(arr_len)) for a in arrays})
    return TaskProgram(shared, {n: 0 for n in local_nv}, {n: 0 for n in local_vol}, tasks, 1)


BOUNDARY_P = 0.25


def gen_schedule(step_bound: int, seed: int, rate: float, hot_steps: Iterable[int] = (),
                 max_off: int = 4, jit_fail_rate: float = 0.0) -> FailureSchedule:
    """Random failure schedule over steps ``0 .. step_bound-1``.

    Step 0 and ``hot_steps`` (typically the steps right after checkpoints)
    fail with probability at least ``BOUNDARY_P``.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("failure rate must lie in [0, 1]")
    if rate == 0.0:
        return EMPTY_SCHEDULE
    rng = random.Random(seed)
    hot = set(hot_steps) | {0}
    out = []
    for i in range(step_bound):
        p = max(rate, BOUNDARY_P) if i in hot else rate
        if rng.random() < p:
            out.append(Failure(i, rng.randint(1, max_off), rng.random() < jit_fail_rate))
    return FailureSchedule(tuple(out))


def schedule_for(model: Model, seed: int, rate: float, fuel: int = DEFAULT_FUEL,
                 jit_fail_rate: float = 0.0) -> FailureSchedule:
    """Schedule sized to ``model``'s failure-free run, hot right after its checkpoints."""
    clean = drive(model, None, EMPTY_SCHEDULE, fuel)
    hot = [s.index + 1 for s in clean.steps if CHECKPOINT in s.obs]
    return gen_schedule(3 * len(clean.steps) + 4, seed, rate, hot, jit_fail_rate=jit_fail_rate)


def derive_seed(base: int, *parts) -> int:
    h = hashlib.blake2b(":".join(map(str, (base,) + parts)).encode(), digest_size=4).digest()
    return int.from_bytes(h, "big")


def program_hash(p: Program | TaskProgram) -> str:
    return hashlib.sha256(pretty(p).encode()).hexdigest()[:16]


# -- corpus ----------------------------------------------------------------

def corpus_names() -> list[str]:
    root = resources.files("intermittent") / "corpus"
    return sorted(f.name[:-4] for f in root.iterdir() if f.name.endswith(".imt"))


def corpus_text(name: str) -> str:
    name = name[:-4] if name.endswith(".imt") else name
    return (resources.files("intermittent") / "corpus" / f"{name}.imt").read_text()


def load_corpus() -> dict[str, Program | TaskProgram]:
    return {n: parse_any(corpus_text(n)) for n in corpus_names()}


@dataclass(frozen=True)
class Regression:
    """A pinned scenario on a corpus program with its expected verdict."""
    name: str
    program: str
    policy: str
    schedule: FailureSchedule
    oracle: InputOracle
    expect: str  # "pass" | "fail"


def load_regressions() -> list[Regression]:
    raw = json.loads((resources.files("intermittent") / "corpus" / "regressions.json").read_text())
    return [Regression(r["name"], r["program"], r["policy"],
                       FailureSchedule.from_json(r["schedule"]), InputOracle.from_json(r["oracle"]),
                       r["expect"]) for r in raw]


# -- running ---------------------------------------------------------------

CORRESPONDENCE_MODELS = ("basic", "undo", "redo")
MODELS = ("continuous", "basic", "undo", "redo", "task", "jit")


def make_model(name: str, program, oracle) -> Model:
    if name == "continuous":
        return ContinuousModel(program, oracle)
    if name == "task":
        if not isinstance(program, TaskProgram):
            raise TypeError("the task model needs a task program")
        return TaskModel(program, oracle)
    if isinstance(program, TaskProgram):
        raise TypeError(f"the {name} model needs a checkpoint program")
    classes = {"basic": BasicModel, "undo": UndoModel, "redo": RedoModel, "jit": JitModel}
    if name not in classes:
        raise ValueError(f"unknown model {name!r}; expected one of {', '.join(MODELS)}")
    return classes[name](program, oracle)


def run_model(name: str, program, oracle, schedule=EMPTY_SCHEDULE, fuel: int = DEFAULT_FUEL,
              retry_cap: int = DEFAULT_RETRY_CAP) -> Trace:
    trace = drive(make_model(name, program, oracle), None, schedule, fuel, retry_cap)
    trace.meta.update(schedule=schedule.to_json(), oracle=_oracle_json(oracle))
    return trace


def _oracle_json(oracle):
    return oracle.to_json() if hasattr(oracle, "to_json") else None


def verdict_of(report: RelationReport) -> str:
    if not report.holds:
        return "fail"
    return "capped" if report.capped else "pass"


def correspondence_case(program: Program, policy: str | None, model: str, schedule, oracle,
                        fuel: int = DEFAULT_FUEL) -> tuple[RelationReport, Program]:
    """Instrument (unless ``policy`` is None), run and check one case."""
    prog = instrument(program, policy) if policy else program
    try:
        trace = run_model(model, prog, oracle, schedule, fuel)
        report, _ = check_correspondence(prog, trace, oracle, fuel)
    except (FuelExhausted, EvalError) as exc:
        report = RelationReport(False, None, None, f"{type(exc).__name__}: {exc}")
    return report, prog


# -- shrinking -------------------------------------------------------------

def _variants(c: Command):
    """Commands one removal smaller than ``c``."""
    if isinstance(c, Seq):
        yield c.rest
        if isinstance(c.rest, Skip):
            yield c.first
        for f in _variants(c.first) if isinstance(c.first, (Seq, If)) else ():
            yield Seq(f, c.rest)
        for r in _variants(c.rest):
            yield Seq(c.first, r)
    elif isinstance(c, If):
        yield c.then
        yield c.orelse
        for t in _variants(c.then):
            yield If(c.cond, t, c.orelse)
        for e in _variants(c.orelse):
            yield If(c.cond, c.then, e)
    elif not isinstance(c, Skip):
        yield Skip()


def shrink(program: Program, still_fails: Callable[[Program], bool], budget: int = 300) -> Program:
    """Greedy reduction: drop instructions or branches while ``still_fails`` holds."""
    current = program
    tries = 0
    progress = True
    while progress and tries < budget:
        progress = False
        for body in _variants(current.body):
            tries += 1
            if tries > budget:
                break
            cand = current.with_body(body)
            if diagnostics(cand):
                continue
            try:
                ok = still_fails(cand)
            except Exception:
                ok = False
            if ok:
                current, progress = cand, True
                break
    return current


# -- campaigns -------------------------------------------------------------

@dataclass
class CaseResult:
    case: str
    program_hash: str
    check: str  # "correspondence" or "bisim:<pair>"
    policy: str | None
    model: str | None
    program_seed: int | None
    schedule_seed: int | None
    oracle_seed: int
    verdict: str
    millis: float
    reason: str = ""
    witness: dict | None = None
    first_divergence: int | None = None
    program: str | None = None
    schedule: list | None = None
    shrunk: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None and v != ""}


@dataclass
class CampaignReport:
    settings: dict
    cases: list[CaseResult] = field(default_factory=list)

    @property
    def failures(self) -> list[CaseResult]:
        return [c for c in self.cases if c.verdict == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        out: dict[str, int] = {}
        for c in self.cases:
            out[c.verdict] = out.get(c.verdict, 0) + 1
        return dict(sorted(out.items()))

    def to_json(self) -> dict:
        return {"settings": self.settings, "summary": self.summary(),
                "cases": [c.to_json() for c in self.cases]}


def run_campaign(cfg: GenConfig, policies: Sequence[str] = ("war+emw-tainted",),
                 models: Sequence[str] = ("basic",), n_cases: int = 100,
                 schedules: int = 10, rate: float = 0.1, pairs: Sequence[str] = (),
                 include_corpus: bool = False, shrink_failures: bool = True,
                 fuel: int = DEFAULT_FUEL) -> CampaignReport:
    """Fuzz the correctness definition and the bisimulations.

    Case ``k`` uses program seed ``derive_seed(cfg.seed, k)``; schedule ``j``
    of that case uses ``derive_seed(program seed, j)``. Every result records
    these seeds, so :func:`replay` reproduces it exactly.
    """
    for pol in policies:
        if pol not in POLICIES:
            raise ValueError(f"unknown policy {pol!r}")
    for m in models:
        if m not in CORRESPONDENCE_MODELS:
            raise ValueError(f"model {m!r} cannot be checked for correspondence")
    pairs = [normalize_pair(p) for p in pairs]
    report = CampaignReport({"gen": asdict(cfg), "policies": list(policies), "models": list(models),
                             "cases": n_cases, "schedules": schedules, "rate": rate,
                             "pairs": pairs, "corpus": include_corpus})
    if not models and not pairs:
        return report
    if include_corpus and models:
        _corpus_cases(report, policies, models, schedules, rate, cfg.seed, fuel)
    for k in range(n_cases):
        pseed = derive_seed(cfg.seed, k)
        gcfg = cfg.with_seed(pseed)
        if models:
            program = gen_program(gcfg)
            for pol in policies:
                for model in models:
                    for j in range(schedules):
                        report.cases.append(_fuzz_case(f"fuzz:{k}", program, pol, model, pseed,
                                                       j, rate, gcfg, shrink_failures, fuel))
        for pair in pairs:
            for j in range(schedules):
                report.cases.append(_bisim_case(f"fuzz:{k}", gcfg, pol_for(policies), pair,
                                                pseed, j, rate, fuel))
    return report


def pol_for(policies: Sequence[str]) -> str:
    return policies[0] if policies else "war+emw-tainted"


def _fuzz_case(case, program, policy, model, pseed, j, rate, gcfg, shrink_failures, fuel):
    sseed = derive_seed(pseed, j)
    oracle = InputOracle(pseed, gcfg.input_domain)
    t0 = time.perf_counter()
    prog = instrument(program, policy)
    schedule = schedule_for(make_model(model, prog, oracle), sseed, rate, fuel)
    rep, _ = correspondence_case(program, policy, model, schedule, oracle, fuel)
    res = CaseResult(case, program_hash(program), "correspondence", policy, model, pseed, sseed,
                     pseed, verdict_of(rep), round((time.perf_counter() - t0) * 1000, 3),
                     rep.reason, rep.witness, rep.first_divergence)
    if res.verdict == "fail":
        res.program = pretty(program)
        res.schedule = schedule.to_json()
        if shrink_failures:
            small = shrink(program, lambda q: not correspondence_case(
                q, policy, model, schedule, oracle, fuel)[0].holds)
            res.shrunk = pretty(small)
    return res


def _bisim_case(case, gcfg, policy, pair, pseed, j, rate, fuel):
    sseed = derive_seed(pseed, "bisim", j)
    oracle = InputOracle(pseed, gcfg.input_domain)
    t0 = time.perf_counter()
    if pair == "redo-task":
        program = gen_task_program(gcfg)
        sched_model = TaskModel(program, oracle)
    else:
        program = instrument(gen_program(gcfg), policy)
        sched_model = BasicModel(program, oracle)
    schedule = schedule_for(sched_model, sseed, rate, fuel)
    rep = bisim_lockstep(program, pair, oracle, schedule, fuel)
    res = CaseResult(case, program_hash(program), f"bisim:{pair}", policy, None, pseed, sseed,
                     pseed, verdict_of(rep), round((time.perf_counter() - t0) * 1000, 3),
                     rep.reason, rep.witness, rep.first_divergence)
    if res.verdict == "fail":
        res.program, res.schedule = pretty(program), schedule.to_json()
    return res


def _corpus_cases(report, policies, models, schedules, rate, seed, fuel):
    corpus = load_corpus()
    for reg in load_regressions():
        if reg.policy not in policies:
            continue
        prog = corpus[reg.program]
        for model in models:
            t0 = time.perf_counter()
            rep, _ = correspondence_case(prog, reg.policy, model, reg.schedule, reg.oracle, fuel)
            res = CaseResult(f"regression:{reg.name}", program_hash(prog), "correspondence",
                             reg.policy, model, None, None, reg.oracle.seed, verdict_of(rep),
                             round((time.perf_counter() - t0) * 1000, 3), rep.reason, rep.witness,
                             rep.first_divergence)
            if res.verdict == "fail":
                res.program, res.schedule = pretty(prog), reg.schedule.to_json()
            report.cases.append(res)
    for name, prog in corpus.items():
        if isinstance(prog, TaskProgram):
            continue
        oseed = derive_seed(seed, name)
        oracle = InputOracle(oseed)
        for pol in policies:
            for model in models:
                for j in range(schedules):
                    sseed = derive_seed(oseed, j)
                    t0 = time.perf_counter()
                    inst = instrument(prog, pol)
                    schedule = schedule_for(make_model(model, inst, oracle), sseed, rate, fuel)
                    rep, _ = correspondence_case(prog, pol, model, schedule, oracle, fuel)
                    res = CaseResult(f"corpus:{name}", program_hash(prog), "correspondence", pol,
                                     model, None, sseed, oseed, verdict_of(rep),
                                     round((time.perf_counter() - t0) * 1000, 3), rep.reason,
                                     rep.witness, rep.first_divergence)
                    if res.verdict == "fail":
                        res.program, res.schedule = pretty(prog), schedule.to_json()
                    report.cases.append(res)


def replay(result: CaseResult, cfg: GenConfig, rate: float = 0.1,
           fuel: int = DEFAULT_FUEL) -> str:
    """Rerun one fuzzed campaign entry from its seeds and return the verdict."""
    if result.program_seed is None:
        raise ValueError("only generated cases can be replayed from seeds")
    gcfg = cfg.with_seed(result.program_seed)
    oracle = InputOracle(result.oracle_seed, gcfg.input_domain)
    if result.check == "correspondence":
        program = gen_program(gcfg)
        prog = instrument(program, result.policy)
        schedule = schedule_for(make_model(result.model, prog, oracle), result.schedule_seed,
                                rate, fuel)
        return verdict_of(correspondence_case(program, result.policy, result.model, schedule,
                                              oracle, fuel)[0])
    pair = result.check.split(":", 1)[1]
    if pair == "redo-task":
        program = gen_task_program(gcfg)
        sched_model = TaskModel(program, oracle)
    else:
        program = instrument(gen_program(gcfg), result.policy)
        sched_model = BasicModel(program, oracle)
    schedule = schedule_for(sched_model, result.schedule_seed, rate, fuel)
    return verdict_of(bisim_lockstep(program, pair, oracle, schedule, fuel))


# -- trace files -----------------------------------------------------------

def write_trace(path, trace: Trace) -> None:
    with open(path, "w") as fh:
        for rec in trace.to_records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_trace_records(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass(frozen=True)
class RecordedConfig:
    """A configuration rebuilt from a trace file (memories and time only)."""
    tau: int
    nv: dict
    vol: dict
    done: bool

    def memories(self):
        return self.nv, self.vol

    def is_terminal(self) -> bool:
        return self.done


def trace_from_records(records: Sequence[dict]) -> Trace:
    if not records or records[0].get("rule") != "init":
        raise ValueError("trace file must start with an init record")

    def cfg(rec):
        return RecordedConfig(rec["tau"], store_from_json(rec["nv"]), store_from_json(rec["v"]),
                              bool(rec.get("done")))

    first = records[0]
    trace = Trace(first["model"], cfg(first), meta=dict(first.get("meta", {})))
    for k, rec in enumerate(records[1:]):
        if rec["step"] != k + 1:
            raise ValueError(f"trace record {k + 1} is out of order")
        obs = tuple(obs_from_json(o) for o in rec["obs"])
        trace.steps.append(TraceStep(k, rec["rule"], cfg(rec), obs))
    return trace
