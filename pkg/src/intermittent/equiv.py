"""Observation relations, the correspondence check, memory relations and bisimulation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .continuous import (WRITES, ContConfig, EvalError, StuckError, branch, getter,
                         resolve_write, sleep, split, step_cont)
from .analysis import checkpoint_sites
from .intermittent import BasicModel
from .lang import Checkpoint, Command, Goto, If, Input, Program, Skip, TaskProgram, ToTask
from .machine import DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, FailureSchedule, Trace, _Pending
from .state import (CHECKPOINT, REBOOT, CheckpointObs, In, Read, RebootObs, Store, expansion,
                    format_obs, loc_str, overwrite, store_diff)
from .variants.redo import MacroRedoModel, RedoModel
from .variants.tasks import TaskModel, translate_cmd, translate_tasks
from .variants.undo import UndoModel


class SynthesisError(RuntimeError):
    """The recorded inputs do not suffice to build the continuous witness run."""


class InstanceTooLarge(RuntimeError):
    pass


@dataclass
class RelationReport:
    holds: bool
    first_divergence: int | None = None
    witness: dict | None = None
    reason: str = ""
    steps: int = 0
    capped: bool = False

    def __bool__(self) -> bool:
        return self.holds

    def to_json(self) -> dict:
        out = {"holds": self.holds, "steps": self.steps}
        if self.capped:
            out["capped"] = True
        if not self.holds:
            out.update(first_divergence=self.first_divergence, witness=self.witness,
                       reason=self.reason)
        return out


# -- observation relations -------------------------------------------------

def obs_leq_m(o1: Sequence, o2: Sequence) -> bool:
    """``o1 ≤ᵐ o2``: the part of o1 after its last reboot equals o2."""
    if any(isinstance(o, CheckpointObs) for o in o1):
        raise ValueError("left sequence may not contain checkpoint markers")
    if any(isinstance(o, (CheckpointObs, RebootObs)) for o in o2):
        raise ValueError("right sequence may not contain reboot or checkpoint markers")
    return list(_after_last_reboot(o1)) == list(o2)


def _after_last_reboot(o: Sequence) -> Sequence:
    for k in range(len(o) - 1, -1, -1):
        if isinstance(o[k], RebootObs):
            return o[k + 1:]
    return o


def segments(o: Sequence) -> list[list]:
    """Split at checkpoint markers."""
    out: list[list] = [[]]
    for x in o:
        if isinstance(x, CheckpointObs):
            out.append([])
        else:
            out[-1].append(x)
    return out


def final_attempts(o: Sequence) -> list[list]:
    return [list(_after_last_reboot(s)) for s in segments(o)]


def obs_leq_cm(o1: Sequence, o2: Sequence) -> bool:
    """``o1 ≤ᶜₘ o2``: each checkpoint segment's final attempt matches the next slice of o2.

    Each segment relates by ``≤ᵐ`` to an exact slice of o2 whose length is
    fixed by that segment's final attempt, so a greedy left-to-right split
    is the only candidate.
    """
    if any(isinstance(o, (CheckpointObs, RebootObs)) for o in o2):
        return False
    pos = 0
    o2 = list(o2)
    for tail in final_attempts(o1):
        if o2[pos:pos + len(tail)] != tail:
            return False
        pos += len(tail)
    return pos == len(o2)


# -- correspondence (the correctness definition on one trace) --------------

def _segment_index(trace: Trace):
    """For each step, the index of its checkpoint segment and whether it is a final attempt."""
    seg_of, last_reboot = [], {}
    seg = 0
    for s in trace.steps:
        seg_of.append(seg)
        if REBOOT in s.obs:
            last_reboot[seg] = s.index
        if CHECKPOINT in s.obs:
            seg += 1
    return seg_of, last_reboot


def check_correspondence(p: Program, trace: Trace, oracle=None, fuel: int = DEFAULT_FUEL):
    """Check one terminated intermittent trace against the correctness definition.

    A continuous witness run is built from the recorded final-attempt
    inputs. It starts at the beginning of the first segment's final attempt
    and sleeps so that every input happens at its recorded time. The result
    holds when the observation relation holds and both runs end in the same
    configuration. Returns ``(report, continuous trace or None)``.
    """
    final = trace.final
    if not final.is_terminal():
        raise SynthesisError("trace did not terminate")
    o1 = trace.observations()
    seg_of, last_reboot = _segment_index(trace)

    # inputs seen in final attempts, in order
    inputs: list[tuple[int, int]] = []
    for s in trace.steps:
        seg = seg_of[s.index]
        if seg in last_reboot and s.index <= last_reboot[seg]:
            continue
        for o in s.obs:
            if isinstance(o, In):
                value = o.value if o.value is not None else (oracle(o.tau) if oracle else None)
                if value is None:
                    raise SynthesisError(f"no value recorded for in({o.tau})")
                inputs.append((o.tau, value))

    tau2 = trace.initial.tau
    if 0 in last_reboot:
        tau2 = trace.steps[last_reboot[0]].config.tau
    nv0, v0 = trace.initial.memories()
    sigma = ContConfig(tau2, nv0, v0, p.body)
    cont = Trace("continuous", sigma, meta={"synthesized": True})
    o2: list = []
    queue = list(inputs)
    failure = None
    idx = 0
    try:
        while not sigma.is_terminal():
            if idx >= fuel:
                raise SynthesisError("continuous witness did not terminate")
            head = None if isinstance(sigma.cmd, If) else split(sigma.cmd)[0]
            if isinstance(head, Input):
                if not queue:
                    failure = "continuous run needs more inputs than the final attempts used"
                    break
                tau_i, value = queue.pop(0)
                if sigma.tau > tau_i:
                    failure = f"continuous run reaches in({tau_i}) too late (time {sigma.tau})"
                    break
                if sigma.tau < tau_i:
                    sigma = sleep(sigma, tau_i)
                    cont.steps.append(_ts(idx, "Sleep", sigma, ()))
                    idx += 1
                sigma, obs, rule = step_cont(sigma, _Const(value), p.blocks)
            else:
                sigma, obs, rule = step_cont(sigma, _NoInput(), p.blocks)
            cont.steps.append(_ts(idx, rule, sigma, obs))
            o2.extend(o for o in obs if not isinstance(o, CheckpointObs))
            idx += 1
    except (EvalError, StuckError) as exc:
        failure = f"continuous witness faulted: {exc}"
    if failure is None and queue:
        failure = "final attempts used inputs the continuous run never requested"
    if failure is None and sigma.tau < final.tau:
        sigma = sleep(sigma, final.tau)
        cont.steps.append(_ts(idx, "Sleep", sigma, ()))
    if failure is None and sigma.tau > final.tau:
        failure = f"continuous run ends later ({sigma.tau}) than the intermittent one ({final.tau})"

    steps = len(trace.steps)
    obs_ok = obs_leq_cm(o1, o2)
    fn, fv = final.memories()
    store_ok = failure is None and sigma.nv == fn and sigma.vol == fv and sigma.tau == final.tau
    if obs_ok and store_ok:
        return RelationReport(True, steps=steps, capped=trace.capped), cont
    witness, step = _witness(trace, o2, sigma, seg_of, last_reboot)
    loc = witness.pop("loc", None)
    if loc is not None and hasattr(trace.initial, "cmd"):
        # a read happens before the step's own write, so only earlier steps count
        upto = step if "observation" in witness else step + 1
        witness["region"] = _origin_region(p, trace, loc, upto)
    reason = failure or ("observations differ" if not obs_ok else "final configurations differ")
    return RelationReport(False, step, witness, reason, steps, trace.capped), cont


class _Const:
    def __init__(self, v):
        self.v = v

    def __call__(self, tau):
        return self.v


class _NoInput:
    def __call__(self, tau):
        raise SynthesisError("unexpected input request")


def _ts(idx, rule, cfg, obs):
    from .machine import TraceStep
    return TraceStep(idx, rule, cfg, tuple(obs))


def _witness(trace: Trace, o2: list, sigma: ContConfig, seg_of, last_reboot):
    """First point where the final attempts and the continuous witness disagree."""
    flat = []  # (step index, observation) over final attempts, checkpoints dropped
    for s in trace.steps:
        seg = seg_of[s.index]
        if seg in last_reboot and s.index <= last_reboot[seg]:
            continue
        flat.extend((s.index, o) for o in s.obs if not isinstance(o, CheckpointObs))
    for j, (step, o) in enumerate(flat):
        other = o2[j] if j < len(o2) else None
        if o != other:
            loc = o.loc if isinstance(o, Read) else (other.loc if isinstance(other, Read) else None)
            w = {"observation": j, "intermittent": str(o), "continuous": str(other) if other else None}
            if loc is not None:
                w["location"], w["loc"] = loc_str(loc), loc
            return w, step
    if len(o2) > len(flat):
        o = o2[len(flat)]
        w = {"observation": len(flat), "intermittent": None, "continuous": str(o)}
        if isinstance(o, Read):
            w["location"], w["loc"] = loc_str(o.loc), o.loc
        return w, len(trace.steps) - 1
    fn, fv = trace.final.memories()
    for mine, theirs in ((fn, sigma.nv), (fv, sigma.vol)):
        diff = store_diff(mine, theirs)
        if diff:
            loc = diff[0]
            return ({"location": loc_str(loc), "loc": loc, "intermittent": _show(mine.get(loc)),
                     "continuous": _show(theirs.get(loc))}, len(trace.steps) - 1)
    return {"tau": [trace.final.tau, sigma.tau]}, len(trace.steps) - 1


def _origin_region(p: Program, trace: Trace, loc, upto: int):
    """Checkpoint region of the write that produced ``loc``'s value at step ``upto``.

    ``None`` stands for the entry region. A reboot that restores ``loc``
    brings back the origin it had at the checkpoint. Without any such
    write, the region current at ``upto``.
    """
    sites = checkpoint_sites(p)
    configs = trace.configs()
    region = None
    origin = saved = _UNSET
    for s in trace.steps[:upto]:
        if CHECKPOINT in s.obs:
            region = sites.get(id(configs[s.index].cmd), region)
            saved = origin
        if _lookup(configs[s.index], loc) != _lookup(s.config, loc):
            origin = saved if REBOOT in s.obs else region
    return region if origin is _UNSET else origin


_UNSET = object()


def _lookup(cfg, loc):
    nv, vol = cfg.memories()
    v = nv.get(loc)
    return v if v is not None else vol.get(loc)


def _show(v):
    return None if v is None else v.to_json()


# -- must-write sets by exhaustive enumeration -----------------------------

@dataclass
class RegionRun:
    written: set = field(default_factory=set)
    first_written: set = field(default_factory=set)
    read: set = field(default_factory=set)
    inputs: tuple = ()


def region_runs(nv: Store, vol: Store, cmd: Command, domain: Iterable[int] = (0, 2),
                blocks=None, max_runs: int = 4096, max_steps: int = 10_000) -> list[RegionRun]:
    """Every continuous run from ``cmd`` to the next checkpoint (or the end).

    Each ``IN()`` branches over ``domain``. Locations are tracked per cell.
    """
    domain = tuple(domain)
    runs: list[RegionRun] = []

    def go(tau, nv, vol, cmd, run: RegionRun, steps):
        while True:
            if steps > max_steps:
                raise InstanceTooLarge("region too long to enumerate")
            if isinstance(cmd, Skip):
                break
            get = getter(nv, vol)
            if isinstance(cmd, If):
                obs: list = []
                cmd, obs, _ = branch(cmd.cond, get, cmd)
                _note_reads(run, obs)
                tau += 1
                steps += 1
                continue
            head, rest = split(cmd)
            if isinstance(head, (Checkpoint, Goto, ToTask)):
                break
            if isinstance(head, Input):
                for v in domain:
                    fork = RegionRun(set(run.written), set(run.first_written), set(run.read),
                                     run.inputs + (v,))
                    loc, val, obs, _ = resolve_write(head, get, tau, _Const(v))
                    _note_reads(fork, [o for o in obs if isinstance(o, Read)])
                    _note_write(fork, loc)
                    n2, v2 = _put(nv, vol, loc, val)
                    go(tau + 1, n2, v2, rest, fork, steps + 1)
                return
            if isinstance(head, WRITES):
                loc, val, obs, _ = resolve_write(head, get, tau, _NoInput())
                _note_reads(run, obs)
                _note_write(run, loc)
                nv, vol = _put(nv, vol, loc, val)
            cmd = rest
            tau += 1
            steps += 1
        runs.append(run)
        if len(runs) > max_runs:
            raise InstanceTooLarge(f"more than {max_runs} region runs")

    go(0, nv, vol, cmd, RegionRun(), 0)
    return runs


def _note_reads(run: RegionRun, obs):
    for o in obs:
        if isinstance(o, Read):
            run.read.add(o.loc)


def _note_write(run: RegionRun, loc):
    if loc not in run.read:
        run.first_written.add(loc)
    run.written.add(loc)


def _put(nv, vol, loc, val):
    if loc in nv:
        return {**nv, loc: val}, vol
    return nv, {**vol, loc: val}


def mst_wt(nv, vol, cmd, domain=(0, 2), blocks=None) -> frozenset:
    """Locations written by every run to the next checkpoint."""
    runs = region_runs(nv, vol, cmd, domain, blocks)
    return frozenset.intersection(*(frozenset(r.written) for r in runs))


def mfst_wt(nv, vol, cmd, domain=(0, 2), blocks=None) -> frozenset:
    """Locations written before being read by every run to the next checkpoint."""
    runs = region_runs(nv, vol, cmd, domain, blocks)
    return frozenset.intersection(*(frozenset(r.first_written) for r in runs))


def relation_initial_point(n_int: Store, n_cont: Store, ckpt: Store, n_rb: Store, vol: Store,
                           cmd: Command, domain=(0, 2)) -> RelationReport:
    """Stores at a region's start relate when every difference is saved or must-first-written."""
    diff = store_diff(n_int, n_cont)
    if not diff:
        return RelationReport(True)
    allowed = set(ckpt) | mfst_wt(n_rb, vol, cmd, domain)
    bad = [loc for loc in diff if loc not in allowed]
    if bad:
        return RelationReport(False, witness={"location": loc_str(bad[0])},
                              reason="difference neither checkpointed nor must-first-written")
    return RelationReport(True)


def relation_same_point(n_int: Store, n_cont: Store, region_start: tuple, here: tuple,
                        written: Iterable, domain=(0, 2)) -> RelationReport:
    """Stores at matching points inside a region relate.

    ``region_start`` is ``(N0, V0, c0)`` at the region's start and ``here``
    is ``(V, c)`` at the current point. Every difference must be
    must-first-written from the start, still must-written from here on,
    and not yet written along the way.
    """
    diff = store_diff(n_int, n_cont)
    if not diff:
        return RelationReport(True)
    n0, v0, c0 = region_start
    vol, cmd = here
    first = mfst_wt(n0, v0, c0, domain)
    still = mst_wt(n_int, vol, cmd, domain)
    done = set(written)
    for loc in diff:
        if loc not in first or loc not in still or loc in done:
            return RelationReport(False, witness={"location": loc_str(loc)},
                                  reason="difference not covered by must-first-write")
    return RelationReport(True)


# -- lockstep bisimulation -------------------------------------------------

PAIRS = ("basic-undo", "basic-redo", "redo-task")


def normalize_pair(pair: str) -> str:
    p = pair.replace("↔", "-").replace("<->", "-").replace(":", "-").strip().lower()
    if p not in PAIRS:
        raise ValueError(f"unknown pair {pair!r}; expected one of {', '.join(PAIRS)}")
    return p


def _rel_basic_undo(b, u, _m) -> str | None:
    if b.tau != u.tau or b.cmd != u.cmd:
        return "time or command differs"
    if b.nv != u.nv or b.vol != u.vol:
        return "memories differ"
    k = u.kappa
    if b.kappa.vol != k.vol or b.kappa.cmd != k.cmd:
        return "saved volatile memory or continuation differs"
    saved = b.kappa.nv
    cover = expansion(u.nv, k.omega)
    if set(saved) != cover:
        return "checkpointed locations differ"
    if set(k.log) != k.logged or not k.logged <= cover:
        return "log domain is not the logged set inside the checkpointed set"
    for loc in k.logged:
        if k.log[loc] != saved[loc]:
            return f"log entry for {loc_str(loc)} is not the checkpointed value"
    for loc in cover - k.logged:
        if u.nv[loc] != saved[loc]:
            return f"unlogged {loc_str(loc)} changed since the checkpoint"
    return None


def _rel_basic_redo(b, r, _m) -> str | None:
    if b.tau != r.tau or b.cmd != r.cmd:
        return "time or command differs"
    if b.vol != r.vol:
        return "volatile memories differ"
    k = r.kappa
    if b.kappa.vol != k.vol or b.kappa.cmd != k.cmd:
        return "saved volatile memory or continuation differs"
    cover = expansion(r.nv, k.omega)
    if set(b.kappa.nv) != cover:
        return "checkpointed locations differ"
    if not set(k.log) <= cover:
        return "log holds an unprotected location"
    if b.nv != overwrite(r.nv, k.log):
        return "basic memory is not redo memory overlaid with the log"
    for loc in cover:
        if r.nv[loc] != b.kappa.nv[loc]:
            return f"committed {loc_str(loc)} differs from the checkpointed value"
    return None


def _rel_redo_task(r, t, tm: TaskModel) -> str | None:
    if r.tau != t.tau:
        return "time differs"
    k = r.kappa
    if t.tp != k.log:
        return "task-private memory differs from the redo log"
    if r.nv != {**t.ts, **t.tl_nv}:
        return "redo memory differs from shared plus non-volatile local memory"
    for loc in t.ready:
        if r.vol.get(loc) != t.tl_v.get(loc):
            return f"initialized local {loc_str(loc)} differs"
    if k.omega != tm.task_omega(t.task):
        return "protected sets differ"
    if translate_cmd(t.cmd) != r.cmd:
        return "commands differ after translation"
    if translate_cmd(tm.task_body(t.task)) != k.cmd:
        return "restart points differ"
    return None


def _models(program, pair: str, oracle):
    if pair == "basic-undo":
        return BasicModel(program, oracle), UndoModel(program, oracle), _rel_basic_undo
    if pair == "basic-redo":
        return BasicModel(program, oracle), RedoModel(program, oracle), _rel_basic_redo
    if not isinstance(program, TaskProgram):
        raise TypeError("redo-task needs a task program")
    translated, _ = translate_tasks(program)
    return MacroRedoModel(translated, oracle), TaskModel(program, oracle), _rel_redo_task


def bisim_lockstep(program, pair: str, oracle, schedule: FailureSchedule = EMPTY_SCHEDULE,
                   fuel: int = DEFAULT_FUEL, retry_cap: int = DEFAULT_RETRY_CAP) -> RelationReport:
    """Run two models side by side and check their relation after every step."""
    pair = normalize_pair(pair)
    m1, m2, rel = _models(program, pair, oracle)
    c1, c2 = m1.initial(), m2.initial()
    bad = rel(c1, c2, m2)
    if bad:
        return RelationReport(False, 0, {"relation": bad}, bad)
    pending = _Pending(schedule, retry_cap)
    idx = 0
    while True:
        t1, t2 = m1.terminal(c1), m2.terminal(c2)
        if t1 or t2:
            if t1 != t2:
                return RelationReport(False, idx, {"terminated": [t1, t2]}, "one model ended early", idx)
            break
        if idx >= fuel:
            return RelationReport(False, idx, None, "fuel exhausted", idx)
        due = pending.due(idx)
        f1, f2 = m1.failable(c1), m2.failable(c2)
        if due and f1 != f2 and pending.in_region < pending.cap:
            return RelationReport(False, idx, {"failable": [f1, f2]},
                                  "schedule alignment impossible", idx)
        failure = pending.take(idx, due and f1)
        if failure is not None:
            c1, o1, r1 = m1.power_fail(c1, failure)
            c2, o2, r2 = m2.power_fail(c2, failure)
        else:
            c1, o1, r1 = m1.step(c1)
            c2, o2, r2 = m2.step(c2)
        if o1 != o2:
            return RelationReport(False, idx, {"observations": [format_obs(o1), format_obs(o2)],
                                               "rules": [r1, r2]}, "observations differ", idx)
        pending.observe(o1)
        bad = rel(c1, c2, m2)
        if bad:
            return RelationReport(False, idx, {"relation": bad, "rules": [r1, r2]}, bad, idx)
        idx += 1
    return RelationReport(True, steps=idx, capped=pending.capped)
