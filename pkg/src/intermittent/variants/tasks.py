"""Task-based execution and its translation to checkpoints plus gotos.

Memory is split three ways. Task-shared memory ``Ts`` is non-volatile.
Task-private memory ``Tp`` buffers the current task's writes to protected
shared locations. Task-local memory ``Tl`` comes in a non-volatile part and
a volatile part. A volatile local carries an initialized bit that a
power failure clears.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..continuous import WRITES, StuckError, branch, resolve_write, split
from ..lang import (Checkpoint, Command, Goto, If, Program, Reboot, Seq, Skip, TaskProgram,
                    ToTask, iter_instrs)
from ..machine import DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure, Model, drive
from ..state import CHECKPOINT, REBOOT, Store, base, init_store, overwrite, reset_volatile


class TaskWellFormednessError(RuntimeError):
    """A volatile task-local was read before being initialized."""


@dataclass(frozen=True)
class TaskConfig:
    tau: int
    task: int | None  # None: the boot pseudo-task that jumps to the entry task
    ts: Store
    tp: Store
    tl_nv: Store
    tl_v: Store
    ready: frozenset  # volatile locals whose initialized bit is 1
    cmd: Command

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        return {**overwrite(self.ts, self.tp), **self.tl_nv}, self.tl_v


class TaskModel(Model):
    name = "task"

    def __init__(self, program: TaskProgram, oracle, tau0: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0

    def task_body(self, task: int | None) -> Command:
        if task is None:
            return ToTask(self.program.entry)
        return self.program.tasks[task].body

    def task_omega(self, task: int | None) -> tuple[str, ...]:
        return () if task is None else self.program.tasks[task].omega

    def initial(self) -> TaskConfig:
        p = self.program
        return TaskConfig(self.tau0, None, init_store(p.shared), {}, init_store(p.local_nv),
                          init_store(p.local_vol), frozenset(), ToTask(p.entry))

    def failable(self, cfg: TaskConfig) -> bool:
        if cfg.is_terminal():
            return False
        head, _ = split(cfg.cmd)
        return not isinstance(head, (Reboot, ToTask))

    def _getter(self, cfg: TaskConfig):
        ts, tp, tl_nv, tl_v, ready = cfg.ts, cfg.tp, cfg.tl_nv, cfg.tl_v, cfg.ready

        def get(loc):
            v = tp.get(loc) or ts.get(loc) or tl_nv.get(loc)
            if v is not None:
                return v
            v = tl_v.get(loc)
            if v is not None and loc not in ready:
                raise TaskWellFormednessError(f"volatile local {loc!r} read before initialization")
            return v

        def exists(loc):
            return loc in ts or loc in tl_nv or loc in tl_v

        return get, exists

    def step(self, cfg: TaskConfig):
        get, exists = self._getter(cfg)
        if isinstance(cfg.cmd, If):
            nxt, obs, rule = branch(cfg.cmd.cond, get, cfg.cmd)
            return _with(cfg, tau=cfg.tau + 1, cmd=nxt), tuple(obs), "TSK-" + rule
        head, rest = split(cfg.cmd)
        if isinstance(head, Skip):
            if cfg.is_terminal():
                raise StuckError("terminal configuration has no successor")
            return _with(cfg, cmd=rest), (), "TSK-Skip"
        if isinstance(head, Reboot):
            return (_with(cfg, tau=cfg.tau + head.n, tp={}, cmd=self.task_body(cfg.task)),
                    (REBOOT,), "TSK-Reboot")
        if isinstance(head, ToTask):
            if head.task not in self.program.tasks:
                raise StuckError(f"toTask({head.task}) names no task")
            return (_with(cfg, tau=cfg.tau + 1, task=head.task, ts=overwrite(cfg.ts, cfg.tp),
                          tp={}, cmd=self.task_body(head.task)), (CHECKPOINT,), "TSK-Trans")
        if isinstance(head, WRITES):
            loc, val, obs, tag = resolve_write(head, get, cfg.tau, self.oracle, exists)
            if loc in cfg.ts:
                if base(loc) in self.task_omega(cfg.task):
                    new = _with(cfg, tp={**cfg.tp, loc: val})
                    tag = "TSK-Update-P"
                else:
                    new = _with(cfg, ts={**cfg.ts, loc: val})
                    tag = "TSK-Update-S"
            elif loc in cfg.tl_nv:
                new = _with(cfg, tl_nv={**cfg.tl_nv, loc: val})
                tag = "TSK-Update-L"
            else:
                new = _with(cfg, tl_v={**cfg.tl_v, loc: val}, ready=cfg.ready | {loc})
                tag = "TSK-Update-L"
            return _with(new, tau=cfg.tau + 1, cmd=rest), tuple(obs), tag
        raise StuckError(f"task semantics cannot execute {head!r}")

    def power_fail(self, cfg: TaskConfig, failure: Failure):
        return (_with(cfg, tau=cfg.tau + 1, tl_v=reset_volatile(cfg.tl_v), ready=frozenset(),
                      cmd=Reboot(failure.off)), (), "TSK-PowerFail")


def _with(cfg: TaskConfig, **kw) -> TaskConfig:
    d = dict(tau=cfg.tau, task=cfg.task, ts=cfg.ts, tp=cfg.tp, tl_nv=cfg.tl_nv, tl_v=cfg.tl_v,
             ready=cfg.ready, cmd=cfg.cmd)
    d.update(kw)
    return TaskConfig(**d)


def run_task(p: TaskProgram, oracle, schedule=EMPTY_SCHEDULE, fuel=DEFAULT_FUEL,
             retry_cap=DEFAULT_RETRY_CAP):
    return drive(TaskModel(p, oracle), None, schedule, fuel, retry_cap)


def step_task(cfg: TaskConfig, oracle, schedule, index: int, program: TaskProgram):
    model = TaskModel(program, oracle)
    f = schedule.due(index)
    if f is not None and model.failable(cfg):
        return model.power_fail(cfg, f)[:2]
    return model.step(cfg)[:2]


# -- translation -----------------------------------------------------------

def label(task: int) -> str:
    return f"L{task}" if task >= 0 else f"Lm{-task}"


@lru_cache(maxsize=65536)
def translate_cmd(c: Command) -> Command:
    """Replace every ``toTask(i)`` by ``goto L_i``; everything else is kept."""
    if isinstance(c, Seq):
        return Seq(translate_cmd(c.first), translate_cmd(c.rest))
    if isinstance(c, If):
        return If(c.cond, translate_cmd(c.then), translate_cmd(c.orelse))
    if isinstance(c, ToTask):
        return Goto(label(c.task))
    return c


def translate_tasks(p: TaskProgram) -> tuple[Program, str]:
    """Checkpoint program equivalent to ``p`` and the label of its entry block.

    Each task becomes a block ``L_i: checkpoint(omega_i); [[body_i]]``. The
    program body jumps to the entry block.
    """
    for task in p.tasks.values():
        for i in iter_instrs(task.body):
            if isinstance(i, ToTask) and i.task not in p.tasks:
                raise StuckError(f"dangling task id {i.task}")
    blocks = {label(tid): Seq(Checkpoint(t.omega), translate_cmd(t.body))
              for tid, t in p.tasks.items()}
    entry = label(p.entry)
    nv = {**p.shared, **p.local_nv}
    return Program(nv, dict(p.local_vol), Goto(entry), blocks), entry
