"""Redo logging: buffer writes to checkpointed locations, commit at checkpoints."""
from __future__ import annotations

from dataclasses import dataclass

from ..continuous import WRITES, StuckError, branch, resolve_write, split
from ..lang import Checkpoint, Command, Goto, If, Program, Reboot, Skip
from ..machine import DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure, Model, drive
from ..state import CHECKPOINT, REBOOT, Store, base, init_store, overwrite, reset_volatile


@dataclass(frozen=True)
class RedoCtx:
    log: Store
    vol: Store
    cmd: Command
    omega: tuple[str, ...]


@dataclass(frozen=True)
class RedoConfig:
    tau: int
    kappa: RedoCtx
    nv: Store
    vol: Store
    cmd: Command

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        """Logical memory: non-volatile memory overlaid with the pending log."""
        return overwrite(self.nv, self.kappa.log), self.vol


def _overlay(nv: Store, log: Store, vol: Store):
    if not log:
        return lambda loc: nv.get(loc) or vol.get(loc)
    return lambda loc: log.get(loc) or nv.get(loc) or vol.get(loc)


class RedoModel(Model):
    name = "redo"

    def __init__(self, program: Program, oracle, tau0: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0

    def initial(self) -> RedoConfig:
        vol = init_store(self.program.vol)
        body = self.program.body
        return RedoConfig(self.tau0, RedoCtx({}, vol, body, ()), init_store(self.program.nv),
                          vol, body)

    def failable(self, cfg: RedoConfig) -> bool:
        if cfg.is_terminal():
            return False
        head, _ = split(cfg.cmd)
        return not isinstance(head, (Reboot, Checkpoint))

    def step(self, cfg: RedoConfig):
        k = cfg.kappa
        get = _overlay(cfg.nv, k.log, cfg.vol)
        if isinstance(cfg.cmd, If):
            nxt, obs, rule = branch(cfg.cmd.cond, get, cfg.cmd)
            return RedoConfig(cfg.tau + 1, k, cfg.nv, cfg.vol, nxt), tuple(obs), "RL-" + rule
        head, rest = split(cfg.cmd)
        if isinstance(head, Skip):
            if cfg.is_terminal():
                raise StuckError("terminal configuration has no successor")
            return RedoConfig(cfg.tau, k, cfg.nv, cfg.vol, rest), (), "RL-Skip"
        if isinstance(head, Reboot):
            return (RedoConfig(cfg.tau + head.n, RedoCtx({}, k.vol, k.cmd, k.omega), cfg.nv,
                               k.vol, k.cmd), (REBOOT,), "RL-Reboot")
        if isinstance(head, Checkpoint):
            ctx = RedoCtx({}, cfg.vol, rest, head.omega)
            return (RedoConfig(cfg.tau + 1, ctx, overwrite(cfg.nv, k.log), cfg.vol, rest),
                    (CHECKPOINT,), "RL-CheckPoint")
        if isinstance(head, Goto):
            blocks = self.program.blocks
            if head.label not in blocks:
                raise StuckError(f"goto {head.label}: no such label")
            return RedoConfig(cfg.tau, k, cfg.nv, cfg.vol, blocks[head.label]), (), "RL-Goto"
        if isinstance(head, WRITES):
            loc, val, obs, tag = resolve_write(head, get, cfg.tau, self.oracle)
            nv, vol = cfg.nv, cfg.vol
            if loc in nv:
                if base(loc) in k.omega:
                    k = RedoCtx({**k.log, loc: val}, k.vol, k.cmd, k.omega)
                    tag = "RL-NV-Log"
                else:
                    nv = {**nv, loc: val}
                    tag = "RL-NV-" + tag
            else:
                vol = {**vol, loc: val}
                tag = "RL-V-" + tag
            return RedoConfig(cfg.tau + 1, k, nv, vol, rest), tuple(obs), tag
        raise StuckError(f"redo semantics cannot execute {head!r}")

    def power_fail(self, cfg: RedoConfig, failure: Failure):
        return (RedoConfig(cfg.tau + 1, cfg.kappa, cfg.nv, reset_volatile(cfg.vol),
                           Reboot(failure.off)), (), "RL-PowerFail")


class MacroRedoModel(RedoModel):
    """Redo model where a ``goto`` and the checkpoint heading its block are one step.

    This lines the redo run up with a task transition.
    """

    def failable(self, cfg: RedoConfig) -> bool:
        if cfg.is_terminal():
            return False
        head, _ = split(cfg.cmd)
        return not isinstance(head, (Reboot, Checkpoint, Goto))

    def step(self, cfg: RedoConfig):
        head, _ = split(cfg.cmd)
        if not isinstance(head, Goto) or isinstance(cfg.cmd, If):
            return super().step(cfg)
        mid, obs1, _ = super().step(cfg)
        head2, _ = split(mid.cmd)
        if not isinstance(head2, Checkpoint):
            return mid, obs1, "RL-Goto"
        out, obs2, _ = super().step(mid)
        return out, obs1 + obs2, "RL-Goto+CheckPoint"


def run_redo(p: Program, oracle, schedule=EMPTY_SCHEDULE, fuel=DEFAULT_FUEL,
             retry_cap=DEFAULT_RETRY_CAP):
    return drive(RedoModel(p, oracle), None, schedule, fuel, retry_cap)


def step_redo(cfg: RedoConfig, oracle, schedule, index: int, program: Program | None = None):
    model = RedoModel(program or Program({}, {}, cfg.cmd), oracle)
    f = schedule.due(index)
    if f is not None and model.failable(cfg):
        return model.power_fail(cfg, f)[:2]
    return model.step(cfg)[:2]
