"""Undo logging: log a checkpointed location's old value before its first write."""
from __future__ import annotations

from dataclasses import dataclass

from ..continuous import ContConfig, WRITES, branch, getter, resolve_write, split, step_cont
from ..lang import Checkpoint, Command, If, Program, Reboot, Skip
from ..machine import DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure, Model, drive
from ..state import CHECKPOINT, REBOOT, Store, base, init_store, overwrite, reset_volatile


@dataclass(frozen=True)
class UndoCtx:
    log: Store
    vol: Store
    cmd: Command
    omega: tuple[str, ...]
    logged: frozenset


@dataclass(frozen=True)
class UndoConfig:
    tau: int
    kappa: UndoCtx
    nv: Store
    vol: Store
    cmd: Command

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        return self.nv, self.vol


class UndoModel(Model):
    name = "undo"

    def __init__(self, program: Program, oracle, tau0: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0

    def initial(self) -> UndoConfig:
        vol = init_store(self.program.vol)
        body = self.program.body
        return UndoConfig(self.tau0, UndoCtx({}, vol, body, (), frozenset()),
                          init_store(self.program.nv), vol, body)

    def failable(self, cfg: UndoConfig) -> bool:
        if cfg.is_terminal():
            return False
        head, _ = split(cfg.cmd)
        return not isinstance(head, (Reboot, Checkpoint))

    def step(self, cfg: UndoConfig):
        k = cfg.kappa
        if isinstance(cfg.cmd, If):
            nxt, obs, rule = branch(cfg.cmd.cond, getter(cfg.nv, cfg.vol), cfg.cmd)
            return UndoConfig(cfg.tau + 1, k, cfg.nv, cfg.vol, nxt), tuple(obs), rule
        head, rest = split(cfg.cmd)
        if isinstance(head, Reboot):
            ctx = UndoCtx({}, k.vol, k.cmd, k.omega, frozenset())
            return (UndoConfig(cfg.tau + head.n, ctx, overwrite(cfg.nv, k.log), k.vol, k.cmd),
                    (REBOOT,), "UL-Reboot")
        if isinstance(head, Checkpoint):
            ctx = UndoCtx({}, cfg.vol, rest, head.omega, frozenset())
            return UndoConfig(cfg.tau + 1, ctx, cfg.nv, cfg.vol, rest), (CHECKPOINT,), "UL-Commit"
        if isinstance(head, WRITES):
            loc, val, obs, tag = resolve_write(head, getter(cfg.nv, cfg.vol), cfg.tau, self.oracle)
            nv, vol = cfg.nv, cfg.vol
            if loc in nv:
                if base(loc) in k.omega and loc not in k.logged:
                    k = UndoCtx({**k.log, loc: nv[loc]}, k.vol, k.cmd, k.omega, k.logged | {loc})
                    tag = "UL-NV-Log" if isinstance(loc, str) else "UL-Arr-Log"
                else:
                    tag = "UL-NV-" + tag
                nv = {**nv, loc: val}
            else:
                vol = {**vol, loc: val}
                tag = "UL-V-" + tag
            return UndoConfig(cfg.tau + 1, k, nv, vol, rest), tuple(obs), tag
        sigma, obs, rule = step_cont(ContConfig(cfg.tau, cfg.nv, cfg.vol, cfg.cmd), self.oracle,
                                     self.program.blocks)
        return UndoConfig(sigma.tau, k, sigma.nv, sigma.vol, sigma.cmd), obs, rule

    def power_fail(self, cfg: UndoConfig, failure: Failure):
        return (UndoConfig(cfg.tau + 1, cfg.kappa, cfg.nv, reset_volatile(cfg.vol),
                           Reboot(failure.off)), (), "UL-PowerFail")


def run_undo(p: Program, oracle, schedule=EMPTY_SCHEDULE, fuel=DEFAULT_FUEL,
             retry_cap=DEFAULT_RETRY_CAP):
    return drive(UndoModel(p, oracle), None, schedule, fuel, retry_cap)


def step_undo(cfg: UndoConfig, oracle, schedule, index: int, program: Program | None = None):
    model = UndoModel(program or Program({}, {}, cfg.cmd), oracle)
    f = schedule.due(index)
    if f is not None and model.failable(cfg):
        return model.power_fail(cfg, f)[:2]
    return model.step(cfg)[:2]
