"""Basic checkpoint semantics with schedule-driven power failures.

A checkpoint saves the non-volatile locations named by its set together
with the whole volatile store and the continuation. A power failure
resets volatile memory and replaces the command with ``reboot(n)``.
The reboot restores the saved locations and resumes at the checkpoint.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .continuous import ContConfig, StuckError, split, step_cont
from .lang import Checkpoint, Command, Program, Reboot, Skip
from .machine import (DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure,
                      FailureSchedule, Model, Trace, drive)
from .state import CHECKPOINT, REBOOT, Store, init_store, overwrite, reset_volatile, restrict


class CheckpointAtomicityError(RuntimeError):
    """A failure was scheduled during the (atomic) checkpoint step."""


@dataclass(frozen=True)
class Ckpt:
    nv: Store
    vol: Store
    cmd: Command


@dataclass(frozen=True)
class IntConfig:
    tau: int
    kappa: Ckpt
    nv: Store
    vol: Store
    cmd: Command

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        return self.nv, self.vol

    def erase(self) -> ContConfig:
        return ContConfig(self.tau, self.nv, self.vol, self.cmd)


def initial_int(p: Program, tau: int = 0) -> IntConfig:
    nv, vol = init_store(p.nv), init_store(p.vol)
    return IntConfig(tau, Ckpt({}, vol, p.body), nv, vol, p.body)


class BasicModel(Model):
    name = "basic"

    def __init__(self, program: Program, oracle, tau0: int = 0, atomic_checkpoint: bool = True,
                 reset_value: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0
        self.atomic_checkpoint = atomic_checkpoint
        self.reset_value = reset_value

    def initial(self) -> IntConfig:
        return initial_int(self.program, self.tau0)

    def failable(self, cfg: IntConfig) -> bool:
        head, _ = split(cfg.cmd) if not cfg.is_terminal() else (None, None)
        if head is None or isinstance(head, Reboot):
            return False
        return not isinstance(head, Checkpoint) or not self.atomic_checkpoint

    def step(self, cfg: IntConfig):
        head, rest = split(cfg.cmd)
        if isinstance(head, Reboot):
            k = cfg.kappa
            return (IntConfig(cfg.tau + head.n, k, overwrite(cfg.nv, k.nv), k.vol, k.cmd),
                    (REBOOT,), "Reboot")
        if isinstance(head, Checkpoint):
            k = Ckpt(restrict(cfg.nv, head.omega), cfg.vol, rest)
            return IntConfig(cfg.tau + 1, k, cfg.nv, cfg.vol, rest), (CHECKPOINT,), "CkPt"
        sigma, obs, rule = step_cont(cfg.erase(), self.oracle, self.program.blocks)
        return IntConfig(sigma.tau, cfg.kappa, sigma.nv, sigma.vol, sigma.cmd), obs, rule

    def power_fail(self, cfg: IntConfig, failure: Failure):
        kappa = cfg.kappa
        head, _ = split(cfg.cmd)
        if isinstance(head, Checkpoint):
            # torn two-phase checkpoint: new saved-N, stale V and continuation
            kappa = Ckpt(restrict(cfg.nv, head.omega), kappa.vol, kappa.cmd)
        return (IntConfig(cfg.tau + 1, kappa, cfg.nv, reset_volatile(cfg.vol, self.reset_value),
                          Reboot(failure.off)), (), "PowerFail")


def step_int(cfg: IntConfig, oracle, schedule: FailureSchedule, index: int,
             blocks: Mapping[str, Command] | None = None):
    """One step of the basic model; a failure due at ``index`` fires here.

    Returns ``(config', observations)``.
    """
    if cfg.is_terminal():
        raise StuckError("terminal configuration has no successor")
    model = BasicModel(Program({}, {}, cfg.cmd, dict(blocks or {})), oracle)
    f = schedule.due(index)
    if f is not None:
        head, _ = split(cfg.cmd)
        if isinstance(head, Checkpoint):
            raise CheckpointAtomicityError(f"failure at step {index} hits an atomic checkpoint")
        if model.failable(cfg):
            cfg2, obs, _ = model.power_fail(cfg, f)
            return cfg2, obs
    cfg2, obs, _ = model.step(cfg)
    return cfg2, obs


def run_int(p: Program, oracle, schedule: FailureSchedule = EMPTY_SCHEDULE,
            fuel: int = DEFAULT_FUEL, retry_cap: int = DEFAULT_RETRY_CAP,
            atomic_checkpoint: bool = True, tau0: int = 0):
    """Run to termination; returns ``(final config, observations, trace)``."""
    model = BasicModel(p, oracle, tau0, atomic_checkpoint)
    trace = drive(model, None, schedule, fuel, retry_cap)
    return trace.final, trace.observations(), trace


def nearest_reboot_state(trace: Trace) -> Store:
    """Non-volatile memory right after the latest reboot (initial memory if none)."""
    for s in reversed(trace.steps):
        if s.rule == "Reboot" or s.rule.endswith("-Reboot"):
            return s.config.memories()[0]
    return trace.initial.memories()[0]
