"""Just-in-time checkpointing.

The runtime detects low power and inserts an emergency checkpoint. If the
checkpoint completes, the reboot resumes at the exact point of failure.
If it does not, the system restarts from the initial state. Static
checkpoints in the program are not needed and behave like ``skip``.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..continuous import ContConfig, split, step_cont
from ..lang import Checkpoint, Command, Program, Reboot, Seq, Skip
from ..machine import DEFAULT_FUEL, DEFAULT_RETRY_CAP, EMPTY_SCHEDULE, Failure, Model, drive
from ..state import CHECKPOINT, REBOOT, Store, init_store


@dataclass(frozen=True)
class JitSuccess:
    vol: Store
    cmd: Command


JIT_FAIL = "fail"


@dataclass(frozen=True)
class JitConfig:
    tau: int
    kappa: object  # JitSuccess or JIT_FAIL
    nv: Store
    vol: Store
    cmd: Command
    pending: Failure | None = None  # set between PowerLow and the emergency checkpoint

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        return self.nv, self.vol


class JitModel(Model):
    name = "jit"

    def __init__(self, program: Program, oracle, tau0: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0
        self.nv0 = init_store(program.nv)
        self.vol0 = init_store(program.vol)

    def initial(self) -> JitConfig:
        return JitConfig(self.tau0, JIT_FAIL, self.nv0, self.vol0, self.program.body)

    def failable(self, cfg: JitConfig) -> bool:
        if cfg.is_terminal() or cfg.pending is not None:
            return False
        head, _ = split(cfg.cmd)
        return not isinstance(head, Reboot)

    def power_fail(self, cfg: JitConfig, failure: Failure):
        return (JitConfig(cfg.tau + 1, cfg.kappa, cfg.nv, cfg.vol, Seq(Checkpoint(), cfg.cmd),
                          failure), (), "JIT-LowPower")

    def step(self, cfg: JitConfig):
        head, rest = split(cfg.cmd)
        if cfg.pending is not None and isinstance(head, Checkpoint):
            f = cfg.pending
            if f.jit_fail:
                return (JitConfig(cfg.tau + 1, JIT_FAIL, cfg.nv, cfg.vol, Reboot(f.off)), (),
                        "JIT-CP-Fail")
            return (JitConfig(cfg.tau + 1, JitSuccess(cfg.vol, rest), cfg.nv, cfg.vol,
                              Reboot(f.off)), (CHECKPOINT,), "JIT-CP-Success")
        if isinstance(head, Reboot):
            k = cfg.kappa
            if isinstance(k, JitSuccess):
                return (JitConfig(cfg.tau + head.n, k, cfg.nv, k.vol, k.cmd), (REBOOT,),
                        "JIT-Restore")
            return (JitConfig(cfg.tau + head.n, k, self.nv0, self.vol0, self.program.body),
                    (REBOOT,), "JIT-Restart")
        sigma, obs, rule = step_cont(ContConfig(cfg.tau, cfg.nv, cfg.vol, cfg.cmd), self.oracle,
                                     self.program.blocks)
        return JitConfig(sigma.tau, cfg.kappa, sigma.nv, sigma.vol, sigma.cmd), obs, rule


def run_jit(p: Program, oracle, schedule=EMPTY_SCHEDULE, fuel=DEFAULT_FUEL,
            retry_cap=DEFAULT_RETRY_CAP):
    return drive(JitModel(p, oracle), None, schedule, fuel, retry_cap)


def step_jit(cfg: JitConfig, oracle, schedule, index: int, program: Program):
    model = JitModel(program, oracle)
    f = schedule.due(index)
    if f is not None and model.failable(cfg):
        return model.power_fail(cfg, f)[:2]
    return model.step(cfg)[:2]
