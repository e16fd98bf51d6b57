"""Model-agnostic execution driver: failure schedules, traces and the run loop.

Each execution model (continuous, basic, undo, redo, task, JIT) implements the
small ``Model`` protocol. ``drive`` feeds it a failure schedule. A failure
that comes due while the model cannot fail (for example while a checkpoint
or reboot is pending) is deferred to the next step where it can. After
``retry_cap`` failures within one checkpoint region, further due failures
are dropped and the run is marked as capped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .state import CHECKPOINT, Obs, obs_to_json, store_to_json


class FuelExhausted(RuntimeError):
    pass


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Failure:
    at: int
    off: int = 1
    jit_fail: bool = False  # JIT only: the emergency checkpoint does not complete


@dataclass(frozen=True)
class FailureSchedule:
    failures: tuple[Failure, ...] = ()

    def __post_init__(self):
        prev = -1
        for f in self.failures:
            if f.at <= prev:
                raise ScheduleError("failure steps must be strictly increasing")
            if f.off < 1:
                raise ScheduleError("off-duration must be at least 1")
            prev = f.at

    @classmethod
    def of(cls, *pairs) -> "FailureSchedule":
        return cls(tuple(p if isinstance(p, Failure) else Failure(*p) for p in pairs))

    def __len__(self) -> int:
        return len(self.failures)

    def due(self, index: int) -> Failure | None:
        for f in self.failures:
            if f.at == index:
                return f
        return None

    def to_json(self) -> list:
        return [{"at": f.at, "off": f.off, **({"jit_fail": True} if f.jit_fail else {})}
                for f in self.failures]

    @classmethod
    def from_json(cls, obj: Sequence) -> "FailureSchedule":
        return cls(tuple(Failure(int(d["at"]), int(d.get("off", 1)), bool(d.get("jit_fail", False)))
                         for d in obj))


EMPTY_SCHEDULE = FailureSchedule()


@dataclass(frozen=True)
class TraceStep:
    index: int
    rule: str
    config: Any  # the configuration after this step
    obs: tuple


@dataclass
class Trace:
    model: str
    initial: Any
    steps: list[TraceStep] = field(default_factory=list)
    capped: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.steps[-1].config if self.steps else self.initial

    def observations(self) -> list[Obs]:
        return [o for s in self.steps for o in s.obs]

    def configs(self) -> list:
        return [self.initial] + [s.config for s in self.steps]

    def to_records(self) -> list[dict]:
        recs = [_record(0, self.model, "init", self.initial, (), self.meta)]
        for s in self.steps:
            recs.append(_record(s.index + 1, self.model, s.rule, s.config, s.obs))
        return recs


def _record(step: int, model: str, rule: str, cfg, obs, meta=None) -> dict:
    nv, v = cfg.memories()
    rec = {"step": step, "model": model, "tau": cfg.tau, "rule": rule,
           "obs": [obs_to_json(o) for o in obs], "nv": store_to_json(nv), "v": store_to_json(v)}
    if cfg.is_terminal():
        rec["done"] = True
    if meta:
        rec["meta"] = meta
    return rec


class Model:
    """Interface every execution model implements."""

    name = "model"

    def initial(self):
        raise NotImplementedError

    def terminal(self, cfg) -> bool:
        return cfg.is_terminal()

    def failable(self, cfg) -> bool:
        return False

    def step(self, cfg) -> tuple[Any, tuple, str]:
        raise NotImplementedError

    def power_fail(self, cfg, failure: Failure) -> tuple[Any, tuple, str]:
        raise NotImplementedError


DEFAULT_FUEL = 200_000
DEFAULT_RETRY_CAP = 8


class _Pending:
    """Cursor over a schedule implementing deferral and the retry cap."""

    def __init__(self, schedule: FailureSchedule, retry_cap: int):
        self.failures = schedule.failures
        self.p = 0
        self.cap = retry_cap
        self.in_region = 0
        self.capped = False

    def due(self, index: int) -> bool:
        return self.p < len(self.failures) and self.failures[self.p].at <= index

    def take(self, index: int, can_fail: bool) -> Failure | None:
        if not self.due(index):
            return None
        if self.in_region >= self.cap:
            while self.due(index):
                self.p += 1
            self.capped = True
            return None
        if not can_fail:
            return None
        f = self.failures[self.p]
        self.p += 1
        self.in_region += 1
        return f

    def observe(self, obs: tuple):
        if CHECKPOINT in obs:
            self.in_region = 0


def drive(model: Model, cfg=None, schedule: FailureSchedule = EMPTY_SCHEDULE,
          fuel: int = DEFAULT_FUEL, retry_cap: int = DEFAULT_RETRY_CAP) -> Trace:
    cfg = model.initial() if cfg is None else cfg
    trace = Trace(model.name, cfg)
    pending = _Pending(schedule, retry_cap)
    index = 0
    while not model.terminal(cfg):
        if index >= fuel:
            raise FuelExhausted(f"{model.name}: no termination within {fuel} steps")
        failure = pending.take(index, pending.due(index) and model.failable(cfg))
        if failure is not None:
            cfg, obs, rule = model.power_fail(cfg, failure)
        else:
            cfg, obs, rule = model.step(cfg)
        pending.observe(obs)
        trace.steps.append(TraceStep(index, rule, cfg, obs))
        index += 1
    trace.capped = pending.capped
    return trace
