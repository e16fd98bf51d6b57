"""Continuously-powered small-step semantics with timestamps, inputs and taint."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

from .lang import (ARITH, EQUALITY, LOGIC, ORDER, ArrIdx, Assign, AssignArr, BinOp,
                   Checkpoint, Command, Const, Goto, If, Input, Program, Seq, Skip, Var)
from .machine import DEFAULT_FUEL, EMPTY_SCHEDULE, Model, Trace, drive
from .state import CHECKPOINT, In, Loc, Read, Store, Val, init_store


class EvalError(RuntimeError):
    """Runtime fault: type mismatch or out-of-bounds index (not a power failure)."""


class StuckError(RuntimeError):
    pass


@dataclass(frozen=True)
class InputOracle:
    """Deterministic map from timestamp to input value.

    Values come from ``domain`` by hashing ``(seed, tau)``; ``overrides``
    pins particular timestamps.
    """
    seed: int = 0
    domain: tuple[int, ...] = (0, 2)
    overrides: Mapping[int, int] = field(default_factory=dict)

    def __call__(self, tau: int) -> int:
        if tau in self.overrides:
            return self.overrides[tau]
        if len(self.domain) == 1:
            return self.domain[0]
        h = hashlib.blake2b(f"{self.seed}:{tau}".encode(), digest_size=8).digest()
        return self.domain[int.from_bytes(h, "big") % len(self.domain)]

    def __hash__(self) -> int:
        return hash((self.seed, self.domain, tuple(sorted(self.overrides.items()))))

    def with_overrides(self, extra: Mapping[int, int]) -> "InputOracle":
        return replace(self, overrides={**self.overrides, **extra})

    def to_json(self) -> dict:
        return {"seed": self.seed, "domain": list(self.domain),
                "overrides": {str(k): v for k, v in sorted(self.overrides.items())}}

    @classmethod
    def from_json(cls, obj: dict) -> "InputOracle":
        return cls(int(obj.get("seed", 0)), tuple(obj.get("domain", (0, 2))),
                   {int(k): int(v) for k, v in obj.get("overrides", {}).items()})


class ReplayOracle:
    """Oracle answering only recorded timestamps; anything else is an error."""

    def __init__(self, values: Mapping[int, int]):
        self.values = dict(values)

    def __call__(self, tau: int) -> int:
        try:
            return self.values[tau]
        except KeyError:
            raise LookupError(f"no recorded input at time {tau}") from None


Getter = Callable[[Loc], "Val | None"]


def _apply(op: str, a: Val, b: Val) -> int | bool:
    x, y = a.v, b.v
    if op in ARITH or op in ORDER:
        if isinstance(x, bool) or isinstance(y, bool):
            raise EvalError(f"boolean operand to {op}")
        if op == "+":
            return x + y
        if op == "-":
            return x - y
        if op == "*":
            return x * y
        if op == "<":
            return x < y
        if op == "<=":
            return x <= y
        if op == ">":
            return x > y
        return x >= y
    if op in EQUALITY:
        if isinstance(x, bool) != isinstance(y, bool):
            raise EvalError(f"mixed operand kinds to {op}")
        return (x == y) if op == "==" else (x != y)
    if op in LOGIC:
        if not (isinstance(x, bool) and isinstance(y, bool)):
            raise EvalError(f"non-boolean operand to {op}")
        return (x and y) if op == "&&" else (x or y)
    raise EvalError(f"unknown operator {op}")


def evaluate(e, get: Getter, reads: list) -> Val:
    """Evaluate ``e``, appending read observations to ``reads`` in order."""
    if isinstance(e, Const):
        return Val(e.value)
    if isinstance(e, Var):
        v = get(e.name)
        if v is None:
            raise EvalError(f"read of unknown location {e.name}")
        reads.append(Read(e.name, v))
        return v
    if isinstance(e, BinOp):
        a = evaluate(e.lhs, get, reads)
        b = evaluate(e.rhs, get, reads)
        return Val(_apply(e.op, a, b), None, a.tainted or b.tainted)
    if isinstance(e, ArrIdx):
        idx = evaluate(e.index, get, reads)
        cell = _cell(e.name, idx, lambda loc: get(loc) is not None)
        v = get(cell)
        reads.append(Read(cell, v))
        if idx.tainted and not v.tainted:
            v = Val(v.v, v.tau, True)
        return v
    raise TypeError(f"not an expression: {e!r}")


def _cell(name: str, idx: Val, exists) -> tuple:
    if isinstance(idx.v, bool):
        raise EvalError(f"boolean index into {name}")
    cell = (name, idx.v)
    if not exists(cell):
        raise EvalError(f"index {idx.v} out of bounds for {name}")
    return cell


def getter(*stores: Store) -> Getter:
    if len(stores) == 2:
        a, b = stores
        return lambda loc: a.get(loc) or b.get(loc)
    return lambda loc: next((s[loc] for s in stores if loc in s), None)


def eval_expr(nv: Store, vol: Store, e) -> tuple[Val, list]:
    reads: list = []
    return evaluate(e, getter(nv, vol), reads), reads


def resolve_write(instr, get: Getter, tau: int, oracle, exists=None) -> tuple[Loc, Val, list, str]:
    """Target location, value and observations of a write instruction.

    Returns a rule tag: ``Assign``, ``Assign-Arr``, ``In`` or ``In-Arr``.
    ``exists`` decides whether a target location is allocated; it defaults
    to "``get`` finds it".
    """
    if exists is None:
        exists = lambda loc: get(loc) is not None  # noqa: E731
    obs: list = []
    if isinstance(instr, Assign):
        val = evaluate(instr.expr, get, obs)
        if not exists(instr.name):
            raise EvalError(f"write to unknown location {instr.name}")
        return instr.name, val, obs, "Assign"
    if isinstance(instr, AssignArr):
        idx = evaluate(instr.index, get, obs)
        cell = _cell(instr.name, idx, exists)
        val = evaluate(instr.expr, get, obs)
        return cell, val, obs, "Assign-Arr"
    if isinstance(instr, Input):
        if instr.index is None:
            loc, tag = instr.name, "In"
            if not exists(loc):
                raise EvalError(f"write to unknown location {loc}")
        else:
            idx = evaluate(instr.index, get, obs)
            loc, tag = _cell(instr.name, idx, exists), "In-Arr"
        n = oracle(tau)
        obs.append(In(tau, n))
        return loc, Val(n, tau, True), obs, tag
    raise TypeError(f"not a write: {instr!r}")


WRITES = (Assign, AssignArr, Input)


def split(cmd: Command):
    """``(head instruction, rest)`` for a non-branch command."""
    if isinstance(cmd, Seq):
        return cmd.first, cmd.rest
    return cmd, Skip()


def is_terminal(cmd: Command) -> bool:
    return isinstance(cmd, Skip)


def branch(cond, get: Getter, cmd: If) -> tuple[Command, list, str]:
    obs: list = []
    g = evaluate(cond, get, obs)
    if not isinstance(g.v, bool):
        raise EvalError("branch guard is not boolean")
    return (cmd.then, obs, "If-T") if g.v else (cmd.orelse, obs, "If-F")


@dataclass(frozen=True)
class ContConfig:
    tau: int
    nv: Store
    vol: Store
    cmd: Command

    def is_terminal(self) -> bool:
        return isinstance(self.cmd, Skip)

    def memories(self):
        return self.nv, self.vol


def initial_cont(p: Program, tau: int = 0) -> ContConfig:
    return ContConfig(tau, init_store(p.nv), init_store(p.vol), p.body)


def step_cont(sigma: ContConfig, oracle, blocks: Mapping[str, Command] | None = None):
    """One small step: ``(sigma', observations, rule)``."""
    cmd, tau, nv, vol = sigma.cmd, sigma.tau, sigma.nv, sigma.vol
    if isinstance(cmd, If):
        nxt, obs, rule = branch(cmd.cond, getter(nv, vol), cmd)
        return ContConfig(tau + 1, nv, vol, nxt), tuple(obs), rule
    head, rest = split(cmd)
    if isinstance(head, Skip):
        if isinstance(cmd, Seq):
            return ContConfig(tau, nv, vol, rest), (), "Skip"
        raise StuckError("terminal configuration has no successor")
    if isinstance(head, WRITES):
        loc, val, obs, tag = resolve_write(head, getter(nv, vol), tau, oracle)
        if loc in nv:
            nv = {**nv, loc: val}
            tag = "NV-" + tag
        else:
            vol = {**vol, loc: val}
            tag = "V-" + tag
        return ContConfig(tau + 1, nv, vol, rest), tuple(obs), tag
    if isinstance(head, Checkpoint):
        return ContConfig(tau + 1, nv, vol, rest), (CHECKPOINT,), "CheckPoint"
    if isinstance(head, Goto):
        if blocks is None or head.label not in blocks:
            raise StuckError(f"goto {head.label}: no such label")
        return ContConfig(tau, nv, vol, blocks[head.label]), (), "Goto"
    raise StuckError(f"continuous semantics cannot execute {head!r}")


def sleep(sigma: ContConfig, tau: int) -> ContConfig:
    if tau <= sigma.tau:
        raise ValueError(f"sleep target {tau} is not after {sigma.tau}")
    return replace(sigma, tau=tau)


class ContinuousModel(Model):
    name = "continuous"

    def __init__(self, program: Program, oracle, tau0: int = 0):
        self.program, self.oracle, self.tau0 = program, oracle, tau0

    def initial(self) -> ContConfig:
        return initial_cont(self.program, self.tau0)

    def step(self, cfg):
        return step_cont(cfg, self.oracle, self.program.blocks)


def run_cont(sigma0: ContConfig | Program, oracle, fuel: int = DEFAULT_FUEL,
             blocks: Mapping[str, Command] | None = None) -> tuple[ContConfig, list]:
    """Run to termination; returns the final configuration and all observations."""
    trace = trace_cont(sigma0, oracle, fuel, blocks)
    return trace.final, trace.observations()


def trace_cont(sigma0: ContConfig | Program, oracle, fuel: int = DEFAULT_FUEL,
               blocks: Mapping[str, Command] | None = None) -> Trace:
    if isinstance(sigma0, Program):
        blocks = sigma0.blocks if blocks is None else blocks
        sigma0 = initial_cont(sigma0)
    model = ContinuousModel(Program({}, {}, sigma0.cmd, dict(blocks or {})), oracle)
    return drive(model, sigma0, EMPTY_SCHEDULE, fuel)
