"""Idempotent-region rewriting: cut every WAR dependence with an empty checkpoint."""
from __future__ import annotations

from ..lang import (Assign, AssignArr, Checkpoint, Command, If, Input, Program, Seq, Skip, Var,
                    iter_instrs, rd, seq)


class _Fresh:
    def __init__(self, taken: set[str]):
        self.taken = taken
        self.made: list[str] = []

    def __call__(self, hint: str) -> str:
        k = 0
        while f"{hint}_r{k}" in self.taken:
            k += 1
        name = f"{hint}_r{k}"
        self.taken.add(name)
        self.made.append(name)
        return name


def _names(p: Program) -> set[str]:
    out = set(p.nv) | set(p.vol)
    for i in iter_instrs(p.body):
        if hasattr(i, "name"):
            out.add(i.name)
    return out


def rewrite_ratchet(p: Program) -> Program:
    """Insert ``checkpoint()`` before each write that closes a WAR dependence.

    When the written location is also read by its own right-hand side the
    value is first computed into a fresh volatile temporary.
    """
    nv = p.nv_names
    fresh = _Fresh(_names(p))

    def go(c: Command, W: frozenset, R: frozenset) -> Command:
        if isinstance(c, If):
            R2 = R | rd(c.cond)
            return If(c.cond, go(c.then, W, R2), go(c.orelse, W, R2))
        head, rest = (c.first, c.rest) if isinstance(c, Seq) else (c, None)
        out, W, R = instr(head, W, R)
        if rest is None:
            return seq(*out) if len(out) > 1 else out[0]
        return seq(*out, go(rest, W, R))

    def instr(i, W, R):
        if isinstance(i, Checkpoint):
            return [i], frozenset(), frozenset()
        if isinstance(i, Assign) or (isinstance(i, Input) and i.index is None):
            x = i.name
            reads = rd(i.expr) if isinstance(i, Assign) else frozenset()
            R2 = R | reads
            if x not in nv or x not in R2:
                return [i], W | {x}, R2
            if x in W:
                return [i], W, R2
            if x not in reads:
                return [Checkpoint(), i], frozenset({x}), reads
            t = fresh(x)
            return ([Assign(t, i.expr), Checkpoint(), Assign(x, Var(t))],
                    frozenset({x}), frozenset({t}))
        if isinstance(i, (AssignArr, Input)):
            a = i.name
            reads = rd(i.index) | (rd(i.expr) if isinstance(i, AssignArr) else frozenset())
            R2 = R | reads
            if a not in nv or a not in R2:
                return [i], W | {a}, R2
            if a not in reads:
                return [Checkpoint(), i], frozenset({a}), reads
            y = fresh(f"{a}_idx")
            if isinstance(i, AssignArr):
                x = fresh(f"{a}_val")
                return ([Assign(y, i.index), Assign(x, i.expr), Checkpoint(),
                         AssignArr(a, Var(y), Var(x))], frozenset({a}), frozenset({x, y}))
            return ([Assign(y, i.index), Checkpoint(), Input(a, Var(y))],
                    frozenset({a}), frozenset({y}))
        return [i], W, R

    body = go(p.body, frozenset(), frozenset())
    vol = dict(p.vol)
    vol.update({t: 0 for t in fresh.made})
    return Program(dict(p.nv), vol, body, dict(p.blocks))


def strip_checkpoints(c: Command) -> Command:
    """Remove every checkpoint (a source program for the rewriting)."""
    if isinstance(c, If):
        return If(c.cond, strip_checkpoints(c.then), strip_checkpoints(c.orelse))
    if isinstance(c, Seq):
        rest = strip_checkpoints(c.rest)
        if isinstance(c.first, Checkpoint):
            return rest
        return Seq(c.first, rest)
    return Skip() if isinstance(c, Checkpoint) else c
