"""Static judgments over checkpoint regions.

Checkpoints are numbered in pre-order: the main body first, then each
labeled block in order. Within a sequence the head comes before the rest,
and a then-arm comes before its else-arm. Every walker here uses that
order, so the per-checkpoint results of different analyses line up. The
region before the first checkpoint of the main body is the *entry* region
(id ``None``). Its saved set is empty because the initial context saves
nothing.

Volatile locations are exempt from the WAR and tainted-write obligations,
because a reboot restores the whole volatile store from the checkpoint.
They are also never placed in a checkpoint set.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .lang import (Assign, AssignArr, Checkpoint, Command, Goto, If, Input, Program, Seq,
                   TaskProgram, ToTask, normalize_omega, pretty_instr, rd)

Sets = dict  # checkpoint id (None = entry region) -> frozenset of names
EMPTY: frozenset = frozenset()
POLICIES = ("war-only", "emw", "war+emw-tainted")


@dataclass(frozen=True)
class Violation:
    kind: str  # war | rio | local-uninit
    region: int | None
    instr: str
    missing: tuple[str, ...]

    def to_json(self) -> dict:
        return {"kind": self.kind, "region": self.region, "instr": self.instr,
                "missing": list(self.missing)}

    def __str__(self) -> str:
        where = "entry region" if self.region is None else f"region {self.region}"
        return f"{self.kind} in {where} at `{self.instr}`: missing {{{', '.join(self.missing)}}}"


def _roots(p: Program):
    yield "main", p.body
    yield from p.blocks.items()


class _Counter:
    def __init__(self):
        self.n = 0

    def next(self) -> int:
        k = self.n
        self.n += 1
        return k


def _head(c: Command):
    return (c.first, c.rest) if isinstance(c, Seq) else (c, None)


def _group(events: list[tuple]) -> list[Violation]:
    """One violation per (kind, region): the first instruction and every missing name."""
    out: dict[tuple, list] = {}
    for kind, region, instr, name in events:
        key = (kind, region)
        if key not in out:
            out[key] = [instr, set()]
        out[key][1].add(name)
    return [Violation(k[0], k[1], v[0], normalize_omega(v[1])) for k, v in out.items()]


# -- WAR checking ----------------------------------------------------------

def _war_walk(c, N, W, R, region, nv, local, ctr, events):
    while True:
        if isinstance(c, If):
            R = R | rd(c.cond)
            _war_walk(c.then, N, W, R, region, nv, local, ctr, events)
            _war_walk(c.orelse, N, W, R, region, nv, local, ctr, events)
            return
        i, rest = _head(c)
        if isinstance(i, Checkpoint):
            region, N, W, R = ctr.next(), frozenset(i.omega), EMPTY, EMPTY
        elif isinstance(i, (Assign, AssignArr, Input)):
            if isinstance(i, Assign):
                reads = rd(i.expr)
            elif isinstance(i, AssignArr):
                reads = rd(i.index) | rd(i.expr)
            else:
                reads = rd(i.index) if i.index is not None else EMPTY
            for name in reads & local - W:
                events.append(("local-uninit", region, pretty_instr(i), name))
            R = R | reads
            x = i.name
            scalar = isinstance(i, Assign) or (isinstance(i, Input) and i.index is None)
            if x in R and x in nv and x not in local:
                ok = x in N or (scalar and x in W)
                if not ok:
                    events.append(("war", region, pretty_instr(i), x))
            W = W | {x}
        if rest is None:
            return
        c = rest


def check_war(p: Program) -> list[Violation]:
    """Every non-volatile location read and later written in a region must be saved."""
    events: list = []
    ctr = _Counter()
    for _, body in _roots(p):
        _war_walk(body, EMPTY, EMPTY, EMPTY, None, p.nv_names, EMPTY, ctr, events)
    return _group(events)


def _dino_walk(c, N, W, R, nv, ctr, out, keep):
    while True:
        if isinstance(c, If):
            R = R | rd(c.cond)
            return (_dino_walk(c.then, N, W, R, nv, ctr, out, keep)
                    | _dino_walk(c.orelse, N, W, R, nv, ctr, out, keep))
        i, rest = _head(c)
        if isinstance(i, Checkpoint):
            k = ctr.next()
            start = frozenset(i.omega) if keep else EMPTY
            out[k] = _dino_walk(rest, start, EMPTY, EMPTY, nv, ctr, out, keep) if rest else start
            return N
        if isinstance(i, (Assign, AssignArr, Input)):
            if isinstance(i, Assign):
                R = R | rd(i.expr)
            elif isinstance(i, AssignArr):
                R = R | rd(i.index) | rd(i.expr)
            elif i.index is not None:
                R = R | rd(i.index)
            x = i.name
            scalar = isinstance(i, Assign) or (isinstance(i, Input) and i.index is None)
            if x in R and x in nv and not (scalar and x in W):
                N = N | {x}
            W = W | {x}
        if rest is None:
            return N
        c = rest


def war_sets(p: Program, keep_existing: bool = False) -> Sets:
    """Per-checkpoint WAR sets as computed by DINO-style collection."""
    out: Sets = {}
    ctr = _Counter()
    for name, body in _roots(p):
        entry = _dino_walk(body, EMPTY, EMPTY, EMPTY, p.nv_names, ctr, out, keep_existing)
        if name == "main":
            out[None] = entry
    return out


def collect_war_dino(p: Program, keep_existing: bool = False) -> Program:
    return fill_checkpoints(p, war_sets(p, keep_existing))


# -- must-write ------------------------------------------------------------

def must_write(c: Command, M0: Iterable[str] = EMPTY, nv: Iterable[str] | None = None) -> frozenset:
    """Locations written on every path from ``c`` to the next checkpoint.

    Array writes never count. A variable assignment counts only for
    non-volatile variables (all of them when ``nv`` is None). An input
    assignment always counts.
    """
    nvs = None if nv is None else frozenset(nv)
    M = frozenset(M0)
    while True:
        if isinstance(c, If):
            return must_write(c.then, M, nvs) & must_write(c.orelse, M, nvs)
        i, rest = _head(c)
        if isinstance(i, (Checkpoint, Goto, ToTask)):
            return M
        if isinstance(i, Assign) and (nvs is None or i.name in nvs):
            M = M | {i.name}
        elif isinstance(i, Input) and i.index is None:
            M = M | {i.name}
        if rest is None:
            return M
        c = rest


# -- RIO checking ----------------------------------------------------------

def taint_transfer(i, I: frozenset) -> frozenset:
    """Static input-dependence after an instruction under untainted control."""
    if isinstance(i, Assign):
        if I & rd(i.expr):
            return I | {i.name}
        return I - {i.name}
    if isinstance(i, AssignArr):
        if I & (rd(i.index) | rd(i.expr)):
            return I | {i.name}
        return I
    if isinstance(i, Input):
        return I | {i.name}
    if isinstance(i, Checkpoint):
        return EMPTY
    return I


def input_dependent_branches(p: Program) -> int:
    """Number of branches whose guard may depend on an input read in the same region."""
    def walk(c, I) -> int:
        while True:
            if isinstance(c, If):
                return int(bool(I & rd(c.cond))) + walk(c.then, I) + walk(c.orelse, I)
            i, rest = _head(c)
            I = taint_transfer(i, I)
            if rest is None:
                return 0
            c = rest

    return sum(walk(body, EMPTY) for _, body in _roots(p))


def _rio_walk(c, N, I, M, region, nv, exempt, ctr, events):
    """Untainted control: track I and M; only tainted array indices need N."""
    while True:
        if isinstance(c, If):
            if not (I & rd(c.cond)):
                _rio_walk(c.then, N, I, M, region, nv, exempt, ctr, events)
                _rio_walk(c.orelse, N, I, M, region, nv, exempt, ctr, events)
            else:
                M2 = must_write(c, M, nv)
                _rio_taint(c.then, N, M2, region, nv, exempt, ctr, events)
                _rio_taint(c.orelse, N, M2, region, nv, exempt, ctr, events)
            return
        i, rest = _head(c)
        if isinstance(i, Checkpoint):
            region, N, I, M = ctr.next(), frozenset(i.omega), EMPTY, EMPTY
        elif isinstance(i, (AssignArr, Input)) and not (isinstance(i, Input) and i.index is None):
            a = i.name
            if I & rd(i.index) and a in nv and a not in exempt and a not in N:
                events.append(("rio", region, pretty_instr(i), a))
            I = taint_transfer(i, I)
        elif isinstance(i, (Assign, Input)):
            I = taint_transfer(i, I)
            M = M | {i.name}
        if rest is None:
            return
        c = rest


def _rio_taint(c, N, M, region, nv, exempt, ctr, events):
    """Tainted control: every write must be covered by M (variables) or N."""
    while True:
        if isinstance(c, If):
            _rio_taint(c.then, N, M, region, nv, exempt, ctr, events)
            _rio_taint(c.orelse, N, M, region, nv, exempt, ctr, events)
            return
        i, rest = _head(c)
        if isinstance(i, Checkpoint):
            k = ctr.next()
            if rest is not None:
                _rio_walk(rest, frozenset(i.omega), EMPTY, EMPTY, k, nv, exempt, ctr, events)
            return
        if isinstance(i, (Assign, AssignArr, Input)):
            x = i.name
            scalar = isinstance(i, Assign) or (isinstance(i, Input) and i.index is None)
            if x in nv and x not in exempt:
                covered = (x in M or x in N) if scalar else x in N
                if not covered:
                    events.append(("rio", region, pretty_instr(i), x))
        if rest is None:
            return
        c = rest


def check_rio(p: Program) -> list[Violation]:
    """Locations that a repeated input could leave inconsistent must be saved."""
    events: list = []
    ctr = _Counter()
    for _, body in _roots(p):
        _rio_walk(body, EMPTY, EMPTY, EMPTY, None, p.nv_names, EMPTY, ctr, events)
    return _group(events)


# -- exclusive may-write collection ----------------------------------------

class _Emw:
    def __init__(self, optimized: bool):
        self.optimized = optimized
        self.ctr = _Counter()
        self.out: Sets = {}

    def region(self, rest):
        k = self.ctr.next()
        self.out[k] = self.clean(rest, EMPTY, EMPTY, EMPTY) if rest is not None else EMPTY

    def clean(self, c, X, M, I) -> frozenset:
        while True:
            if isinstance(c, If):
                if self.optimized and not (I & rd(c.cond)):
                    return self.clean(c.then, X, M, I) | self.clean(c.orelse, X, M, I)
                X1, M1 = self.tainted(c.then, X, M)
                X2, M2 = self.tainted(c.orelse, X, M)
                return (X1 | X2 | M1 | M2) - (M1 & M2)
            i, rest = _head(c)
            if isinstance(i, Checkpoint):
                self.region(rest)
                return X
            if isinstance(i, (AssignArr, Input)) and not (isinstance(i, Input) and i.index is None):
                if I & rd(i.index):
                    X = X | {i.name}
                I = taint_transfer(i, I)
            elif isinstance(i, (Assign, Input)):
                I = taint_transfer(i, I)
                M = M | {i.name}
            if rest is None:
                return X
            c = rest

    def tainted(self, c, X, M) -> tuple[frozenset, frozenset]:
        while True:
            if isinstance(c, If):
                X1, M1 = self.tainted(c.then, X, M)
                X2, M2 = self.tainted(c.orelse, X, M)
                return (X1 | X2 | M1 | M2) - (M1 & M2), M1 & M2
            i, rest = _head(c)
            if isinstance(i, Checkpoint):
                self.region(rest)
                return X, M
            if isinstance(i, Assign) or (isinstance(i, Input) and i.index is None):
                M = M | {i.name}
            elif isinstance(i, (AssignArr, Input)):
                X = X | {i.name}
            if rest is None:
                return X, M
            c = rest


def emw_sets(p: Program, taint_optimized: bool = True) -> Sets:
    """Per-checkpoint exclusive may-write sets (non-volatile names only)."""
    walker = _Emw(taint_optimized)
    nv = p.nv_names
    for name, body in _roots(p):
        entry = walker.clean(body, EMPTY, EMPTY, EMPTY)
        if name == "main":
            walker.out[None] = entry
    return {k: v & nv for k, v in walker.out.items()}


def collect_emw(p: Program, taint_optimized: bool = True) -> Program:
    return fill_checkpoints(p, emw_sets(p, taint_optimized))


# -- rewriting -------------------------------------------------------------

def checkpoint_omegas(p: Program) -> Sets:
    """The sets currently written at each checkpoint, by id."""
    out: Sets = {}
    ctr = _Counter()

    def walk(c):
        while True:
            if isinstance(c, If):
                walk(c.then)
                walk(c.orelse)
                return
            i, rest = _head(c)
            if isinstance(i, Checkpoint):
                out[ctr.next()] = frozenset(i.omega)
            if rest is None:
                return
            c = rest

    for _, body in _roots(p):
        walk(body)
    return out


def checkpoint_sites(p: Program) -> dict[int, int]:
    """Map ``id()`` of each command headed by a checkpoint to the checkpoint's id."""
    out: dict[int, int] = {}
    ctr = _Counter()

    def walk(c):
        while True:
            if isinstance(c, If):
                walk(c.then)
                walk(c.orelse)
                return
            i, rest = _head(c)
            if isinstance(i, Checkpoint):
                out[id(c)] = ctr.next()
            if rest is None:
                return
            c = rest

    for _, body in _roots(p):
        walk(body)
    return out


def fill_checkpoints(p: Program, omegas: Sets) -> Program:
    """Rewrite checkpoint ``k`` to save ``omegas[k]`` (missing ids are left alone)."""
    ctr = _Counter()

    def rebuild(c):
        if isinstance(c, If):
            return If(c.cond, rebuild(c.then), rebuild(c.orelse))
        i, rest = _head(c)
        if isinstance(i, Checkpoint):
            k = ctr.next()
            if k in omegas:
                i = Checkpoint(normalize_omega(omegas[k]))
        return i if rest is None else Seq(i, rebuild(rest))

    body = rebuild(p.body)
    blocks = {label: rebuild(b) for label, b in p.blocks.items()}
    return Program(dict(p.nv), dict(p.vol), body, blocks)


def policy_sets(p: Program, policy: str) -> Sets:
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")
    war = war_sets(p)
    if policy == "war-only":
        return war
    emw = emw_sets(p, taint_optimized=(policy == "war+emw-tainted"))
    return {k: war.get(k, EMPTY) | emw.get(k, EMPTY) for k in set(war) | set(emw)}


def instrument(p: Program, policy: str = "war+emw-tainted") -> Program:
    """Fill every checkpoint's set from scratch according to ``policy``."""
    return fill_checkpoints(p, policy_sets(p, policy))


# -- tasks -----------------------------------------------------------------

def check_task_program(p: TaskProgram) -> list[Violation]:
    """Per-task WAR and RIO obligations against the task's protected set.

    Task-local locations must be written before they are read. They are
    exempt from the saved-set obligations.
    """
    events: list = []
    nv = frozenset(p.shared) | frozenset(p.local_nv)
    local = p.locals
    for tid, task in p.tasks.items():
        N = frozenset(task.omega)
        ctr = _Counter()
        ev: list = []
        _war_walk(task.body, N, EMPTY, EMPTY, tid, nv, local, ctr, ev)
        _rio_walk(task.body, N, EMPTY, EMPTY, tid, nv, local, ctr, ev)
        events.extend(ev)
    return _group(events)


# -- report ----------------------------------------------------------------

def _sorted(s) -> list[str]:
    return sorted(s)


def analyze(p: Program) -> dict:
    """Machine-readable per-checkpoint analysis report."""
    war, emw, emw_t = war_sets(p), emw_sets(p, False), emw_sets(p, True)
    current = checkpoint_omegas(p)
    violations = check_war(p) + check_rio(p)
    regions = []
    ctr = _Counter()
    nv = p.nv_names

    def entry(region, rest):
        regions.append({
            "checkpoint": region,
            "omega": _sorted(current.get(region, EMPTY)) if region is not None else [],
            "war": _sorted(war.get(region, EMPTY)),
            "emw": _sorted(emw.get(region, EMPTY)),
            "emw_tainted": _sorted(emw_t.get(region, EMPTY)),
            "must_write": _sorted(must_write(rest, EMPTY, nv)) if rest is not None else [],
            "violations": [v.to_json() for v in violations if v.region == region],
        })

    def walk(c):
        while True:
            if isinstance(c, If):
                walk(c.then)
                walk(c.orelse)
                return
            i, rest = _head(c)
            if isinstance(i, Checkpoint):
                entry(ctr.next(), rest)
            if rest is None:
                return
            c = rest

    entry(None, p.body)
    for _, body in _roots(p):
        walk(body)
    return {"regions": regions, "ok": not violations}
