"""AST, parser, pretty-printer and static validation for the modeling language.

Programs are loop-free trees. A sequence is a chain of ``Seq(instr, rest)``
nodes; an ``If`` may only end a sequence, and both arms run to the end of
the program. Labeled blocks (``Goto`` targets) only appear in programs
produced by task translation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Union

BINOPS = ("+", "-", "*", "<", "<=", ">", ">=", "==", "!=", "&&", "||")
ARITH = frozenset({"+", "-", "*"})
ORDER = frozenset({"<", "<=", ">", ">="})
EQUALITY = frozenset({"==", "!="})
LOGIC = frozenset({"&&", "||"})


class LangError(Exception):
    pass


class ParseError(LangError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg, self.line, self.col = msg, line, col


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # undeclared | duplicate | bounds | placement | kind-mismatch | label
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


class ValidationError(LangError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(map(str, diagnostics)))
        self.diagnostics = diagnostics


# -- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int | bool


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class ArrIdx:
    name: str
    index: "Expr"


Expr = Union[Var, Const, BinOp, ArrIdx]


# -- instructions ----------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    name: str
    expr: Expr


@dataclass(frozen=True)
class AssignArr:
    name: str
    index: Expr
    expr: Expr


@dataclass(frozen=True)
class Input:
    """``x := IN()`` when index is None, else ``a[index] := IN()``."""
    name: str
    index: Expr | None = None


@dataclass(frozen=True)
class Checkpoint:
    omega: tuple[str, ...] = ()


@dataclass(frozen=True)
class Reboot:
    n: int


@dataclass(frozen=True)
class ToTask:
    task: int


@dataclass(frozen=True)
class Goto:
    label: str


Instr = Union[Skip, Assign, AssignArr, Input, Checkpoint, Reboot, ToTask, Goto]
INSTR_TYPES = (Skip, Assign, AssignArr, Input, Checkpoint, Reboot, ToTask, Goto)


# -- commands --------------------------------------------------------------

@dataclass(frozen=True)
class Seq:
    first: Instr
    rest: "Command"


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Command"
    orelse: "Command"


Command = Union[Instr, Seq, If]
SKIP = Skip()


def seq(*parts: Command) -> Command:
    """Chain instructions into a sequence; the last part may be any command."""
    if not parts:
        return SKIP
    *init, last = parts
    out = last
    for instr in reversed(init):
        if not isinstance(instr, INSTR_TYPES):
            raise LangError("only the last element of a sequence may be a branch")
        out = Seq(instr, out)
    return out


def normalize_omega(names) -> tuple[str, ...]:
    return tuple(sorted(set(names)))


# -- programs --------------------------------------------------------------

Decl = Union[int, bool, tuple]  # scalar initial value or tuple of cell values


@dataclass(frozen=True)
class Program:
    nv: dict[str, Decl]
    vol: dict[str, Decl]
    body: Command
    blocks: dict[str, Command] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((tuple(self.nv.items()), tuple(self.vol.items()), self.body,
                     tuple(self.blocks.items())))

    @property
    def arrays(self) -> dict[str, int]:
        out = {}
        for decls in (self.nv, self.vol):
            for k, v in decls.items():
                if isinstance(v, tuple):
                    out[k] = len(v)
        return out

    @property
    def nv_names(self) -> frozenset[str]:
        return frozenset(self.nv)

    @property
    def vol_names(self) -> frozenset[str]:
        return frozenset(self.vol)

    def with_body(self, body: Command, blocks: dict[str, Command] | None = None) -> "Program":
        return Program(dict(self.nv), dict(self.vol), body,
                       dict(self.blocks if blocks is None else blocks))


@dataclass(frozen=True)
class Task:
    omega: tuple[str, ...]
    body: Command


@dataclass(frozen=True)
class TaskProgram:
    """Shared NV memory, task-local NV and volatile memory, and a task map.

    Execution starts at the first task declared (``entry``).
    """
    shared: dict[str, Decl]
    local_nv: dict[str, Decl]
    local_vol: dict[str, Decl]
    tasks: dict[int, Task]
    entry: int

    def __hash__(self) -> int:
        return hash((tuple(self.shared.items()), tuple(self.local_nv.items()),
                     tuple(self.local_vol.items()), tuple(self.tasks.items()), self.entry))

    @property
    def arrays(self) -> dict[str, int]:
        out = {}
        for decls in (self.shared, self.local_nv, self.local_vol):
            for k, v in decls.items():
                if isinstance(v, tuple):
                    out[k] = len(v)
        return out

    @property
    def locals(self) -> frozenset[str]:
        return frozenset(self.local_nv) | frozenset(self.local_vol)


# -- syntactic helpers -----------------------------------------------------

@lru_cache(maxsize=65536)
def rd(e: Expr) -> frozenset[str]:
    """Locations syntactically read by ``e``; an array read reads the whole array."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, BinOp):
        return rd(e.lhs) | rd(e.rhs)
    if isinstance(e, ArrIdx):
        return rd(e.index) | {e.name}
    raise TypeError(f"not an expression: {e!r}")


def instr_reads(i: Instr) -> frozenset[str]:
    if isinstance(i, Assign):
        return rd(i.expr)
    if isinstance(i, AssignArr):
        return rd(i.index) | rd(i.expr)
    if isinstance(i, Input) and i.index is not None:
        return rd(i.index)
    return frozenset()


def iter_instrs(c: Command) -> Iterator[Instr]:
    """Every instruction in pre-order (then-arm before else-arm)."""
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, Seq):
            yield c.first
            stack.append(c.rest)
        elif isinstance(c, If):
            stack.append(c.orelse)
            stack.append(c.then)
        else:
            yield c


def iter_exprs(c: Command) -> Iterator[Expr]:
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, Seq):
            stack.append(c.rest)
            c = c.first
        if isinstance(c, If):
            yield c.cond
            stack.append(c.orelse)
            stack.append(c.then)
        elif isinstance(c, Assign):
            yield c.expr
        elif isinstance(c, AssignArr):
            yield c.index
            yield c.expr
        elif isinstance(c, Input) and c.index is not None:
            yield c.index


def map_checkpoints(c: Command, fn) -> Command:
    """Rebuild ``c`` with every checkpoint replaced by ``fn(checkpoint)``."""
    if isinstance(c, Seq):
        first = fn(c.first) if isinstance(c.first, Checkpoint) else c.first
        return Seq(first, map_checkpoints(c.rest, fn))
    if isinstance(c, If):
        return If(c.cond, map_checkpoints(c.then, fn), map_checkpoints(c.orelse, fn))
    if isinstance(c, Checkpoint):
        return fn(c)
    return c


def size(c: Command) -> int:
    return sum(1 for _ in iter_instrs(c))


# -- tokenizer / parser ----------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<int>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<=|>=|==|!=|&&|\|\||[-+*<>(){}\[\];,=:])
""", re.VERBOSE)

KEYWORDS = {"nv", "vol", "local", "main", "if", "else", "skip", "checkpoint",
            "goto", "toTask", "IN", "true", "false", "task"}

_PREC = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*",)]


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "name")

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def name(self) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.error(f"expected a name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            self.error(f"expected an integer, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    # declarations
    def decls(self, seen: dict[str, _Tok], dup: list[Diagnostic]) -> dict[str, Decl]:
        out: dict[str, Decl] = {}
        self.expect("{")
        while not self.at("}"):
            t = self.tok
            name = self.name()
            if self.accept("["):
                n = self.integer()
                self.expect("]")
                self.expect("=")
                self.expect("{")
                vals = [self.integer()]
                while self.accept(","):
                    vals.append(self.integer())
                self.expect("}")
                if len(vals) == 1 and n > 1:
                    vals = vals * n
                if len(vals) != n or n < 1:
                    self.error(f"array {name} declares length {n} but has {len(vals)} values", t)
                value: Decl = tuple(vals)
            else:
                self.expect("=")
                value = self.literal()
            if name in seen:
                dup.append(Diagnostic("duplicate", f"{name} declared at {seen[name].line}:"
                                      f"{seen[name].col} and again at {t.line}:{t.col}"))
            else:
                seen[name] = t
            out[name] = value
            self.accept(",")
            self.accept(";")
        self.expect("}")
        return out

    def literal(self) -> int | bool:
        if self.accept("true"):
            return True
        if self.accept("false"):
            return False
        return self.integer()

    # commands
    def cmd(self) -> Command:
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.expect("{")
            then = self.cmd()
            self.expect("}")
            self.expect("else")
            self.expect("{")
            orelse = self.cmd()
            self.expect("}")
            return If(cond, then, orelse)
        first = self.instr()
        if self.accept(";"):
            if self.at("}"):  # tolerate a trailing separator
                return first
            return Seq(first, self.cmd())
        return first

    def instr(self) -> Instr:
        if self.accept("skip"):
            return SKIP
        if self.accept("checkpoint"):
            self.expect("(")
            names = []
            if not self.at(")"):
                names.append(self.name())
                while self.accept(","):
                    names.append(self.name())
            self.expect(")")
            return Checkpoint(normalize_omega(names))
        if self.accept("goto"):
            t = self.tok
            if t.kind != "name":
                self.error("expected a label")
            self.i += 1
            return Goto(t.text)
        if self.accept("toTask"):
            self.expect("(")
            n = self.integer()
            self.expect(")")
            return ToTask(n)
        if self.at("reboot") and self.peek().text == "(":
            self.i += 1
            self.expect("(")
            n = self.integer()
            self.expect(")")
            return Reboot(n)
        name = self.name()
        index = None
        if self.accept("["):
            index = self.expr()
            self.expect("]")
        self.expect(":=")
        if self.at("IN"):
            self.i += 1
            self.expect("(")
            self.expect(")")
            return Input(name, index)
        e = self.expr()
        return Assign(name, e) if index is None else AssignArr(name, index, e)

    def expr(self, level: int = 0) -> Expr:
        if level == len(_PREC):
            return self.atom()
        lhs = self.expr(level + 1)
        while self.tok.kind == "op" and self.tok.text in _PREC[level]:
            op = self.tok.text
            self.i += 1
            lhs = BinOp(op, lhs, self.expr(level + 1))
        return lhs

    def atom(self) -> Expr:
        t = self.tok
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "int":
            return Const(self.integer())
        if self.accept("true"):
            return Const(True)
        if self.accept("false"):
            return Const(False)
        name = self.name()
        if self.accept("["):
            idx = self.expr()
            self.expect("]")
            return ArrIdx(name, idx)
        return Var(name)

    def done(self):
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")


def _parse_program(p: _Parser) -> Program:
    seen: dict[str, _Tok] = {}
    dup: list[Diagnostic] = []
    nv = p.decls(seen, dup) if p.accept("nv") else {}
    vol = p.decls(seen, dup) if p.accept("vol") else {}
    p.expect("main")
    p.expect("{")
    body = p.cmd()
    p.expect("}")
    blocks: dict[str, Command] = {}
    while p.tok.kind == "name" and p.peek().text == ":":
        t = p.tok
        label = t.text
        p.i += 2
        p.expect("{")
        if label in blocks:
            dup.append(Diagnostic("duplicate", f"label {label} defined twice ({t.line}:{t.col})"))
        blocks[label] = p.cmd()
        p.expect("}")
    p.done()
    prog = Program(nv, vol, body, blocks)
    diags = dup + [d for d in diagnostics(prog) if not (dup and d.kind == "duplicate")]
    if diags:
        raise ValidationError(diags)
    return prog


def _parse_tasks(p: _Parser) -> TaskProgram:
    seen: dict[str, _Tok] = {}
    dup: list[Diagnostic] = []
    shared = p.decls(seen, dup) if p.accept("nv") else {}
    local_nv = p.decls(seen, dup) if p.accept("local") else {}
    local_vol = p.decls(seen, dup) if p.accept("vol") else {}
    tasks: dict[int, Task] = {}
    entry = None
    while p.accept("task"):
        t = p.tok
        tid = p.integer()
        p.expect("(")
        names = []
        if not p.at(")"):
            names.append(p.name())
            while p.accept(","):
                names.append(p.name())
        p.expect(")")
        p.expect("{")
        body = p.cmd()
        p.expect("}")
        if tid in tasks:
            dup.append(Diagnostic("duplicate", f"task {tid} defined twice ({t.line}:{t.col})"))
        tasks[tid] = Task(normalize_omega(names), body)
        entry = tid if entry is None else entry
    if entry is None:
        p.error("expected at least one task")
    p.done()
    prog = TaskProgram(shared, local_nv, local_vol, tasks, entry)
    diags = dup + [d for d in task_diagnostics(prog) if not (dup and d.kind == "duplicate")]
    if diags:
        raise ValidationError(diags)
    return prog


def parse(text: str) -> Program:
    return _parse_program(_Parser(text))


def parse_tasks(text: str) -> TaskProgram:
    return _parse_tasks(_Parser(text))


def parse_any(text: str) -> Program | TaskProgram:
    """Parse either an ordinary program or a task program (detected by ``task`` blocks)."""
    toks = _tokenize(text)
    if any(t.kind == "name" and t.text == "task" for t in toks):
        return parse_tasks(text)
    return parse(text)


# -- validation ------------------------------------------------------------

def _check_body(c: Command, scalars: set, arrays: dict[str, int], labels, allow_totask,
                task_ids, nv_names, out: list[Diagnostic]):
    def name_use(name: str, as_array: bool):
        if name not in scalars and name not in arrays:
            out.append(Diagnostic("undeclared", f"{name} is not declared"))
        elif as_array and name not in arrays:
            out.append(Diagnostic("kind-mismatch", f"{name} is a scalar, used as an array"))
        elif not as_array and name in arrays and name not in scalars:
            out.append(Diagnostic("kind-mismatch", f"{name} is an array, used as a scalar"))

    def const_index(name: str, idx: Expr):
        if isinstance(idx, Const) and name in arrays:
            v = idx.value
            if isinstance(v, bool) or not 0 <= v < arrays[name]:
                out.append(Diagnostic("bounds", f"{name}[{v}] outside declared length {arrays[name]}"))

    def expr(e: Expr):
        if isinstance(e, Var):
            name_use(e.name, False)
        elif isinstance(e, BinOp):
            if e.op not in BINOPS:
                out.append(Diagnostic("syntax", f"unknown operator {e.op}"))
            expr(e.lhs)
            expr(e.rhs)
        elif isinstance(e, ArrIdx):
            name_use(e.name, True)
            const_index(e.name, e.index)
            expr(e.index)

    for i in iter_instrs(c):
        if isinstance(i, Assign):
            name_use(i.name, False)
            expr(i.expr)
        elif isinstance(i, AssignArr):
            name_use(i.name, True)
            const_index(i.name, i.index)
            expr(i.index)
            expr(i.expr)
        elif isinstance(i, Input):
            name_use(i.name, i.index is not None)
            if i.index is not None:
                const_index(i.name, i.index)
                expr(i.index)
        elif isinstance(i, Checkpoint):
            for n in i.omega:
                if n not in nv_names:
                    out.append(Diagnostic("undeclared", f"checkpoint names {n}, which is not non-volatile"))
        elif isinstance(i, Reboot):
            out.append(Diagnostic("placement", "reboot is runtime-only and may not appear in source"))
        elif isinstance(i, ToTask):
            if not allow_totask:
                out.append(Diagnostic("placement", "toTask is only allowed inside task programs"))
            elif i.task not in task_ids:
                out.append(Diagnostic("label", f"toTask({i.task}) names no task"))
        elif isinstance(i, Goto):
            if i.label not in labels:
                out.append(Diagnostic("label", f"goto {i.label} has no target"))
    for node in _iter_ifs(c):
        expr(node.cond)


def _iter_ifs(c: Command) -> Iterator[If]:
    stack = [c]
    while stack:
        c = stack.pop()
        if isinstance(c, Seq):
            stack.append(c.rest)
        elif isinstance(c, If):
            yield c
            stack.extend((c.orelse, c.then))


def _decl_diags(groups: list[dict[str, Decl]]) -> tuple[set, dict[str, int], list[Diagnostic]]:
    out, scalars, arrays, seen = [], set(), {}, set()
    for decls in groups:
        for name, v in decls.items():
            if name in seen:
                out.append(Diagnostic("duplicate", f"{name} declared in more than one memory"))
            seen.add(name)
            if isinstance(v, tuple):
                arrays[name] = len(v)
            else:
                scalars.add(name)
    return scalars, arrays, out


def diagnostics(p: Program) -> list[Diagnostic]:
    scalars, arrays, out = _decl_diags([p.nv, p.vol])
    for body in (p.body, *p.blocks.values()):
        _check_body(body, scalars, arrays, p.blocks, False, (), p.nv_names, out)
    return list(dict.fromkeys(out))


def task_diagnostics(p: TaskProgram) -> list[Diagnostic]:
    scalars, arrays, out = _decl_diags([p.shared, p.local_nv, p.local_vol])
    for tid, task in p.tasks.items():
        for n in task.omega:
            if n not in p.shared:
                out.append(Diagnostic("undeclared", f"task {tid} protects {n}, which is not shared"))
        for i in iter_instrs(task.body):
            if isinstance(i, Checkpoint):
                out.append(Diagnostic("placement", f"task {tid} contains a checkpoint"))
        _check_body(task.body, scalars, arrays, {}, True, p.tasks, frozenset(p.shared), out)
    return list(dict.fromkeys(out))


def validate(p: Program | TaskProgram) -> None:
    """Raise ``ValidationError`` carrying every diagnostic found."""
    diags = task_diagnostics(p) if isinstance(p, TaskProgram) else diagnostics(p)
    if diags:
        raise ValidationError(diags)


# -- pretty printing -------------------------------------------------------

def pretty_expr(e: Expr) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Const):
        v = e.value
        return ("true" if v else "false") if isinstance(v, bool) else str(v)
    if isinstance(e, ArrIdx):
        return f"{e.name}[{pretty_expr(e.index)}]"
    lhs, rhs = pretty_expr(e.lhs), pretty_expr(e.rhs)
    if isinstance(e.lhs, BinOp):
        lhs = f"({lhs})"
    if isinstance(e.rhs, BinOp):
        rhs = f"({rhs})"
    return f"{lhs} {e.op} {rhs}"


def pretty_instr(i: Instr) -> str:
    if isinstance(i, Skip):
        return "skip"
    if isinstance(i, Assign):
        return f"{i.name} := {pretty_expr(i.expr)}"
    if isinstance(i, AssignArr):
        return f"{i.name}[{pretty_expr(i.index)}] := {pretty_expr(i.expr)}"
    if isinstance(i, Input):
        target = i.name if i.index is None else f"{i.name}[{pretty_expr(i.index)}]"
        return f"{target} := IN()"
    if isinstance(i, Checkpoint):
        return f"checkpoint({', '.join(i.omega)})"
    if isinstance(i, Reboot):
        return f"reboot({i.n})"
    if isinstance(i, ToTask):
        return f"toTask({i.task})"
    if isinstance(i, Goto):
        return f"goto {i.label}"
    raise TypeError(f"not an instruction: {i!r}")


def pretty_cmd(c: Command, indent: int = 1) -> str:
    pad = "  " * indent
    lines = []
    while isinstance(c, Seq):
        lines.append(pad + pretty_instr(c.first) + ";")
        c = c.rest
    if isinstance(c, If):
        lines.append(f"{pad}if ({pretty_expr(c.cond)}) {{")
        lines.append(pretty_cmd(c.then, indent + 1))
        lines.append(f"{pad}}} else {{")
        lines.append(pretty_cmd(c.orelse, indent + 1))
        lines.append(pad + "}")
    else:
        lines.append(pad + pretty_instr(c))
    return "\n".join(lines)


def _pretty_decls(decls: dict[str, Decl]) -> str:
    parts = []
    for name, v in decls.items():
        if isinstance(v, tuple):
            parts.append(f"{name}[{len(v)}] = {{{', '.join(map(str, v))}}}")
        else:
            parts.append(f"{name} = {pretty_expr(Const(v))}")
    return "{ " + " ".join(parts) + " }" if parts else "{}"


def pretty(p: Program | TaskProgram) -> str:
    if isinstance(p, TaskProgram):
        out = [f"nv {_pretty_decls(p.shared)}"]
        if p.local_nv:
            out.append(f"local {_pretty_decls(p.local_nv)}")
        out.append(f"vol {_pretty_decls(p.local_vol)}")
        for tid, task in p.tasks.items():
            out.append(f"task {tid} ({', '.join(task.omega)}) {{\n{pretty_cmd(task.body)}\n}}")
        return "\n".join(out) + "\n"
    out = [f"nv {_pretty_decls(p.nv)}", f"vol {_pretty_decls(p.vol)}",
           f"main {{\n{pretty_cmd(p.body)}\n}}"]
    for label, block in p.blocks.items():
        out.append(f"{label}: {{\n{pretty_cmd(block)}\n}}")
    return "\n".join(out) + "\n"


pretty_print = pretty
