"""Values, stores, observations and the store algebra shared by every model."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .lang import Decl

# A location is a variable name or an (array, index) cell.
Loc = Union[str, tuple]


@dataclass(frozen=True, slots=True)
class Val:
    """A runtime value.

    ``tau`` is set for values produced by ``IN()`` (the value ``in(tau)``).
    Taint is carried along but ignored by equality and hashing.
    """
    v: int | bool
    tau: int | None = None
    tainted: bool = field(default=False, compare=False)

    def clean(self) -> "Val":
        return Val(self.v, self.tau) if self.tainted else self

    def to_json(self):
        if self.tau is None and not self.tainted:
            return self.v
        out = {"v": self.v}
        if self.tau is not None:
            out["in"] = self.tau
        if self.tainted:
            out["t"] = True
        return out

    @staticmethod
    def from_json(obj) -> "Val":
        if isinstance(obj, dict):
            return Val(obj["v"], obj.get("in"), bool(obj.get("t", False)))
        return Val(obj)


RESET_VALUE = 0


def base(loc: Loc) -> str:
    return loc if isinstance(loc, str) else loc[0]


def loc_key(loc: Loc):
    return (loc, -1) if isinstance(loc, str) else loc


def loc_str(loc: Loc) -> str:
    return loc if isinstance(loc, str) else f"{loc[0]}[{loc[1]}]"


def parse_loc(text: str) -> Loc:
    if text.endswith("]"):
        name, idx = text[:-1].split("[")
        return (name, int(idx))
    return text


Store = dict  # Loc -> Val; treated as an immutable value, copied on write


class StoreError(Exception):
    pass


def init_store(decls: Mapping[str, Decl]) -> Store:
    out: Store = {}
    for name, v in decls.items():
        if isinstance(v, tuple):
            for i, cell in enumerate(v):
                out[(name, i)] = Val(cell)
        else:
            out[name] = Val(v)
    return out


def sorted_items(m: Store):
    return sorted(m.items(), key=lambda kv: loc_key(kv[0]))


def overwrite(m1: Store, m2: Store) -> Store:
    """``m1 ◁ m2``: take m2's value wherever m2 is defined."""
    if not m2:
        return m1
    for loc in m2:
        if loc not in m1:
            raise StoreError(f"overwrite: {loc_str(loc)} is outside the target domain")
    out = dict(m1)
    out.update(m2)
    return out


def expansion(m: Store, omega: Iterable[str]) -> frozenset:
    """Every location of ``m`` whose variable or array name is in ``omega``."""
    names = set(omega)
    return frozenset(loc for loc in m if base(loc) in names)


def restrict(m: Store, omega: Iterable[str]) -> Store:
    names = set(omega)
    known = {base(loc) for loc in m}
    missing = names - known
    if missing:
        raise StoreError(f"restrict: unknown location(s) {sorted(missing)}")
    return {loc: v for loc, v in m.items() if base(loc) in names}


def reset_volatile(v: Store, reset_value: int | bool = RESET_VALUE) -> Store:
    r = Val(reset_value)
    return {loc: r for loc in v}


def erase_taint(m: Store) -> Store:
    return {loc: val.clean() for loc, val in m.items()}


def store_to_json(m: Store) -> dict:
    return {loc_str(loc): val.to_json() for loc, val in sorted_items(m)}


def store_from_json(obj: dict) -> Store:
    return {parse_loc(k): Val.from_json(v) for k, v in obj.items()}


def store_diff(m1: Store, m2: Store) -> list:
    """Locations where the two stores disagree, in deterministic order."""
    locs = set(m1) | set(m2)
    return sorted((loc for loc in locs if m1.get(loc) != m2.get(loc)), key=loc_key)


# -- observations ----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Read:
    loc: Loc
    val: Val

    def __str__(self) -> str:
        return f"rd {loc_str(self.loc)} {_fmt(self.val)}"


@dataclass(frozen=True, slots=True)
class In:
    """``in(tau)``; the magnitude rides along for replay but is not compared."""
    tau: int
    value: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"in({self.tau})"


@dataclass(frozen=True, slots=True)
class RebootObs:
    def __str__(self) -> str:
        return "reboot"


@dataclass(frozen=True, slots=True)
class CheckpointObs:
    def __str__(self) -> str:
        return "checkpoint"


REBOOT = RebootObs()
CHECKPOINT = CheckpointObs()
Obs = Union[Read, In, RebootObs, CheckpointObs]


def _fmt(v: Val) -> str:
    s = str(v.v).lower() if isinstance(v.v, bool) else str(v.v)
    return s if v.tau is None else f"in({v.tau})={s}"


def obs_to_json(o: Obs) -> dict:
    if isinstance(o, Read):
        return {"rd": loc_str(o.loc), "v": o.val.to_json()}
    if isinstance(o, In):
        return {"in": o.tau} if o.value is None else {"in": o.tau, "v": o.value}
    return {"ev": str(o)}


def obs_from_json(obj: dict) -> Obs:
    if "rd" in obj:
        return Read(parse_loc(obj["rd"]), Val.from_json(obj["v"]))
    if "in" in obj:
        return In(obj["in"], obj.get("v"))
    return REBOOT if obj["ev"] == "reboot" else CHECKPOINT


def format_obs(seq: Iterable[Obs]) -> str:
    return ", ".join(map(str, seq))
