"""Sorted terms of the four-sorted action language.

The language has four sorts: actions, situations, time, and plain objects.
Time points are plain non-negative ints.  Every term is an immutable value
compared structurally; unique names and the injectivity of history
construction make syntactic equality the right equality for ground terms.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Union


class Sort(enum.Enum):
    OBJECT = "object"
    ACTION = "action"
    TIME = "time"
    SITUATION = "situation"


@dataclass(frozen=True)
class Var:
    """A variable carrying an explicit sort."""

    name: str
    sort: Sort

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """An object constant (uppercase-initial identifier in the surface syntax)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ActionTerm:
    """An action function applied to object arguments plus a final time argument."""

    functor: str
    args: tuple

    def __post_init__(self) -> None:
        if not self.args:
            raise ValueError(f"action {self.functor!r} needs at least a time argument")
        object.__setattr__(self, "args", tuple(self.args))
        t = self.args[-1]
        if isinstance(t, int) and t < 0:
            raise ValueError(f"action {self.functor!r} has negative time {t}")

    @property
    def time(self):
        """The occurrence time: the last argument by convention."""
        return self.args[-1]

    def is_ground(self) -> bool:
        return all(not isinstance(a, Var) for a in self.args)

    def __str__(self) -> str:
        return f"{self.functor}({','.join(str(a) for a in self.args)})"


class S0Term:
    """The initial (empty) history.  A singleton; use the module constant S0."""

    _instance = None

    def __new__(cls) -> "S0Term":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "S0"

    def __str__(self) -> str:
        return "S0"

    def __hash__(self) -> int:
        return hash("S0Term")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, S0Term)


S0 = S0Term()


@dataclass(frozen=True)
class DoTerm:
    """The history obtained by executing one more action.

    The action slot may hold an action variable so that formula-level terms
    like do(a, s) can be represented; ground histories always hold ground
    action terms.
    """

    action: Union[ActionTerm, Var]
    parent: "SituationTerm"

    def __str__(self) -> str:
        return f"do({self.action}, {self.parent})"


SituationTerm = Union[S0Term, DoTerm, Var]


def mk_do(a, s: SituationTerm) -> DoTerm:
    """Append an action (or, for convenience, a sequence of actions) to a history.

    mk_do([a1, a2], s) expands to do(a2, do(a1, s)).
    """
    if isinstance(a, (list, tuple)):
        out = s
        for step in a:
            out = mk_do(step, out)
        if not isinstance(out, DoTerm):
            raise ValueError("mk_do over an empty action list")
        return out
    if not isinstance(a, (ActionTerm, Var)):
        raise TypeError(f"not an action term: {a!r}")
    if isinstance(a, Var) and a.sort is not Sort.ACTION:
        raise TypeError(f"variable {a.name} is not action-sorted")
    if not isinstance(s, (S0Term, DoTerm, Var)):
        raise TypeError(f"not a situation term: {s!r}")
    return DoTerm(a, s)


def do_all(actions: Iterable, s: SituationTerm = S0) -> SituationTerm:
    """Fold a whole action sequence onto a history; returns s for an empty sequence."""
    out = s
    for a in actions:
        out = mk_do(a, out)
    return out


def action_time(a: ActionTerm) -> int:
    """Occurrence time of a ground action."""
    t = a.time
    if not isinstance(t, int):
        raise ValueError(f"action {a} has a non-ground time")
    return t


def start(s: SituationTerm, epoch: int = 0) -> int:
    """Start time of a ground history: the epoch for S0, else the last action's time."""
    if isinstance(s, S0Term):
        return epoch
    if isinstance(s, DoTerm):
        if isinstance(s.action, Var):
            raise ValueError(f"non-ground situation {s}")
        return action_time(s.action)
    raise ValueError(f"non-ground situation {s}")


def is_ground_situation(s: SituationTerm) -> bool:
    while isinstance(s, DoTerm):
        if isinstance(s.action, Var) or not s.action.is_ground():
            return False
        s = s.parent
    return isinstance(s, S0Term)


def sit_root(s: SituationTerm) -> Union[S0Term, Var]:
    """The base of the do-chain: S0 or a situation variable."""
    while isinstance(s, DoTerm):
        s = s.parent
    if isinstance(s, (S0Term, Var)):
        return s
    raise ValueError(f"malformed situation term {s!r}")


def sit_length(s: SituationTerm) -> int:
    """Number of actions in the do-chain above the root."""
    n = 0
    while isinstance(s, DoTerm):
        n += 1
        s = s.parent
    return n


def sit_prefixes(s: SituationTerm) -> list:
    """All subterm histories of s, root first, s itself last."""
    chain = []
    while isinstance(s, DoTerm):
        chain.append(s)
        s = s.parent
    chain.append(s)
    chain.reverse()
    return chain


def sit_actions(s: SituationTerm) -> list:
    """Actions of the do-chain in execution order."""
    out = []
    while isinstance(s, DoTerm):
        out.append(s.action)
        s = s.parent
    out.reverse()
    return out


def is_sit_subterm(t: SituationTerm, sigma: SituationTerm) -> bool:
    """True when t is sigma itself or one of its parent histories."""
    while True:
        if t == sigma:
            return True
        if isinstance(sigma, DoTerm):
            sigma = sigma.parent
        else:
            return False


def precedes(s1: SituationTerm, s2: SituationTerm) -> bool:
    """Strict history order: the do-chain of s1 is a proper prefix of s2's.

    No situation precedes S0.
    """
    _require_ground(s1)
    _require_ground(s2)
    if sit_length(s1) >= sit_length(s2):
        return False
    return is_sit_subterm(s1, s2)


def precedes_eq(s1: SituationTerm, s2: SituationTerm) -> bool:
    """Reflexive closure of precedes."""
    _require_ground(s1)
    _require_ground(s2)
    return is_sit_subterm(s1, s2)


def _require_ground(s: SituationTerm) -> None:
    if not is_ground_situation(s):
        raise ValueError(f"situation term is not ground: {s}")


def term_to_text(t) -> str:
    """Textual form used in diagnostics and reports, e.g. do(lock(D,40), do(unlock(D,30), S0))."""
    if isinstance(t, (S0Term, DoTerm, ActionTerm, Var, Const)):
        return str(t)
    if isinstance(t, int):
        return str(t)
    raise TypeError(f"not a term: {t!r}")
