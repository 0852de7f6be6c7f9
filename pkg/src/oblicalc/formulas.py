"""Formula representation and the bounded-formula classifier.

Formulas range over fluent atoms, functional-fluent equalities, rigid atoms,
equalities, the usual connectives, quantifiers over object/action/time
variables, and situation quantifiers whose range is pinned between a lower
and an upper history (the non-Markovian "look into the past" shape).

A formula can also appear in *suppressed* form: every occurrence of its one
free situation argument replaced by a hole.  Suppressed formulas are the
currency of the obligation store; restore() plugs a concrete history back in.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

from .terms import (
    ActionTerm,
    DoTerm,
    S0Term,
    SituationTerm,
    Sort,
    Var,
    is_sit_subterm,
    sit_root,
)

PRECEDES = "<<"
PRECEDES_EQ = "<<="


class Hole:
    """Placeholder left where a situation argument was suppressed."""

    _instance = None

    def __new__(cls) -> "Hole":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "<hole>"

    def __hash__(self) -> int:
        return hash("formula-hole")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Hole)


HOLE = Hole()

SitSlot = Union[S0Term, DoTerm, Var, Hole]


class _Nullary:
    _instance = None
    text = ""

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return self.text

    def __hash__(self) -> int:
        return hash(self.text)

    def __eq__(self, other: object) -> bool:
        return type(other) is type(self)


class TrueF(_Nullary):
    text = "true"


class FalseF(_Nullary):
    text = "false"


TRUE = TrueF()
FALSE = FalseF()


@dataclass(frozen=True)
class FluentAtom:
    """Relational fluent atom F(args, sit)."""

    name: str
    args: tuple
    sit: SitSlot


@dataclass(frozen=True)
class FunFluentEq:
    """Functional fluent equality f(args, sit) == value."""

    name: str
    args: tuple
    sit: SitSlot
    value: object


@dataclass(frozen=True)
class RigidAtom:
    """Situation-independent predicate atom."""

    name: str
    args: tuple


@dataclass(frozen=True)
class PossAtom:
    """Executability atom Poss(action, sit)."""

    action: Union[ActionTerm, Var]
    sit: SitSlot


@dataclass(frozen=True)
class Eq:
    """Equality between two terms of any one sort (objects, actions, times, situations)."""

    left: object
    right: object


@dataclass(frozen=True)
class TimeCmp:
    op: str  # "<" or "<="
    left: object
    right: object


@dataclass(frozen=True)
class SitCmp:
    op: str  # PRECEDES or PRECEDES_EQ
    left: SitSlot
    right: SitSlot


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    items: tuple


@dataclass(frozen=True)
class Or:
    items: tuple


@dataclass(frozen=True)
class Implies:
    ante: "Formula"
    cons: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    """Existential over object/action/time variables."""

    vars: tuple
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    vars: tuple
    body: "Formula"


@dataclass(frozen=True)
class ExistsSit:
    """(exists v) lower REL v REL upper and body, with v ranging over histories."""

    var: Var
    lower: SitSlot
    low_rel: str
    high_rel: str
    upper: SitSlot
    body: "Formula"


@dataclass(frozen=True)
class ForallSit:
    """(forall v) lower REL v REL upper implies body."""

    var: Var
    lower: SitSlot
    low_rel: str
    high_rel: str
    upper: SitSlot
    body: "Formula"


Formula = Union[
    TrueF,
    FalseF,
    FluentAtom,
    FunFluentEq,
    RigidAtom,
    PossAtom,
    Eq,
    TimeCmp,
    SitCmp,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Exists,
    Forall,
    ExistsSit,
    ForallSit,
]


# ---------------------------------------------------------------------------
# Substitution and traversal
# ---------------------------------------------------------------------------


def _subst_term(t, varmap: dict, hole_to):
    if isinstance(t, Hole):
        return hole_to if hole_to is not None else t
    if isinstance(t, Var):
        return varmap.get(t, t)
    if isinstance(t, ActionTerm):
        return ActionTerm(t.functor, tuple(_subst_term(a, varmap, hole_to) for a in t.args))
    if isinstance(t, DoTerm):
        return DoTerm(_subst_term(t.action, varmap, hole_to), _subst_term(t.parent, varmap, hole_to))
    return t


def subst(f: Formula, varmap: Optional[dict] = None, hole_to=None) -> Formula:
    """Substitute variables (and optionally the hole) throughout a formula.

    Quantified variables shadow outer bindings of the same variable object.
    """
    vm = dict(varmap or {})

    def term(t):
        return _subst_term(t, vm, hole_to)

    def go(f: Formula) -> Formula:
        if isinstance(f, (TrueF, FalseF)):
            return f
        if isinstance(f, FluentAtom):
            return FluentAtom(f.name, tuple(term(a) for a in f.args), term(f.sit))
        if isinstance(f, FunFluentEq):
            return FunFluentEq(f.name, tuple(term(a) for a in f.args), term(f.sit), term(f.value))
        if isinstance(f, RigidAtom):
            return RigidAtom(f.name, tuple(term(a) for a in f.args))
        if isinstance(f, PossAtom):
            return PossAtom(term(f.action), term(f.sit))
        if isinstance(f, Eq):
            return Eq(term(f.left), term(f.right))
        if isinstance(f, TimeCmp):
            return TimeCmp(f.op, term(f.left), term(f.right))
        if isinstance(f, SitCmp):
            return SitCmp(f.op, term(f.left), term(f.right))
        if isinstance(f, Not):
            return Not(go(f.body))
        if isinstance(f, And):
            return And(tuple(go(x) for x in f.items))
        if isinstance(f, Or):
            return Or(tuple(go(x) for x in f.items))
        if isinstance(f, Implies):
            return Implies(go(f.ante), go(f.cons))
        if isinstance(f, Iff):
            return Iff(go(f.left), go(f.right))
        if isinstance(f, (Exists, Forall)):
            shadowed = {v: vm.pop(v) for v in f.vars if v in vm}
            body = go(f.body)
            vm.update(shadowed)
            return type(f)(f.vars, body)
        if isinstance(f, (ExistsSit, ForallSit)):
            shadowed = vm.pop(f.var, None)
            lower, upper = term(f.lower), term(f.upper)
            body = go(f.body)
            if shadowed is not None:
                vm[f.var] = shadowed
            return type(f)(f.var, lower, f.low_rel, f.high_rel, upper, body)
        raise TypeError(f"not a formula: {f!r}")

    return go(f)


def free_vars(f: Formula) -> set:
    """Free variables of a formula, over all four sorts."""
    out: set = set()

    def term(t, bound):
        if isinstance(t, Var) and t not in bound:
            out.add(t)
        elif isinstance(t, ActionTerm):
            for a in t.args:
                term(a, bound)
        elif isinstance(t, DoTerm):
            term(t.action, bound)
            term(t.parent, bound)

    def go(f, bound):
        if isinstance(f, (TrueF, FalseF)):
            return
        if isinstance(f, (FluentAtom, FunFluentEq)):
            for a in f.args:
                term(a, bound)
            term(f.sit, bound)
            if isinstance(f, FunFluentEq):
                term(f.value, bound)
        elif isinstance(f, RigidAtom):
            for a in f.args:
                term(a, bound)
        elif isinstance(f, PossAtom):
            term(f.action, bound)
            term(f.sit, bound)
        elif isinstance(f, (Eq, TimeCmp, SitCmp)):
            term(f.left, bound)
            term(f.right, bound)
        elif isinstance(f, Not):
            go(f.body, bound)
        elif isinstance(f, (And, Or)):
            for x in f.items:
                go(x, bound)
        elif isinstance(f, Implies):
            go(f.ante, bound)
            go(f.cons, bound)
        elif isinstance(f, Iff):
            go(f.left, bound)
            go(f.right, bound)
        elif isinstance(f, (Exists, Forall)):
            go(f.body, bound | set(f.vars))
        elif isinstance(f, (ExistsSit, ForallSit)):
            term(f.lower, bound)
            term(f.upper, bound)
            go(f.body, bound | {f.var})
        else:
            raise TypeError(f"not a formula: {f!r}")

    go(f, set())
    return out


# ---------------------------------------------------------------------------
# Suppressed formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuppressedFormula:
    """A formula whose free situation argument has been replaced by the hole."""

    body: Formula

    def restore(self, sigma: SituationTerm) -> Formula:
        """Plug a history back into every hole."""
        return subst(self.body, None, hole_to=sigma)

    def instantiate(self, varmap: dict) -> "SuppressedFormula":
        return SuppressedFormula(subst(self.body, varmap))

    def __str__(self) -> str:
        return formula_to_text(self.body)


def suppress(f: Formula, sit_var: Union[Var, SituationTerm]) -> SuppressedFormula:
    """Suppress every occurrence of the given free situation term.

    Occurrences of situation variables bound inside f are left alone, so
    restore() after suppress() is the identity up to renaming of the
    suppressed term.
    """

    def term(t):
        if t == sit_var:
            return HOLE
        if isinstance(t, DoTerm):
            return DoTerm(term(t.action) if isinstance(t.action, Var) else t.action, term(t.parent))
        return t

    def go(f):
        if isinstance(f, (TrueF, FalseF, RigidAtom)):
            return f
        if isinstance(f, FluentAtom):
            return FluentAtom(f.name, f.args, term(f.sit))
        if isinstance(f, FunFluentEq):
            return FunFluentEq(f.name, f.args, term(f.sit), f.value)
        if isinstance(f, PossAtom):
            return PossAtom(f.action, term(f.sit))
        if isinstance(f, Eq):
            return Eq(term(f.left), term(f.right))
        if isinstance(f, TimeCmp):
            return f
        if isinstance(f, SitCmp):
            return SitCmp(f.op, term(f.left), term(f.right))
        if isinstance(f, Not):
            return Not(go(f.body))
        if isinstance(f, And):
            return And(tuple(go(x) for x in f.items))
        if isinstance(f, Or):
            return Or(tuple(go(x) for x in f.items))
        if isinstance(f, Implies):
            return Implies(go(f.ante), go(f.cons))
        if isinstance(f, Iff):
            return Iff(go(f.left), go(f.right))
        if isinstance(f, (Exists, Forall)):
            return type(f)(f.vars, go(f.body))
        if isinstance(f, (ExistsSit, ForallSit)):
            if f.var == sit_var:
                return f
            return type(f)(f.var, term(f.lower), f.low_rel, f.high_rel, term(f.upper), go(f.body))
        raise TypeError(f"not a formula: {f!r}")

    return SuppressedFormula(go(f))


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_IFF = 1
_PREC_IMPLIES = 2
_PREC_OR = 3
_PREC_AND = 4
_PREC_UNARY = 5


def _term_text(t) -> str:
    if isinstance(t, Hole):
        raise ValueError("cannot print a bare hole outside an atom")
    return str(t)


def _sit_args_text(args: tuple, sit: SitSlot) -> str:
    parts = [str(a) for a in args]
    if not isinstance(sit, Hole):
        parts.append(str(sit))
    return ", ".join(parts)


def formula_to_text(f: Formula) -> str:
    """Render a formula in the surface syntax; suppressed atoms omit their hole."""

    def go(f, prec):
        if isinstance(f, TrueF):
            return "true"
        if isinstance(f, FalseF):
            return "false"
        if isinstance(f, FluentAtom):
            return f"{f.name}({_sit_args_text(f.args, f.sit)})"
        if isinstance(f, FunFluentEq):
            return f"{f.name}({_sit_args_text(f.args, f.sit)}) == {f.value}"
        if isinstance(f, RigidAtom):
            return f"{f.name}({', '.join(str(a) for a in f.args)})"
        if isinstance(f, PossAtom):
            sit = "" if isinstance(f.sit, Hole) else f", {f.sit}"
            return f"Poss({f.action}{sit})"
        if isinstance(f, Eq):
            return f"{_cmp_side(f.left)} == {_cmp_side(f.right)}"
        if isinstance(f, TimeCmp):
            return f"{f.left} {f.op} {f.right}"
        if isinstance(f, SitCmp):
            return f"{_cmp_side(f.left)} {f.op} {_cmp_side(f.right)}"
        if isinstance(f, Not):
            return f"not {go(f.body, _PREC_UNARY)}"
        if isinstance(f, And):
            s = " and ".join(go(x, _PREC_AND) for x in f.items)
            return s if prec <= _PREC_AND else f"({s})"
        if isinstance(f, Or):
            s = " or ".join(go(x, _PREC_OR + 1) for x in f.items)
            return s if prec <= _PREC_OR else f"({s})"
        if isinstance(f, Implies):
            s = f"{go(f.ante, _PREC_IMPLIES + 1)} implies {go(f.cons, _PREC_IMPLIES)}"
            return s if prec <= _PREC_IMPLIES else f"({s})"
        if isinstance(f, Iff):
            s = f"{go(f.left, _PREC_IFF + 1)} iff {go(f.right, _PREC_IFF + 1)}"
            return s if prec <= _PREC_IFF else f"({s})"
        if isinstance(f, Exists):
            return f"exists {', '.join(v.name for v in f.vars)} ({go(f.body, 0)})"
        if isinstance(f, Forall):
            return f"forall {', '.join(v.name for v in f.vars)} ({go(f.body, 0)})"
        if isinstance(f, ExistsSit):
            rng = f"{_cmp_side(f.lower)} {f.low_rel} {f.var.name} {f.high_rel} {_cmp_side(f.upper)}"
            return f"exists {f.var.name} ({rng} and {go(f.body, _PREC_AND)})"
        if isinstance(f, ForallSit):
            rng = f"{_cmp_side(f.lower)} {f.low_rel} {f.var.name} {f.high_rel} {_cmp_side(f.upper)}"
            return f"forall {f.var.name} ({rng} implies {go(f.body, _PREC_IMPLIES)})"
        raise TypeError(f"not a formula: {f!r}")

    def _cmp_side(t):
        return "<suppressed>" if isinstance(t, Hole) else str(t)

    return go(f, 0)


# ---------------------------------------------------------------------------
# Bounded-formula classification
# ---------------------------------------------------------------------------


class Boundedness(enum.Enum):
    STRICTLY_BOUNDED = "strictly_bounded"
    BOUNDED = "bounded"
    UNBOUNDED = "unbounded"


_RANK = {
    Boundedness.STRICTLY_BOUNDED: 2,
    Boundedness.BOUNDED: 1,
    Boundedness.UNBOUNDED: 0,
}


def _weaker(a: Boundedness, b: Boundedness) -> Boundedness:
    return a if _RANK[a] <= _RANK[b] else b


def _atom_sit_terms(f: Formula) -> list:
    """Situation terms mentioned by an atomic formula."""
    if isinstance(f, (FluentAtom, FunFluentEq, PossAtom)):
        return [f.sit]
    if isinstance(f, SitCmp):
        return [f.left, f.right]
    if isinstance(f, Eq):
        return [t for t in (f.left, f.right) if isinstance(t, (S0Term, DoTerm)) or _is_sit_var(t)]
    return []


def _is_sit_var(t) -> bool:
    return isinstance(t, Var) and t.sort is Sort.SITUATION


def _is_atom(f: Formula) -> bool:
    return isinstance(f, (TrueF, FalseF, FluentAtom, FunFluentEq, RigidAtom, PossAtom, Eq, TimeCmp, SitCmp))


def mentions_poss(f: Formula) -> bool:
    if isinstance(f, PossAtom):
        return True
    if isinstance(f, Not):
        return mentions_poss(f.body)
    if isinstance(f, (And, Or)):
        return any(mentions_poss(x) for x in f.items)
    if isinstance(f, Implies):
        return mentions_poss(f.ante) or mentions_poss(f.cons)
    if isinstance(f, Iff):
        return mentions_poss(f.left) or mentions_poss(f.right)
    if isinstance(f, (Exists, Forall, ExistsSit, ForallSit)):
        return mentions_poss(f.body)
    return False


def classify_bounded(w: Formula, sigma: SituationTerm) -> Boundedness:
    """Classify a formula against a bounding history term.

    The bounding term must be rooted at S0 or at a situation variable.  The
    result is the tightest class that holds:

    * strictly_bounded: every situation term is a subterm of the bound (or,
      under a situation quantifier, of the quantified variable's chain);
    * bounded: every situation term is at least rooted at the bound's root,
      with quantified-situation sub-formulas splitting between the new
      variable's root and the outer root;
    * unbounded: anything else, including quantification over histories with
      no upper constraint.

    Range bounds of situation quantifiers may be rooted at S0, at the outer
    root, or at an enclosing quantified variable; any other lower/upper term
    makes the formula unbounded.
    """
    root = sit_root(sigma)
    if isinstance(root, Var) and root.sort is not Sort.SITUATION:
        raise ValueError(f"bounding term not rooted at S0 or a situation variable: {sigma}")
    return _classify(w, sigma, outer_roots=_roots_above(sigma, ()))


def _roots_above(sigma: SituationTerm, enclosing: tuple) -> tuple:
    return (sit_root(sigma),) + tuple(enclosing)


def _classify(w: Formula, sigma: SituationTerm, outer_roots: tuple) -> Boundedness:
    lam = sit_root(sigma)

    if _is_atom(w):
        sits = _atom_sit_terms(w)
        if not sits:
            return Boundedness.STRICTLY_BOUNDED
        if not all(sit_root(t) == lam for t in sits):
            return Boundedness.UNBOUNDED
        if all(is_sit_subterm(t, sigma) for t in sits):
            return Boundedness.STRICTLY_BOUNDED
        return Boundedness.BOUNDED

    if isinstance(w, Not):
        return _classify(w.body, sigma, outer_roots)
    if isinstance(w, And) or isinstance(w, Or):
        out = Boundedness.STRICTLY_BOUNDED
        for x in w.items:
            out = _weaker(out, _classify(x, sigma, outer_roots))
        return out
    if isinstance(w, Implies):
        return _weaker(_classify(w.ante, sigma, outer_roots), _classify(w.cons, sigma, outer_roots))
    if isinstance(w, Iff):
        return _weaker(_classify(w.left, sigma, outer_roots), _classify(w.right, sigma, outer_roots))
    if isinstance(w, (Exists, Forall)):
        if any(v.sort is Sort.SITUATION for v in w.vars):
            # A situation quantifier without a recognized range never bounds.
            return Boundedness.UNBOUNDED
        return _classify(w.body, sigma, outer_roots)

    if isinstance(w, (ExistsSit, ForallSit)):
        return _classify_sit_quant(w, sigma, outer_roots)

    raise TypeError(f"not a formula: {w!r}")


def _bound_term_ok(t, outer_roots: tuple, var: Var) -> bool:
    r = sit_root(t)
    return isinstance(r, S0Term) or r == var or r in outer_roots


def _classify_sit_quant(w, sigma: SituationTerm, outer_roots: tuple) -> Boundedness:
    lam = sit_root(sigma)
    if sit_root(w.upper) != lam:
        return Boundedness.UNBOUNDED
    if not _bound_term_ok(w.lower, outer_roots, w.var):
        return Boundedness.UNBOUNDED

    strict = is_sit_subterm(w.upper, sigma)

    # The body splits into pieces bounded under the fresh variable and pieces
    # bounded under the outer term; each top-level conjunct may pick either.
    inner_sigma = w.var
    inner_roots = _roots_above(inner_sigma, outer_roots)
    out = Boundedness.STRICTLY_BOUNDED if strict else Boundedness.BOUNDED
    for piece in _conjunct_pieces(w.body):
        c_inner = _classify(piece, inner_sigma, inner_roots)
        c_outer = _classify(piece, sigma, outer_roots)
        best = c_inner if _RANK[c_inner] >= _RANK[c_outer] else c_outer
        out = _weaker(out, best)
    return out


def _conjunct_pieces(body: Formula) -> list:
    """Top-level conjuncts of a quantifier body.

    The recognized body shape is one optional negation over one conjunction;
    disjunctions and implications count because they abbreviate exactly that
    shape.  Every returned piece is classified as a unit (classification is
    negation-invariant, so negations on pieces are dropped).
    """
    if isinstance(body, And):
        return list(body.items)
    if isinstance(body, Or):
        return list(body.items)
    if isinstance(body, Implies):
        return [body.ante, body.cons]
    if isinstance(body, Iff):
        return [Implies(body.left, body.right), Implies(body.right, body.left)]
    if isinstance(body, Not):
        inner = body.body
        if isinstance(inner, And):
            return list(inner.items)
        return [inner]
    return [body]
