"""Ground query evaluation over a fixed trace.

A fluent query at a history is answered by unwinding its successor state
axiom backwards, action by action, down to the initial database; there is
no regression machinery because every query here is ground and the trace is
fixed.  History-bounded quantifiers range over the finitely many prefixes
of the trace, object quantifiers over the constants mentioned by the theory
and the trace, action quantifiers over the trace's actions, and time
quantifiers over the times mentioned by the theory and the trace.

Results of fluent unwinding are memoized per (atom, prefix) pair, which
keeps evaluation linear per atom even for deeply nested axioms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .formulas import (
    PRECEDES,
    And,
    Eq,
    Exists,
    ExistsSit,
    FalseF,
    FluentAtom,
    Forall,
    ForallSit,
    Formula,
    FunFluentEq,
    Hole,
    Iff,
    Implies,
    Not,
    Or,
    PossAtom,
    RigidAtom,
    SitCmp,
    TimeCmp,
    TrueF,
)
from .terms import (
    ActionTerm,
    Const,
    DoTerm,
    S0,
    S0Term,
    SituationTerm,
    Sort,
    Var,
    action_time,
    is_sit_subterm,
    mk_do,
    sit_length,
    start,
)
from .theory import BasicActionTheory


class EvalError(Exception):
    pass


class Trace:
    """A ground action sequence over a theory, with every prefix history cached.

    The trace does not require non-decreasing action times; executability
    checks report time violations rather than the constructor hiding them.
    """

    def __init__(self, theory: BasicActionTheory, actions: Sequence[ActionTerm], _shared_memo: Optional[dict] = None):
        self.theory = theory
        self.actions = tuple(actions)
        for a in self.actions:
            decl = theory.actions.get(a.functor)
            if decl is None:
                raise EvalError(f"undeclared action {a.functor!r} in trace")
            if len(a.args) != len(decl.params):
                raise EvalError(f"action {a} does not match its declared arity")
            if not a.is_ground():
                raise EvalError(f"trace action {a} is not ground")
        sits = [S0]
        for a in self.actions:
            sits.append(mk_do(a, sits[-1]))
        self.situations = tuple(sits)
        self.starts = tuple(start(s, theory.epoch) for s in self.situations)
        self._memo: dict = _shared_memo if _shared_memo is not None else {}
        self._objects = None
        self._times = None

    def __len__(self) -> int:
        return len(self.actions)

    def extend(self, action: ActionTerm) -> "Trace":
        """A one-action-longer trace seeded with this trace's fluent memo.

        Prefix answers never change when the trace grows, so they carry over;
        the copy keeps sibling extensions of one trace from clashing at the
        new index.
        """
        return Trace(self.theory, self.actions + (action,), _shared_memo=dict(self._memo))

    def prefix(self, k: int) -> SituationTerm:
        return self.situations[k]

    def index_of(self, s: SituationTerm) -> int:
        k = sit_length(s)
        if k >= len(self.situations) or self.situations[k] != s:
            raise EvalError(f"situation {s} is not a prefix of this trace")
        return k

    def times_monotone(self) -> bool:
        return all(self.starts[i] <= self.starts[i + 1] for i in range(len(self.starts) - 1))

    def object_universe(self) -> tuple:
        if self._objects is None:
            objs = set(self.theory.constants())
            for a in self.actions:
                objs.update(x for x in a.args if isinstance(x, Const))
            self._objects = tuple(sorted(objs, key=lambda c: c.name))
        return self._objects

    def time_universe(self) -> tuple:
        if self._times is None:
            times = {self.theory.epoch}
            times.update(action_time(a) for a in self.actions)
            self._times = tuple(sorted(times))
        return self._times


def _resolve(term, env: dict):
    if isinstance(term, Var):
        if term not in env:
            raise EvalError(f"unbound variable {term.name}")
        return env[term]
    if isinstance(term, ActionTerm):
        return ActionTerm(term.functor, tuple(_resolve(a, env) for a in term.args))
    if isinstance(term, DoTerm):
        return DoTerm(_resolve(term.action, env), _resolve(term.parent, env))
    if isinstance(term, Hole):
        raise EvalError("formula still carries a suppressed situation; restore it first")
    return term


def eval_fluent(tr: Trace, atom, s: SituationTerm, env: Optional[dict] = None) -> bool:
    """Truth of one ground fluent atom (or functional-fluent equality) at a prefix."""
    env = env or {}
    if isinstance(atom, FluentAtom):
        args = tuple(_resolve(a, env) for a in atom.args)
        sit = _resolve(atom.sit if not isinstance(atom.sit, Hole) else s, env)
        return _fluent_truth(tr, atom.name, args, tr.index_of(sit))
    if isinstance(atom, FunFluentEq):
        args = tuple(_resolve(a, env) for a in atom.args)
        sit = _resolve(atom.sit if not isinstance(atom.sit, Hole) else s, env)
        value = _resolve(atom.value, env)
        return _fun_value(tr, atom.name, args, tr.index_of(sit)) == value
    raise EvalError(f"not a fluent atom: {atom!r}")


def _fluent_truth(tr: Trace, name: str, args: tuple, k: int) -> bool:
    decl = tr.theory.fluents.get(name)
    if decl is None or decl.functional:
        raise EvalError(f"undeclared relational fluent {name!r}")
    key = ("rel", name, args, k)
    hit = tr._memo.get(key)
    if hit is not None:
        return hit
    if k == 0:
        out = (name, args) in tr.theory.init
    else:
        ssa = tr.theory.ssas.get(name)
        if ssa is None:
            raise EvalError(f"fluent {name!r} has no successor state axiom")
        env = dict(zip(ssa.params, args))
        env[ssa.action_var] = tr.actions[k - 1]
        env[ssa.sit_var] = tr.prefix(k - 1)
        out = eval_formula(tr, ssa.body, env)
    tr._memo[key] = out
    return out


def _fun_value(tr: Trace, name: str, args: tuple, k: int):
    """Value of a functional fluent at a prefix, None when undefined.

    The axiom body is read disjunct by disjunct in the written order, and the
    first disjunct that determines a value wins; writing the action case
    first therefore makes the newest assignment override the inherited one.
    """
    decl = tr.theory.fluents.get(name)
    if decl is None or not decl.functional:
        raise EvalError(f"undeclared functional fluent {name!r}")
    key = ("fun", name, args, k)
    if key in tr._memo:
        return tr._memo[key]
    if k == 0:
        out = tr.theory.init_fun.get((name, args))
    else:
        ssa = tr.theory.ssas.get(name)
        if ssa is None:
            raise EvalError(f"fluent {name!r} has no successor state axiom")
        env = dict(zip(ssa.params, args))
        env[ssa.action_var] = tr.actions[k - 1]
        env[ssa.sit_var] = tr.prefix(k - 1)
        disjuncts = ssa.body.items if isinstance(ssa.body, Or) else (ssa.body,)
        out = None
        candidates = _candidates_for_sort(tr, decl.result_sort)
        for d in disjuncts:
            hits = [w for w in candidates if eval_formula(tr, d, {**env, ssa.value_var: w})]
            if len(hits) > 1:
                raise EvalError(f"functional fluent {name!r} takes several values at once: {hits}")
            if hits:
                out = hits[0]
                break
    tr._memo[key] = out
    return out


def _candidates_for_sort(tr: Trace, sort: Sort) -> tuple:
    if sort is Sort.OBJECT:
        return tr.object_universe()
    if sort is Sort.TIME:
        return tr.time_universe()
    if sort is Sort.ACTION:
        return tr.actions
    raise EvalError(f"cannot enumerate candidates of sort {sort.value}")


def eval_poss(tr: Trace, a: ActionTerm, s: SituationTerm) -> bool:
    """Whether the action's precondition holds at the given prefix."""
    apa = tr.theory.apas.get(a.functor)
    if apa is None:
        raise EvalError(f"undeclared action {a.functor!r}")
    if len(a.args) != len(apa.params):
        raise EvalError(f"action {a} does not match its declared arity")
    env = dict(zip(apa.params, a.args))
    env[apa.sit_var] = s
    return eval_formula(tr, apa.body, env)


def eval_formula(tr: Trace, w: Formula, env: Optional[dict] = None) -> bool:
    """Evaluate a formula whose quantifier ranges are finitely resolvable on this trace."""
    env = dict(env or {})

    def go(w: Formula, env: dict) -> bool:
        if isinstance(w, TrueF):
            return True
        if isinstance(w, FalseF):
            return False
        if isinstance(w, (FluentAtom, FunFluentEq)):
            if isinstance(w.sit, Hole):
                raise EvalError("formula still carries a suppressed situation; restore it first")
            return eval_fluent(tr, w, w.sit, env)
        if isinstance(w, RigidAtom):
            args = tuple(_resolve(a, env) for a in w.args)
            return (w.name, args) in tr.theory.rigids
        if isinstance(w, PossAtom):
            act = _resolve(w.action, env)
            sit = _resolve(w.sit, env)
            return eval_poss(tr, act, sit)
        if isinstance(w, Eq):
            return _resolve(w.left, env) == _resolve(w.right, env)
        if isinstance(w, TimeCmp):
            l, r = _resolve(w.left, env), _resolve(w.right, env)
            if not isinstance(l, int) or not isinstance(r, int):
                raise EvalError(f"time comparison over non-times: {l!r} {w.op} {r!r}")
            return l < r if w.op == "<" else l <= r
        if isinstance(w, SitCmp):
            l, r = _resolve(w.left, env), _resolve(w.right, env)
            return _sit_cmp(w.op, l, r)
        if isinstance(w, Not):
            return not go(w.body, env)
        if isinstance(w, And):
            return all(go(x, env) for x in w.items)
        if isinstance(w, Or):
            return any(go(x, env) for x in w.items)
        if isinstance(w, Implies):
            return (not go(w.ante, env)) or go(w.cons, env)
        if isinstance(w, Iff):
            return go(w.left, env) == go(w.right, env)
        if isinstance(w, (Exists, Forall)):
            if any(v.sort is Sort.SITUATION for v in w.vars):
                raise EvalError("unbounded situation quantifier: no upper history constraint")
            return _eval_quant(w, env)
        if isinstance(w, (ExistsSit, ForallSit)):
            return _eval_sit_quant(w, env)
        raise EvalError(f"not a formula: {w!r}")

    def _eval_quant(w, env: dict) -> bool:
        domains = [_candidates_for_sort(tr, v.sort) for v in w.vars]
        want_any = isinstance(w, Exists)

        def rec(i: int, env: dict) -> bool:
            if i == len(w.vars):
                return go(w.body, env)
            for val in domains[i]:
                env2 = {**env, w.vars[i]: val}
                r = rec(i + 1, env2)
                if r and want_any:
                    return True
                if not r and not want_any:
                    return False
            return not want_any

        return rec(0, env)

    def _eval_sit_quant(w, env: dict) -> bool:
        lower = _resolve(w.lower, env)
        upper = _resolve(w.upper, env)
        hi = tr.index_of(upper)
        lo = tr.index_of(lower) if not isinstance(lower, S0Term) else 0
        lo_strict = w.low_rel == PRECEDES
        hi_strict = w.high_rel == PRECEDES
        first = lo + 1 if lo_strict else lo
        last = hi - 1 if hi_strict else hi
        rng = range(first, last + 1)
        if isinstance(w, ExistsSit):
            return any(go(w.body, {**env, w.var: tr.prefix(k)}) for k in rng)
        return all(go(w.body, {**env, w.var: tr.prefix(k)}) for k in rng)

    return go(w, env)


def _sit_cmp(op: str, l, r) -> bool:
    if not isinstance(l, (S0Term, DoTerm)) or not isinstance(r, (S0Term, DoTerm)):
        raise EvalError(f"history comparison over non-histories: {l!r} {op} {r!r}")
    if op == PRECEDES:
        return sit_length(l) < sit_length(r) and is_sit_subterm(l, r)
    return is_sit_subterm(l, r)


# ---------------------------------------------------------------------------
# Executability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PendingCompensation:
    """A violation whose compensation is still owed.

    An ordinary action executed once the violated obligation exists
    (action index >= active_from_action), at or after the earliest time at
    which the compensation action is possible, while the compensation is
    still owed, makes the history non-executable.  Before the obligation's
    activation the compensation is possible nowhere, so earlier actions are
    never constrained.  Applying the compensation at time `applied_at`
    releases actions from that time on.
    """

    formula_text: str
    min_enabling_time: int
    active_from_action: int = 0
    applied_at: Optional[int] = None


def executable(
    tr: Trace,
    s: Optional[SituationTerm] = None,
    pending: Iterable[PendingCompensation] = (),
) -> bool:
    ok, _ = executability_report(tr, s, pending)
    return ok


def executability_report(
    tr: Trace,
    s: Optional[SituationTerm] = None,
    pending: Iterable[PendingCompensation] = (),
):
    """Check a history for executability; returns (verdict, reasons).

    A history is executable when every action along it was possible in the
    prefix it extended, action times never decrease, and no action ran while
    a due compensation was still owed.
    """
    upto = tr.index_of(s) if s is not None else len(tr.actions)
    pending = tuple(pending)
    reasons = []
    for k in range(upto):
        a = tr.actions[k]
        at = action_time(a)
        if tr.starts[k] > at:
            reasons.append(f"time goes backwards: start {tr.starts[k]} > time({a}) = {at}")
        elif not eval_poss(tr, a, tr.prefix(k)):
            reasons.append(f"Poss({a}) is false at {tr.prefix(k)}")
        for p in pending:
            if k < p.active_from_action:
                continue
            if p.applied_at is not None and at >= p.applied_at:
                continue
            if at >= p.min_enabling_time:
                reasons.append(
                    f"{a} executed at {at} while compensation of {p.formula_text} "
                    f"was due from {p.min_enabling_time}"
                )
    return (not reasons), reasons
