"""Domain theory model: declarations, axioms, obligation and compensation rules.

A theory bundles, for one application domain:

* action signatures, each with a precondition axiom (when the action can be
  executed);
* fluent signatures, each with a successor state axiom (how one more action
  changes the fluent), relational or functional;
* the initial database (ground facts at the empty history) and rigid facts
  that never change;
* obligation-producing declarations: which action puts which formula in
  force, of which taxonomy type, over which window;
* the compensation map from violated formulas to the amends owed for them.

Validation enforces the schema: one precondition axiom per action with a
body bounded by the current history and free of Poss, one successor state
axiom per fluent with a body strictly bounded by the current history, and
well-formed obligation/compensation declarations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .formulas import (
    Boundedness,
    Formula,
    SuppressedFormula,
    classify_bounded,
    free_vars,
    mentions_poss,
)
from .terms import Const, Sort, Var


@dataclass(frozen=True)
class Diagnostic:
    """One validation or parse finding, pointing back into the source text."""

    line: int
    col: int
    code: str
    message: str

    def render(self, path: str = "<theory>") -> str:
        return f"{path}:{self.line}:{self.col}: {self.code}: {self.message}"


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple  # Vars; the last one is time-sorted
    line: int = field(default=0, compare=False)

    @property
    def object_params(self) -> tuple:
        return self.params[:-1]


@dataclass(frozen=True)
class FluentDecl:
    name: str
    params: tuple  # object-sorted Vars
    functional: bool = False
    result_sort: Optional[Sort] = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Apa:
    """Precondition axiom: Poss(action(params), s) holds exactly when body does."""

    action: str
    params: tuple
    sit_var: Var
    body: Formula
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Ssa:
    """Successor state axiom for one fluent.

    Relational form: F(params, do(a, s)) holds iff body.
    Functional form: f(params, do(a, s)) == v iff body, where the value
    variable v stands for the candidate new value.
    """

    fluent: str
    params: tuple
    action_var: Var
    sit_var: Var
    body: Formula
    value_var: Optional[Var] = None
    line: int = field(default=0, compare=False)


class OblType(enum.Enum):
    PUNCTUAL = "punctual"
    ACHIEVEMENT = "achievement"
    MAINTENANCE = "maintenance"
    PERDURANT = "perdurant"


class AchievementVariant(enum.Enum):
    PREEMPTIVE = "preemptive"
    NONPREEMPTIVE = "nonpreemptive"


@dataclass(frozen=True)
class ObligationDecl:
    """An obligation-producing rule: executing the trigger puts a formula in force.

    The window is a duration counted from the trigger's time; the trigger
    fixes the left endpoint of the in-force interval.  The perdurant deadline
    is likewise an offset from the trigger time and must fall inside the
    window.  Stoppers are actions whose execution discharges the obligation.
    """

    trigger: str
    obliged: SuppressedFormula
    otype: OblType
    variant: Optional[AchievementVariant] = None
    window: int = 0
    deadline_offset: Optional[int] = None
    stoppers: frozenset = frozenset()
    line: int = field(default=0, compare=False)

    def type_label(self) -> str:
        if self.otype is OblType.ACHIEVEMENT and self.variant is not None:
            return f"achievement.{self.variant.value}"
        return self.otype.value


@dataclass(frozen=True)
class CompensationDecl:
    """Comp entry: when a formula matching the pattern is violated, the listed
    formulas come in force as amends, each over the given window."""

    pattern: SuppressedFormula
    comps: tuple
    window: int = 30
    line: int = field(default=0, compare=False)


@dataclass
class BasicActionTheory:
    name: str = "theory"
    epoch: int = 0
    actions: dict = field(default_factory=dict)  # name -> ActionDecl
    fluents: dict = field(default_factory=dict)  # name -> FluentDecl
    apas: dict = field(default_factory=dict)  # action name -> Apa
    ssas: dict = field(default_factory=dict)  # fluent name -> Ssa
    init: frozenset = frozenset()  # ground relational atoms (name, args)
    init_fun: dict = field(default_factory=dict)  # (name, args) -> value
    rigids: frozenset = frozenset()  # ground rigid atoms (name, args)
    obligation_decls: tuple = ()
    comp_decls: tuple = ()
    alphabet_hints: tuple = ()  # (action name, object args) templates for enumeration

    def rigid_names(self) -> set:
        return {name for name, _ in self.rigids}

    def constants(self) -> set:
        """Object constants mentioned anywhere in the theory."""
        out: set = set()
        for _, args in self.init | self.rigids:
            out.update(a for a in args if isinstance(a, Const))
        for (_, args), v in self.init_fun.items():
            out.update(a for a in args if isinstance(a, Const))
            if isinstance(v, Const):
                out.add(v)
        for name, args in self.alphabet_hints:
            out.update(a for a in args if isinstance(a, Const))
        for coll in (self.apas.values(), self.ssas.values()):
            for ax in coll:
                out.update(_formula_consts(ax.body))
        for decl in self.obligation_decls:
            out.update(_formula_consts(decl.obliged.body))
        for decl in self.comp_decls:
            out.update(_formula_consts(decl.pattern.body))
            for c in decl.comps:
                out.update(_formula_consts(c.body))
        return out

    def compensations_for(self, phi: SuppressedFormula) -> tuple:
        """Instantiated Comp set for a ground formula; empty when no pattern matches."""
        for decl in self.comp_decls:
            binding = _match_suppressed(decl.pattern, phi)
            if binding is not None:
                return tuple(c.instantiate(binding) for c in decl.comps), decl.window
        return (), 0


def _formula_consts(f) -> set:
    out: set = set()

    def term(t):
        if isinstance(t, Const):
            out.add(t)
        elif hasattr(t, "args"):
            for a in t.args:
                term(a)
        elif hasattr(t, "parent"):  # do-chain: scan its action and the rest
            term(t.action)
            term(t.parent)

    def go(f):
        if hasattr(f, "args"):
            for a in f.args:
                term(a)
        for attr in ("value", "left", "right", "action", "sit", "lower", "upper"):
            if hasattr(f, attr):
                term(getattr(f, attr))
        for attr in ("body", "ante", "cons"):
            if hasattr(f, attr):
                sub = getattr(f, attr)
                if sub is not None and not isinstance(sub, (str, int)):
                    go(sub)
        if hasattr(f, "items"):
            for x in f.items:
                go(x)

    go(f)
    return out


def _match_suppressed(pattern: SuppressedFormula, ground: SuppressedFormula):
    """One-way match of a pattern formula against a ground one.

    Supports the atom shapes used in obligation and compensation rules;
    returns the variable binding or None.
    """
    from .formulas import FluentAtom, RigidAtom

    p, g = pattern.body, ground.body
    if type(p) is not type(g):
        return None
    if isinstance(p, (FluentAtom, RigidAtom)):
        if p.name != g.name or len(p.args) != len(g.args):
            return None
        binding: dict = {}
        for pa, ga in zip(p.args, g.args):
            if isinstance(pa, Var):
                if binding.get(pa, ga) != ga:
                    return None
                binding[pa] = ga
            elif pa != ga:
                return None
        return binding
    return {} if p == g else None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_theory(bat: BasicActionTheory) -> list:
    """Check every structural invariant of a parsed theory.

    Returns a list of diagnostics; an empty list means the theory is valid.
    Each diagnostic names the offending axiom or declaration.
    """
    diags: list = []

    for name, decl in bat.actions.items():
        if not decl.params or decl.params[-1].sort is not Sort.TIME:
            diags.append(
                Diagnostic(decl.line, 1, "E_ACTION_TIME", f"action '{name}' must take a final time parameter")
            )
        if name not in bat.apas:
            diags.append(Diagnostic(decl.line, 1, "E_MISSING_APA", f"action '{name}' has no precondition axiom"))

    for name, decl in bat.fluents.items():
        if name not in bat.ssas:
            diags.append(Diagnostic(decl.line, 1, "E_MISSING_SSA", f"fluent '{name}' has no successor state axiom"))

    for name, apa in bat.apas.items():
        if mentions_poss(apa.body):
            diags.append(
                Diagnostic(apa.line, 1, "E_POSS_IN_APA", f"Poss in APA body: precondition of '{name}' mentions Poss")
            )
        cls = classify_bounded(apa.body, apa.sit_var)
        if cls is Boundedness.UNBOUNDED:
            diags.append(
                Diagnostic(apa.line, 1, "E_APA_UNBOUNDED", f"precondition of '{name}' is not bounded by s")
            )
        extra = _stray_free_vars(apa.body, set(apa.params) | {apa.sit_var})
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            diags.append(
                Diagnostic(apa.line, 1, "E_FREE_VARS", f"precondition of '{name}' has undeclared free variables: {names}")
            )

    for name, ssa in bat.ssas.items():
        cls = classify_bounded(ssa.body, ssa.sit_var)
        if cls is not Boundedness.STRICTLY_BOUNDED:
            diags.append(
                Diagnostic(
                    ssa.line,
                    1,
                    "E_SSA_NOT_STRICT",
                    f"successor state axiom of '{name}' is not strictly bounded by s (got {cls.value})",
                )
            )
        allowed = set(ssa.params) | {ssa.sit_var, ssa.action_var}
        if ssa.value_var is not None:
            allowed.add(ssa.value_var)
        extra = _stray_free_vars(ssa.body, allowed)
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            diags.append(
                Diagnostic(ssa.line, 1, "E_FREE_VARS", f"successor state axiom of '{name}' has undeclared free variables: {names}")
            )

    for fact_name, args in bat.init:
        fl = bat.fluents.get(fact_name)
        if fl is None or fl.functional:
            diags.append(Diagnostic(1, 1, "E_INIT_UNKNOWN", f"initial fact '{fact_name}' is not a declared relational fluent"))
        elif len(args) != len(fl.params):
            diags.append(Diagnostic(fl.line, 1, "E_INIT_ARITY", f"initial fact '{fact_name}' has wrong arity"))

    for (fact_name, args) in bat.init_fun:
        fl = bat.fluents.get(fact_name)
        if fl is None or not fl.functional:
            diags.append(Diagnostic(1, 1, "E_INIT_UNKNOWN", f"initial value for '{fact_name}' is not a declared functional fluent"))

    for decl in bat.obligation_decls:
        diags.extend(_validate_obligation(bat, decl))

    for decl in bat.comp_decls:
        for comp in (decl.pattern,) + decl.comps:
            fv = free_vars(comp.body)
            pattern_vars = free_vars(decl.pattern.body)
            if not fv <= pattern_vars:
                names = ", ".join(sorted(v.name for v in fv - pattern_vars))
                diags.append(
                    Diagnostic(decl.line, 1, "E_COMP_VARS", f"compensation for '{decl.pattern}' uses unbound variables: {names}")
                )
        if decl.window <= 0:
            diags.append(Diagnostic(decl.line, 1, "E_COMP_WINDOW", f"compensation for '{decl.pattern}' needs a positive window"))

    for name, args in bat.alphabet_hints:
        if name not in bat.actions:
            diags.append(Diagnostic(1, 1, "E_ALPHABET_UNKNOWN", f"alphabet entry '{name}' is not a declared action"))
        elif len(args) != len(bat.actions[name].object_params):
            diags.append(Diagnostic(1, 1, "E_ALPHABET_ARITY", f"alphabet entry '{name}' has wrong arity"))

    return diags


def _validate_obligation(bat: BasicActionTheory, decl: ObligationDecl) -> list:
    diags: list = []
    trigger = bat.actions.get(decl.trigger)
    if trigger is None:
        diags.append(Diagnostic(decl.line, 1, "E_OBL_TRIGGER", f"obligation trigger '{decl.trigger}' is not a declared action"))
        return diags

    trigger_names = {v.name for v in trigger.object_params}
    fv = free_vars(decl.obliged.body)
    loose = {v.name for v in fv} - trigger_names
    if loose:
        diags.append(
            Diagnostic(
                decl.line,
                1,
                "E_OBL_VARS",
                f"obligation on '{decl.trigger}' uses variables not bound by the trigger: {', '.join(sorted(loose))}",
            )
        )

    if decl.otype is not OblType.PUNCTUAL and decl.window <= 0:
        diags.append(Diagnostic(decl.line, 1, "E_OBL_WINDOW", f"obligation on '{decl.trigger}' needs window > 0"))
    if decl.otype is OblType.PERDURANT:
        d = decl.deadline_offset
        if d is None or not (0 < d < decl.window):
            diags.append(
                Diagnostic(decl.line, 1, "E_OBL_DEADLINE", f"perdurant obligation on '{decl.trigger}' needs 0 < deadline < window")
            )
    if decl.otype is OblType.ACHIEVEMENT and not decl.stoppers:
        diags.append(Diagnostic(decl.line, 1, "E_OBL_STOPPERS", f"achievement obligation on '{decl.trigger}' needs stoppers"))
    for s in decl.stoppers:
        if s not in bat.actions:
            diags.append(Diagnostic(decl.line, 1, "E_OBL_STOPPER_UNKNOWN", f"stopper '{s}' is not a declared action"))
    return diags


def _stray_free_vars(body: Formula, allowed: set) -> set:
    return {v for v in free_vars(body) if v not in allowed}
