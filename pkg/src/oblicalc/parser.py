"""Parser for theory files and trace files.

Theory files are block structured:

    epoch 0
    rigid: door(D). manager(M).
    action unlock(d: object, t: time)
      poss: door(d) and at(d, s) and locked(d, s)
    fluent locked(d: object)
      ssa: exists t (a == lock(d, t)) or (locked(d, s) and ...)
    funfluent notifiedManager(): object
      ssa: exists t (manager(v) and a == notify(v, t)) or notifiedManager(s) == v
    init: locked(D). at(D).
    obliges unlock -> locked(d) type achievement nonpreemptive window 30 stoppers {lock}
    compensate locked(d) with {breachNotified(d)} window 30
    alphabet: unlock(D). lock(D).

Formula syntax: `and or not implies iff exists forall`, history comparisons
`<<` (strict) and `<<=`, time comparisons `<` and `<=`, equality `==` and
`!=`.  Uppercase-initial identifiers are constants, lowercase ones are
variables; `a`, `s` and (for functional fluents) `v` are the conventional
axiom variables.  Quantified variable sorts may be annotated (`exists x:
object (...)`) and are otherwise inferred from use.  Comments run from `#`
to end of line.

Trace files carry one ground action per line: `unlock(D, 10)`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .formulas import (
    FALSE,
    HOLE,
    PRECEDES,
    PRECEDES_EQ,
    TRUE,
    And,
    Eq,
    Exists,
    ExistsSit,
    FluentAtom,
    Forall,
    ForallSit,
    Formula,
    FunFluentEq,
    Iff,
    Implies,
    Not,
    Or,
    PossAtom,
    RigidAtom,
    SitCmp,
    SuppressedFormula,
    TimeCmp,
    formula_to_text,
)
from .terms import S0, ActionTerm, Const, Sort, Var
from .theory import (
    AchievementVariant,
    ActionDecl,
    Apa,
    BasicActionTheory,
    CompensationDecl,
    Diagnostic,
    FluentDecl,
    ObligationDecl,
    OblType,
    Ssa,
)

_BLOCK_KEYWORDS = {
    "epoch",
    "rigid",
    "action",
    "fluent",
    "funfluent",
    "init",
    "obliges",
    "compensate",
    "alphabet",
    "poss",
    "ssa",
}

_SORT_NAMES = {
    "object": Sort.OBJECT,
    "action": Sort.ACTION,
    "time": Sort.TIME,
    "situation": Sort.SITUATION,
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<=|<<|<=|==|!=|->|[(){},:.<])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "name", "int", "op", "eof"
    value: str
    line: int
    col: int


class TheoryParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise TheoryParseError(Diagnostic(line, col, "E_SYNTAX", f"unexpected character {text[pos]!r}"))
        s = m.group(0)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tk = {"int": "int", "name": "name", "op": "op"}[kind]
            tokens.append(Token(tk, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# --------------------------------------------------------------------------
# Raw (untyped) formula trees.  Sorts and atom kinds are resolved afterwards,
# once every declaration in the file is known.
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RName:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class RInt:
    value: int
    line: int
    col: int


@dataclass(frozen=True)
class RCall:
    name: str
    args: tuple
    line: int
    col: int


@dataclass(frozen=True)
class RTrue:
    pass


@dataclass(frozen=True)
class RFalse:
    pass


@dataclass(frozen=True)
class RNot:
    body: object


@dataclass(frozen=True)
class RAnd:
    items: tuple


@dataclass(frozen=True)
class ROr:
    items: tuple


@dataclass(frozen=True)
class RImplies:
    ante: object
    cons: object


@dataclass(frozen=True)
class RIff:
    left: object
    right: object


@dataclass(frozen=True)
class RCmp:
    first: object
    rest: tuple  # of (op, term)
    line: int
    col: int


@dataclass(frozen=True)
class RQuant:
    kind: str  # "exists" | "forall"
    vars: tuple  # of (name, sort annotation or None, line, col)
    body: object
    line: int
    col: int


class _TokenStream:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at_name(self, *names: str) -> bool:
        t = self.peek()
        return t.kind == "name" and t.value in names

    def at_op(self, *ops: str) -> bool:
        t = self.peek()
        return t.kind == "op" and t.value in ops

    def expect_op(self, op: str) -> Token:
        t = self.peek()
        if not self.at_op(op):
            raise TheoryParseError(Diagnostic(t.line, t.col, "E_SYNTAX", f"expected {op!r}, found {t.value!r}"))
        return self.next()

    def expect_name(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t.kind != "name":
            raise TheoryParseError(Diagnostic(t.line, t.col, "E_SYNTAX", f"expected {what}, found {t.value!r}"))
        return self.next()

    def expect_int(self) -> Token:
        t = self.peek()
        if t.kind != "int":
            raise TheoryParseError(Diagnostic(t.line, t.col, "E_SYNTAX", f"expected integer, found {t.value!r}"))
        return self.next()

    def at_block_keyword(self) -> bool:
        t = self.peek()
        return t.kind == "name" and t.value in _BLOCK_KEYWORDS or t.kind == "eof"


_CMP_OPS = ("==", "!=", PRECEDES_EQ, PRECEDES, "<=", "<")


def _parse_formula(ts: _TokenStream):
    return _parse_iff(ts)


def _parse_iff(ts):
    left = _parse_implies(ts)
    while ts.at_name("iff"):
        ts.next()
        left = RIff(left, _parse_implies(ts))
    return left


def _parse_implies(ts):
    left = _parse_or(ts)
    if ts.at_name("implies"):
        ts.next()
        return RImplies(left, _parse_implies(ts))
    return left


def _parse_or(ts):
    items = [_parse_and(ts)]
    while ts.at_name("or"):
        ts.next()
        items.append(_parse_and(ts))
    return items[0] if len(items) == 1 else ROr(tuple(items))


def _parse_and(ts):
    items = [_parse_unary(ts)]
    while ts.at_name("and"):
        ts.next()
        items.append(_parse_unary(ts))
    return items[0] if len(items) == 1 else RAnd(tuple(items))


def _parse_unary(ts):
    t = ts.peek()
    if ts.at_name("not"):
        ts.next()
        return RNot(_parse_unary(ts))
    if ts.at_name("true"):
        ts.next()
        return RTrue()
    if ts.at_name("false"):
        ts.next()
        return RFalse()
    if ts.at_name("exists", "forall"):
        return _parse_quant(ts)
    if ts.at_op("("):
        ts.next()
        f = _parse_formula(ts)
        ts.expect_op(")")
        return f
    return _parse_comparison(ts)


def _parse_quant(ts):
    kw = ts.next()
    names = []
    while True:
        nt = ts.expect_name("variable")
        annot = None
        if ts.at_op(":"):
            ts.next()
            st = ts.expect_name("sort name")
            if st.value not in _SORT_NAMES:
                raise TheoryParseError(Diagnostic(st.line, st.col, "E_SYNTAX", f"unknown sort {st.value!r}"))
            annot = _SORT_NAMES[st.value]
        names.append((nt.value, annot, nt.line, nt.col))
        if ts.at_op(","):
            ts.next()
            continue
        break
    ts.expect_op("(")
    body = _parse_formula(ts)
    ts.expect_op(")")
    return RQuant(kw.value, tuple(names), body, kw.line, kw.col)


def _parse_comparison(ts):
    t = ts.peek()
    first = _parse_term(ts)
    rest = []
    while ts.at_op(*_CMP_OPS):
        op = ts.next().value
        rest.append((op, _parse_term(ts)))
    if not rest:
        if isinstance(first, RCall):
            return first
        raise TheoryParseError(Diagnostic(t.line, t.col, "E_SYNTAX", f"expected a formula at {t.value!r}"))
    return RCmp(first, tuple(rest), t.line, t.col)


def _parse_term(ts):
    t = ts.peek()
    if t.kind == "int":
        ts.next()
        return RInt(int(t.value), t.line, t.col)
    name = ts.expect_name("term")
    if ts.at_op("("):
        ts.next()
        args = []
        if not ts.at_op(")"):
            while True:
                args.append(_parse_term(ts))
                if ts.at_op(","):
                    ts.next()
                    continue
                break
        ts.expect_op(")")
        return RCall(name.value, tuple(args), name.line, name.col)
    return RName(name.value, name.line, name.col)


# --------------------------------------------------------------------------
# Elaboration: raw trees to sorted formulas
# --------------------------------------------------------------------------


class _Elaborator:
    def __init__(self, bat: BasicActionTheory, rigid_sigs: dict, diags: list):
        self.bat = bat
        self.rigid_sigs = rigid_sigs
        self.diags = diags

    def error(self, node, code: str, message: str) -> Formula:
        line = getattr(node, "line", 1)
        col = getattr(node, "col", 1)
        self.diags.append(Diagnostic(line, col, code, message))
        return TRUE

    # -- sort inference ----------------------------------------------------

    def _call_arg_sorts(self, name: str, nargs: int, suppressed: bool):
        if name in self.bat.actions:
            return [p.sort for p in self.bat.actions[name].params]
        if name in self.bat.fluents:
            fl = self.bat.fluents[name]
            sorts = [p.sort for p in fl.params]
            if not suppressed:
                sorts.append(Sort.SITUATION)
            return sorts
        if name in self.rigid_sigs:
            return [Sort.OBJECT] * self.rigid_sigs[name]
        return None

    def infer_sorts(self, names: set, raw, suppressed: bool) -> dict:
        found: dict = {n: set() for n in names}

        def note(term, sort):
            if isinstance(term, RName) and term.name in found:
                found[term.name].add(sort)

        def term_sort_hint(term):
            if isinstance(term, RInt):
                return Sort.TIME
            if isinstance(term, RCall):
                if term.name in self.bat.actions:
                    return Sort.ACTION
                fl = self.bat.fluents.get(term.name)
                if fl is not None and fl.functional:
                    return fl.result_sort
            if isinstance(term, RName):
                if term.name == "S0":
                    return Sort.SITUATION
                if term.name[0].isupper():
                    return Sort.OBJECT
            return None

        def walk_term(term):
            if isinstance(term, RCall):
                sorts = self._call_arg_sorts(term.name, len(term.args), suppressed)
                for i, a in enumerate(term.args):
                    if sorts is not None and i < len(sorts):
                        note(a, sorts[i])
                    walk_term(a)

        def walk(node, shadow):
            if isinstance(node, RCall):
                walk_term(node)
            elif isinstance(node, RCmp):
                chain = [node.first] + [t for _, t in node.rest]
                ops = [op for op, _ in node.rest]
                for t in chain:
                    walk_term(t)
                for i, op in enumerate(ops):
                    l, r = chain[i], chain[i + 1]
                    if op in (PRECEDES, PRECEDES_EQ):
                        note(l, Sort.SITUATION)
                        note(r, Sort.SITUATION)
                    elif op in ("<", "<="):
                        note(l, Sort.TIME)
                        note(r, Sort.TIME)
                    else:
                        lh, rh = term_sort_hint(l), term_sort_hint(r)
                        if lh is not None:
                            note(r, lh)
                        if rh is not None:
                            note(l, rh)
            elif isinstance(node, RNot):
                walk(node.body, shadow)
            elif isinstance(node, (RAnd, ROr)):
                for x in node.items:
                    walk(x, shadow)
            elif isinstance(node, RImplies):
                walk(node.ante, shadow)
                walk(node.cons, shadow)
            elif isinstance(node, RIff):
                walk(node.left, shadow)
                walk(node.right, shadow)
            elif isinstance(node, RQuant):
                inner_shadow = shadow | {n for n, _, _, _ in node.vars}
                saved = {n: found.pop(n) for n in inner_shadow if n in found}
                walk(node.body, inner_shadow)
                found.update(saved)

        walk(raw, set())
        return found

    # -- formula elaboration -------------------------------------------------

    def formula(self, raw, env: dict, suppressed: bool = False, implicit: bool = False) -> Formula:
        if isinstance(raw, RTrue):
            return TRUE
        if isinstance(raw, RFalse):
            return FALSE
        if isinstance(raw, RNot):
            return Not(self.formula(raw.body, env, suppressed, implicit))
        if isinstance(raw, RAnd):
            return And(tuple(self.formula(x, env, suppressed, implicit) for x in raw.items))
        if isinstance(raw, ROr):
            return Or(tuple(self.formula(x, env, suppressed, implicit) for x in raw.items))
        if isinstance(raw, RImplies):
            return Implies(self.formula(raw.ante, env, suppressed, implicit), self.formula(raw.cons, env, suppressed, implicit))
        if isinstance(raw, RIff):
            return Iff(self.formula(raw.left, env, suppressed, implicit), self.formula(raw.right, env, suppressed, implicit))
        if isinstance(raw, RQuant):
            return self._quant(raw, env, suppressed, implicit)
        if isinstance(raw, RCmp):
            return self._comparison(raw, env, suppressed, implicit)
        if isinstance(raw, RCall):
            return self._atom(raw, env, suppressed, implicit)
        raise TheoryParseError(Diagnostic(1, 1, "E_SYNTAX", f"cannot elaborate {raw!r}"))

    def _quant(self, raw: RQuant, env: dict, suppressed: bool, implicit: bool) -> Formula:
        names = {n for n, _, _, _ in raw.vars}
        inferred = self.infer_sorts(names, raw.body, suppressed)
        new_vars = []
        inner_env = dict(env)
        for n, annot, line, col in raw.vars:
            sorts = inferred.get(n, set())
            if annot is not None:
                sort = annot
                if sorts and sorts != {annot}:
                    self.diags.append(
                        Diagnostic(line, col, "E_SORT", f"variable '{n}' annotated {annot.value} but used as {', '.join(s.value for s in sorts)}")
                    )
            elif len(sorts) == 1:
                sort = next(iter(sorts))
            elif not sorts:
                self.diags.append(Diagnostic(line, col, "E_SORT", f"cannot infer the sort of variable '{n}'"))
                sort = Sort.OBJECT
            else:
                self.diags.append(
                    Diagnostic(line, col, "E_SORT", f"variable '{n}' used at conflicting sorts: {', '.join(sorted(s.value for s in sorts))}")
                )
                sort = Sort.OBJECT
            v = Var(n, sort)
            new_vars.append(v)
            inner_env[n] = v

        body = self.formula(raw.body, inner_env, suppressed, implicit)

        # Peel situation variables into their own (possibly range-bounded) layer.
        sit_vars = [v for v in new_vars if v.sort is Sort.SITUATION]
        other = tuple(v for v in new_vars if v.sort is not Sort.SITUATION)
        out = body
        for v in reversed(sit_vars):
            out = self._normalize_sit_quant(raw.kind, v, out)
        if other:
            out = (Exists if raw.kind == "exists" else Forall)(other, out)
        return out

    def _normalize_sit_quant(self, kind: str, v: Var, body: Formula) -> Formula:
        if kind == "exists":
            pieces = list(body.items) if isinstance(body, And) else [body]
            lower, low_rel, upper, high_rel, rest = self._extract_bounds(v, pieces)
            if upper is not None:
                inner = And(tuple(rest)) if len(rest) > 1 else (rest[0] if rest else TRUE)
                return ExistsSit(v, lower, low_rel, high_rel, upper, inner)
            return Exists((v,), body)
        # forall: bounds live in the antecedent of an implication
        if isinstance(body, Implies):
            ante = body.ante
            pieces = list(ante.items) if isinstance(ante, And) else [ante]
            lower, low_rel, upper, high_rel, rest = self._extract_bounds(v, pieces)
            if upper is not None:
                inner = body.cons if not rest else Implies(And(tuple(rest)) if len(rest) > 1 else rest[0], body.cons)
                return ForallSit(v, lower, low_rel, high_rel, upper, inner)
        return Forall((v,), body)

    @staticmethod
    def _extract_bounds(v: Var, pieces: list):
        lower, low_rel = S0, PRECEDES_EQ
        upper, high_rel = None, None
        rest = []
        for p in pieces:
            if isinstance(p, SitCmp) and p.left == v and p.right != v and upper is None:
                upper, high_rel = p.right, p.op
            elif isinstance(p, SitCmp) and p.right == v and p.left != v:
                lower, low_rel = p.left, p.op
            else:
                rest.append(p)
        return lower, low_rel, upper, high_rel, rest

    def _comparison(self, raw: RCmp, env: dict, suppressed: bool, implicit: bool) -> Formula:
        chain = [raw.first] + [t for _, t in raw.rest]
        ops = [op for op, _ in raw.rest]
        conjuncts = []
        for i, op in enumerate(ops):
            conjuncts.append(self._cmp_pair(chain[i], op, chain[i + 1], env, suppressed, implicit, raw))
        return conjuncts[0] if len(conjuncts) == 1 else And(tuple(conjuncts))

    def _cmp_pair(self, l, op, r, env, suppressed, implicit, ctx) -> Formula:
        if op in (PRECEDES, PRECEDES_EQ):
            return SitCmp(op, self._term(l, env, Sort.SITUATION, implicit), self._term(r, env, Sort.SITUATION, implicit))
        if op in ("<", "<="):
            return TimeCmp(op, self._term(l, env, Sort.TIME, implicit), self._term(r, env, Sort.TIME, implicit))

        # == / != ; decide which equality this is
        def call_kind(t):
            if isinstance(t, RCall):
                if t.name in self.bat.actions:
                    return "action"
                fl = self.bat.fluents.get(t.name)
                if fl is not None and fl.functional:
                    return "funfluent"
            return None

        lk, rk = call_kind(l), call_kind(r)
        if lk == "action" or rk == "action":
            act_raw, other = (l, r) if lk == "action" else (r, l)
            act = self._action_term(act_raw, env, implicit)
            other_t = self._term(other, env, Sort.ACTION, implicit)
            out: Formula = Eq(other_t, act)
        elif lk == "funfluent" or rk == "funfluent":
            fn_raw, other = (l, r) if lk == "funfluent" else (r, l)
            fl = self.bat.fluents[fn_raw.name]
            args, sit = self._fluent_args(fn_raw, fl, env, suppressed, implicit)
            value = self._term(other, env, fl.result_sort, implicit)
            out = FunFluentEq(fn_raw.name, args, sit, value)
        else:
            lt = self._term(l, env, None, implicit)
            rt = self._term(r, env, None, implicit)
            out = Eq(lt, rt)
        return Not(out) if op == "!=" else out

    def _fluent_args(self, raw: RCall, fl: FluentDecl, env, suppressed, implicit):
        want = len(fl.params) + (0 if suppressed else 1)
        if len(raw.args) != want:
            self.error(raw, "E_ARITY", f"'{raw.name}' expects {want} argument(s), got {len(raw.args)}")
            return tuple(), HOLE
        if suppressed:
            args = tuple(self._term(a, env, p.sort, implicit) for a, p in zip(raw.args, fl.params))
            return args, HOLE
        args = tuple(self._term(a, env, p.sort, implicit) for a, p in zip(raw.args[:-1], fl.params))
        sit = self._term(raw.args[-1], env, Sort.SITUATION, implicit)
        return args, sit

    def _atom(self, raw: RCall, env: dict, suppressed: bool, implicit: bool) -> Formula:
        name = raw.name
        if name == "Poss":
            if suppressed or len(raw.args) != 2:
                return self.error(raw, "E_ARITY", "Poss takes an action and a situation")
            act = self._action_term(raw.args[0], env, implicit)
            sit = self._term(raw.args[1], env, Sort.SITUATION, implicit)
            return PossAtom(act, sit)
        fl = self.bat.fluents.get(name)
        if fl is not None:
            if fl.functional:
                return self.error(raw, "E_FUNCTIONAL_ATOM", f"functional fluent '{name}' must be compared with ==")
            args, sit = self._fluent_args(raw, fl, env, suppressed, implicit)
            return FluentAtom(name, args, sit)
        if name in self.rigid_sigs:
            if len(raw.args) != self.rigid_sigs[name]:
                return self.error(raw, "E_ARITY", f"rigid '{name}' expects {self.rigid_sigs[name]} argument(s)")
            return RigidAtom(name, tuple(self._term(a, env, Sort.OBJECT, implicit) for a in raw.args))
        if name in self.bat.actions:
            return self.error(raw, "E_ATOM", f"action '{name}' cannot stand as a formula; compare it with ==")
        return self.error(raw, "E_UNKNOWN", f"unknown predicate '{name}'")

    def _action_term(self, raw, env, implicit) -> ActionTerm:
        if not isinstance(raw, RCall) or raw.name not in self.bat.actions:
            self.error(raw, "E_ACTION", "expected an action term here")
            return ActionTerm("<error>", (0,))
        decl = self.bat.actions[raw.name]
        if len(raw.args) != len(decl.params):
            self.error(raw, "E_ARITY", f"action '{raw.name}' expects {len(decl.params)} argument(s)")
            return ActionTerm("<error>", (0,))
        args = tuple(self._term(a, env, p.sort, implicit) for a, p in zip(raw.args, decl.params))
        return ActionTerm(raw.name, args)

    def _term(self, raw, env: dict, expected: Optional[Sort], implicit: bool):
        if isinstance(raw, RInt):
            return raw.value
        if isinstance(raw, RName):
            if raw.name == "S0":
                return S0
            if raw.name in env:
                v = env[raw.name]
                if expected is not None and v.sort is not expected:
                    self.error(raw, "E_SORT", f"variable '{raw.name}' is {v.sort.value}-sorted, expected {expected.value}")
                return v
            if raw.name[0].isupper():
                return Const(raw.name)
            if implicit:
                v = Var(raw.name, expected or Sort.OBJECT)
                env[raw.name] = v
                return v
            self.error(raw, "E_UNKNOWN_VAR", f"unknown variable '{raw.name}'")
            return Const(raw.name)
        if isinstance(raw, RCall):
            self.error(raw, "E_TERM", f"nested term '{raw.name}(...)' is not allowed here")
            return Const(raw.name)
        raise TheoryParseError(Diagnostic(1, 1, "E_SYNTAX", f"cannot elaborate term {raw!r}"))


# --------------------------------------------------------------------------
# Theory file parsing
# --------------------------------------------------------------------------


def parse_theory(text: str, name: str = "theory"):
    """Parse a theory file.

    Returns (theory, diagnostics).  A hard syntax error yields (None, [diag]);
    recoverable problems (duplicate declarations, sort errors) are collected
    while parsing continues.
    """
    try:
        tokens = tokenize(text)
        return _parse_theory_tokens(tokens, name)
    except TheoryParseError as e:
        return None, [e.diagnostic]


def _parse_theory_tokens(tokens: list, name: str):
    ts = _TokenStream(tokens)
    diags: list = []
    bat = BasicActionTheory(name=name)

    raw_apas: list = []  # (action name, raw formula, line)
    raw_ssas: list = []  # (fluent name, raw formula, line)
    raw_obliges: list = []
    raw_compensates: list = []
    init_facts: list = []
    rigid_facts: list = []
    alphabet_facts: list = []

    def duplicate(kind: str, nm: str, line: int, col: int):
        diags.append(Diagnostic(line, col, "E_DUPLICATE", f"duplicate {kind} for '{nm}'"))

    while not ts.peek().kind == "eof":
        t = ts.peek()
        if t.kind != "name" or t.value not in _BLOCK_KEYWORDS:
            diags.append(Diagnostic(t.line, t.col, "E_SYNTAX", f"expected a block keyword, found {t.value!r}"))
            return None, diags

        if t.value == "epoch":
            ts.next()
            bat.epoch = int(ts.expect_int().value)
        elif t.value in ("action", "fluent", "funfluent"):
            _parse_signature_block(ts, bat, diags, raw_apas, raw_ssas, duplicate)
        elif t.value in ("init", "rigid", "alphabet"):
            kw = ts.next()
            ts.expect_op(":")
            target = {"init": init_facts, "rigid": rigid_facts, "alphabet": alphabet_facts}[kw.value]
            while not ts.at_block_keyword():
                target.append(_parse_fact(ts))
        elif t.value == "obliges":
            raw_obliges.append(_parse_obliges(ts))
        elif t.value == "compensate":
            raw_compensates.append(_parse_compensate(ts))
        else:
            diags.append(Diagnostic(t.line, t.col, "E_SYNTAX", f"misplaced keyword {t.value!r}"))
            return None, diags

    # Rigid signatures come from the rigid facts themselves.
    rigid_sigs: dict = {}
    for fact in rigid_facts:
        fname, fargs, fval, line, col = fact
        if fval is not None:
            diags.append(Diagnostic(line, col, "E_RIGID_FACT", "rigid facts cannot carry values"))
            continue
        rigid_sigs.setdefault(fname, len(fargs))
        if rigid_sigs[fname] != len(fargs):
            diags.append(Diagnostic(line, col, "E_RIGID_ARITY", f"rigid '{fname}' used at two arities"))

    elab = _Elaborator(bat, rigid_sigs, diags)

    for action_name, raw, line in raw_apas:
        decl = bat.actions[action_name]
        env = {p.name: p for p in decl.params}
        env["s"] = Var("s", Sort.SITUATION)
        body = elab.formula(raw, env)
        bat.apas[action_name] = Apa(action_name, decl.params, env["s"], body, line)

    for fluent_name, raw, line in raw_ssas:
        decl = bat.fluents[fluent_name]
        env = {p.name: p for p in decl.params}
        env["a"] = Var("a", Sort.ACTION)
        env["s"] = Var("s", Sort.SITUATION)
        value_var = None
        if decl.functional:
            value_var = Var("v", decl.result_sort)
            env["v"] = value_var
        body = elab.formula(raw, env)
        bat.ssas[fluent_name] = Ssa(fluent_name, decl.params, env["a"], env["s"], body, value_var, line)

    rigid_set = set()
    for fname, fargs, fval, line, col in rigid_facts:
        args = _ground_args(fargs, diags, line, col)
        if args is not None:
            rigid_set.add((fname, args))
    bat.rigids = frozenset(rigid_set)

    init_set = set()
    for fname, fargs, fval, line, col in init_facts:
        args = _ground_args(fargs, diags, line, col)
        if args is None:
            continue
        if fval is None:
            init_set.add((fname, args))
        else:
            val = fval if isinstance(fval, int) else Const(fval)
            bat.init_fun[(fname, args)] = val
    bat.init = frozenset(init_set)

    hints = []
    for fname, fargs, fval, line, col in alphabet_facts:
        args = _ground_args(fargs, diags, line, col)
        if fval is not None:
            diags.append(Diagnostic(line, col, "E_ALPHABET_FACT", "alphabet entries cannot carry values"))
        elif args is not None:
            hints.append((fname, args))
    bat.alphabet_hints = tuple(hints)

    decls = []
    for trigger, raw, otype, variant, window, deadline, stoppers, line in raw_obliges:
        trig_decl = bat.actions.get(trigger)
        env = {p.name: p for p in trig_decl.object_params} if trig_decl else {}
        # Unknown names become fresh variables here; the validator then
        # reports any of them not bound by the trigger.
        body = elab.formula(raw, env, suppressed=True, implicit=True)
        decls.append(
            ObligationDecl(trigger, SuppressedFormula(body), otype, variant, window, deadline, frozenset(stoppers), line)
        )
    bat.obligation_decls = tuple(decls)

    comp_decls = []
    for raw_pat, raw_comps, window, line in raw_compensates:
        env: dict = {}
        pattern = SuppressedFormula(elab.formula(raw_pat, env, suppressed=True, implicit=True))
        comps = tuple(SuppressedFormula(elab.formula(rc, env, suppressed=True, implicit=True)) for rc in raw_comps)
        comp_decls.append(CompensationDecl(pattern, comps, window, line))
    bat.comp_decls = tuple(comp_decls)

    return bat, diags


def _parse_signature_block(ts, bat, diags, raw_apas, raw_ssas, duplicate):
    kw = ts.next()
    nm = ts.expect_name(f"{kw.value} name")
    params = _parse_params(ts)
    result_sort = None
    if kw.value == "funfluent":
        ts.expect_op(":")
        st = ts.expect_name("sort name")
        if st.value not in _SORT_NAMES:
            raise TheoryParseError(Diagnostic(st.line, st.col, "E_SYNTAX", f"unknown sort {st.value!r}"))
        result_sort = _SORT_NAMES[st.value]

    if kw.value == "action":
        if nm.value in bat.actions:
            duplicate("action declaration", nm.value, nm.line, nm.col)
        else:
            bat.actions[nm.value] = ActionDecl(nm.value, params, nm.line)
        axis = ts.expect_name("'poss'")
        if axis.value != "poss":
            raise TheoryParseError(Diagnostic(axis.line, axis.col, "E_SYNTAX", f"expected 'poss', found {axis.value!r}"))
        ts.expect_op(":")
        raw = _parse_formula(ts)
        if any(a == nm.value for a, _, _ in raw_apas):
            duplicate("precondition axiom", nm.value, axis.line, axis.col)
        else:
            raw_apas.append((nm.value, raw, axis.line))
        while ts.at_name("poss"):
            extra = ts.next()
            ts.expect_op(":")
            _parse_formula(ts)
            duplicate("precondition axiom", nm.value, extra.line, extra.col)
    else:
        functional = kw.value == "funfluent"
        if nm.value in bat.fluents:
            duplicate("fluent declaration", nm.value, nm.line, nm.col)
        else:
            bat.fluents[nm.value] = FluentDecl(nm.value, params, functional, result_sort, nm.line)
        axis = ts.expect_name("'ssa'")
        if axis.value != "ssa":
            raise TheoryParseError(Diagnostic(axis.line, axis.col, "E_SYNTAX", f"expected 'ssa', found {axis.value!r}"))
        ts.expect_op(":")
        raw = _parse_formula(ts)
        if any(f == nm.value for f, _, _ in raw_ssas):
            duplicate("SSA", nm.value, axis.line, axis.col)
        else:
            raw_ssas.append((nm.value, raw, axis.line))
        while ts.at_name("ssa"):
            extra = ts.next()
            ts.expect_op(":")
            _parse_formula(ts)
            duplicate("SSA", nm.value, extra.line, extra.col)


def _parse_params(ts) -> tuple:
    ts.expect_op("(")
    params = []
    if not ts.at_op(")"):
        while True:
            pn = ts.expect_name("parameter name")
            ts.expect_op(":")
            st = ts.expect_name("sort name")
            if st.value not in _SORT_NAMES:
                raise TheoryParseError(Diagnostic(st.line, st.col, "E_SYNTAX", f"unknown sort {st.value!r}"))
            params.append(Var(pn.value, _SORT_NAMES[st.value]))
            if ts.at_op(","):
                ts.next()
                continue
            break
    ts.expect_op(")")
    return tuple(params)


def _parse_fact(ts):
    nm = ts.expect_name("fact name")
    ts.expect_op("(")
    args = []
    if not ts.at_op(")"):
        while True:
            t = ts.peek()
            if t.kind == "int":
                ts.next()
                args.append(int(t.value))
            else:
                args.append(ts.expect_name("constant").value)
            if ts.at_op(","):
                ts.next()
                continue
            break
    ts.expect_op(")")
    value = None
    if ts.at_op("=="):
        ts.next()
        t = ts.peek()
        if t.kind == "int":
            ts.next()
            value = int(t.value)
        else:
            value = ts.expect_name("constant").value
    ts.expect_op(".")
    return nm.value, tuple(args), value, nm.line, nm.col


def _ground_args(args, diags, line, col):
    out = []
    for a in args:
        if isinstance(a, int):
            out.append(a)
        elif isinstance(a, str) and a[0].isupper():
            out.append(Const(a))
        else:
            diags.append(Diagnostic(line, col, "E_GROUND", f"fact argument '{a}' must be a constant"))
            return None
    return tuple(out)


_OTYPE_NAMES = {
    "punctual": OblType.PUNCTUAL,
    "achievement": OblType.ACHIEVEMENT,
    "maintenance": OblType.MAINTENANCE,
    "perdurant": OblType.PERDURANT,
}


def _parse_obliges(ts):
    kw = ts.next()
    trigger = ts.expect_name("trigger action").value
    ts.expect_op("->")
    raw = _parse_formula(ts)
    tt = ts.expect_name("'type'")
    if tt.value != "type":
        raise TheoryParseError(Diagnostic(tt.line, tt.col, "E_SYNTAX", f"expected 'type', found {tt.value!r}"))
    ot = ts.expect_name("obligation type")
    if ot.value not in _OTYPE_NAMES:
        raise TheoryParseError(Diagnostic(ot.line, ot.col, "E_SYNTAX", f"unknown obligation type {ot.value!r}"))
    otype = _OTYPE_NAMES[ot.value]
    variant = None
    if otype is OblType.ACHIEVEMENT:
        vt = ts.expect_name("'preemptive' or 'nonpreemptive'")
        if vt.value not in ("preemptive", "nonpreemptive"):
            raise TheoryParseError(Diagnostic(vt.line, vt.col, "E_SYNTAX", f"unknown achievement variant {vt.value!r}"))
        variant = AchievementVariant(vt.value)
    window = 0
    deadline = None
    stoppers: list = []
    while ts.at_name("window", "deadline", "stoppers"):
        which = ts.next().value
        if which == "window":
            window = int(ts.expect_int().value)
        elif which == "deadline":
            deadline = int(ts.expect_int().value)
        else:
            ts.expect_op("{")
            while True:
                stoppers.append(ts.expect_name("stopper action").value)
                if ts.at_op(","):
                    ts.next()
                    continue
                break
            ts.expect_op("}")
    return trigger, raw, otype, variant, window, deadline, stoppers, kw.line


def _parse_compensate(ts):
    kw = ts.next()
    raw_pat = _parse_formula(ts)
    wt = ts.expect_name("'with'")
    if wt.value != "with":
        raise TheoryParseError(Diagnostic(wt.line, wt.col, "E_SYNTAX", f"expected 'with', found {wt.value!r}"))
    ts.expect_op("{")
    comps = []
    while True:
        comps.append(_parse_formula(ts))
        if ts.at_op(","):
            ts.next()
            continue
        break
    ts.expect_op("}")
    window = 30
    if ts.at_name("window"):
        ts.next()
        window = int(ts.expect_int().value)
    return raw_pat, tuple(comps), window, kw.line


# --------------------------------------------------------------------------
# Trace files
# --------------------------------------------------------------------------


class TraceParseError(Exception):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.reason = message


_TRACE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*$")


def parse_trace(text: str, bat: Optional[BasicActionTheory] = None) -> list:
    """Parse a trace file: one ground action per line, `#` comments allowed."""
    actions = []
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _TRACE_RE.match(line)
        if m is None:
            raise TraceParseError(line_no, f"malformed action {line!r}")
        functor = m.group(1)
        arg_text = [a.strip() for a in m.group(2).split(",")] if m.group(2).strip() else []
        args = []
        for a in arg_text:
            if re.fullmatch(r"\d+", a):
                args.append(int(a))
            elif re.fullmatch(r"[A-Z][A-Za-z0-9_]*", a):
                args.append(Const(a))
            else:
                raise TraceParseError(line_no, f"argument {a!r} must be a constant or an integer")
        if not args or not isinstance(args[-1], int):
            raise TraceParseError(line_no, f"action {functor!r} must end with an integer time")
        if bat is not None:
            decl = bat.actions.get(functor)
            if decl is None:
                raise TraceParseError(line_no, f"undeclared action {functor!r}")
            if len(args) != len(decl.params):
                raise TraceParseError(line_no, f"action {functor!r} expects {len(decl.params)} argument(s), got {len(args)}")
        actions.append(ActionTerm(functor, tuple(args)))
    return actions


# --------------------------------------------------------------------------
# Canonical printing (parse . print == identity on valid theories)
# --------------------------------------------------------------------------


def print_theory(bat: BasicActionTheory) -> str:
    out = []
    if bat.epoch != 0:
        out.append(f"epoch {bat.epoch}\n")
    if bat.rigids:
        facts = " ".join(f"{n}({', '.join(str(a) for a in args)})." for n, args in sorted(bat.rigids, key=repr))
        out.append(f"rigid: {facts}\n")
    for name, decl in bat.actions.items():
        sig = ", ".join(f"{p.name}: {p.sort.value}" for p in decl.params)
        out.append(f"action {name}({sig})")
        apa = bat.apas.get(name)
        if apa is not None:
            out.append(f"  poss: {formula_to_text(apa.body)}")
        out.append("")
    for name, decl in bat.fluents.items():
        sig = ", ".join(f"{p.name}: {p.sort.value}" for p in decl.params)
        head = f"funfluent {name}({sig}): {decl.result_sort.value}" if decl.functional else f"fluent {name}({sig})"
        out.append(head)
        ssa = bat.ssas.get(name)
        if ssa is not None:
            out.append(f"  ssa: {formula_to_text(ssa.body)}")
        out.append("")
    if bat.init or bat.init_fun:
        facts = [f"{n}({', '.join(str(a) for a in args)})." for n, args in sorted(bat.init, key=repr)]
        facts += [
            f"{n}({', '.join(str(a) for a in args)}) == {v}." for (n, args), v in sorted(bat.init_fun.items(), key=repr)
        ]
        out.append(f"init: {' '.join(facts)}\n")
    for decl in bat.obligation_decls:
        parts = [f"obliges {decl.trigger} -> {decl.obliged} type {decl.otype.value}"]
        if decl.variant is not None:
            parts.append(decl.variant.value)
        if decl.window:
            parts.append(f"window {decl.window}")
        if decl.deadline_offset is not None:
            parts.append(f"deadline {decl.deadline_offset}")
        if decl.stoppers:
            parts.append("stoppers {" + ", ".join(sorted(decl.stoppers)) + "}")
        out.append(" ".join(parts))
    for decl in bat.comp_decls:
        comps = ", ".join(str(c) for c in decl.comps)
        out.append(f"compensate {decl.pattern} with {{{comps}}} window {decl.window}")
    if bat.alphabet_hints:
        facts = " ".join(f"{n}({', '.join(str(a) for a in args)})." for n, args in bat.alphabet_hints)
        out.append(f"alphabet: {facts}")
    return "\n".join(out) + "\n"
