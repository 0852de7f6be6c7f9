"""Independent clause-by-clause boundedness checker plus a formula generator.

The checker follows the inductive definition of bounded formulas literally:
derived connectives are first rewritten into negation and conjunction, then
each clause is tried in turn.  It shares no code with the production
classifier, which decides the class in a single recursive pass.
"""

from oblicalc.formulas import (
    And,
    Eq,
    Exists,
    ExistsSit,
    FalseF,
    FluentAtom,
    Forall,
    ForallSit,
    FunFluentEq,
    Iff,
    Implies,
    Not,
    Or,
    PossAtom,
    RigidAtom,
    SitCmp,
    TimeCmp,
    TrueF,
    Boundedness,
)
from oblicalc.terms import (
    ActionTerm,
    Const,
    DoTerm,
    S0,
    S0Term,
    Sort,
    Var,
    is_sit_subterm,
    sit_root,
)

_ATOM_TYPES = (TrueF, FalseF, FluentAtom, FunFluentEq, RigidAtom, PossAtom, Eq, TimeCmp, SitCmp)


def _rewrite(w):
    """Push derived connectives down to not/and so the clause recursion only
    ever sees the connectives the definition mentions."""
    if isinstance(w, Or):
        return Not(And(tuple(Not(_rewrite(x)) for x in w.items)))
    if isinstance(w, Implies):
        return Not(And((_rewrite(w.ante), Not(_rewrite(w.cons)))))
    if isinstance(w, Iff):
        return _rewrite(And((Implies(w.left, w.right), Implies(w.right, w.left))))
    if isinstance(w, Not):
        return Not(_rewrite(w.body))
    if isinstance(w, And):
        return And(tuple(_rewrite(x) for x in w.items))
    if isinstance(w, (Exists, Forall)):
        return type(w)(w.vars, _rewrite(w.body))
    if isinstance(w, (ExistsSit, ForallSit)):
        return type(w)(w.var, w.lower, w.low_rel, w.high_rel, w.upper, _rewrite(w.body))
    return w


def _atom_sits(w):
    if isinstance(w, (FluentAtom, FunFluentEq, PossAtom)):
        return [w.sit]
    if isinstance(w, SitCmp):
        return [w.left, w.right]
    if isinstance(w, Eq):
        return [t for t in (w.left, w.right) if isinstance(t, (S0Term, DoTerm)) or (isinstance(t, Var) and t.sort is Sort.SITUATION)]
    return []


def _pieces(body):
    if isinstance(body, Not):
        inner = body.body
        return list(inner.items) if isinstance(inner, And) else [inner]
    if isinstance(body, And):
        return list(body.items)
    return [body]


def _lower_ok(lower, var, roots):
    r = sit_root(lower)
    return isinstance(r, S0Term) or r == var or r in roots


def _bounded(w, sigma, roots):
    lam = sit_root(sigma)
    if isinstance(w, _ATOM_TYPES):
        return all(sit_root(t) == lam for t in _atom_sits(w))
    if isinstance(w, Not):
        return _bounded(w.body, sigma, roots)
    if isinstance(w, And):
        return all(_bounded(x, sigma, roots) for x in w.items)
    if isinstance(w, (Exists, Forall)):
        if any(v.sort is Sort.SITUATION for v in w.vars):
            return False
        return _bounded(w.body, sigma, roots)
    if isinstance(w, (ExistsSit, ForallSit)):
        if sit_root(w.upper) != lam:
            return False
        if not _lower_ok(w.lower, w.var, roots):
            return False
        inner_roots = (w.var,) + roots
        return all(
            _bounded(p, w.var, inner_roots) or _bounded(p, sigma, roots) for p in _pieces(w.body)
        )
    raise TypeError(f"unexpected formula {w!r}")


def _strict(w, sigma, roots):
    lam = sit_root(sigma)
    if isinstance(w, _ATOM_TYPES):
        return all(sit_root(t) == lam and is_sit_subterm(t, sigma) for t in _atom_sits(w))
    if isinstance(w, Not):
        return _strict(w.body, sigma, roots)
    if isinstance(w, And):
        return all(_strict(x, sigma, roots) for x in w.items)
    if isinstance(w, (Exists, Forall)):
        if any(v.sort is Sort.SITUATION for v in w.vars):
            return False
        return _strict(w.body, sigma, roots)
    if isinstance(w, (ExistsSit, ForallSit)):
        if not (sit_root(w.upper) == lam and is_sit_subterm(w.upper, sigma)):
            return False
        if not _lower_ok(w.lower, w.var, roots):
            return False
        inner_roots = (w.var,) + roots
        return all(
            _strict(p, w.var, inner_roots) or _strict(p, sigma, roots) for p in _pieces(w.body)
        )
    raise TypeError(f"unexpected formula {w!r}")


def brute_force_class(w, sigma) -> Boundedness:
    """Tightest class per the inductive definition, decided clause by clause."""
    rw = _rewrite(w)
    roots = (sit_root(sigma),)
    if _strict(rw, sigma, roots):
        return Boundedness.STRICTLY_BOUNDED
    if _bounded(rw, sigma, roots):
        return Boundedness.BOUNDED
    return Boundedness.UNBOUNDED


# ---------------------------------------------------------------------------
# Formula corpus: everything up to a depth over two fluents and two actions
# ---------------------------------------------------------------------------

D = Const("D")
A_LOCK = ActionTerm("lock", (D, 1))
A_UNLOCK = ActionTerm("unlock", (D, 1))
SIGMA = Var("s", Sort.SITUATION)
FREE_SIT = Var("z", Sort.SITUATION)
OBJ_VAR = Var("x", Sort.OBJECT)

_FLUENTS = ("open", "locked")


def _atoms(scope_sits):
    out = []
    for f in _FLUENTS:
        for sit in scope_sits:
            out.append(FluentAtom(f, (D,), sit))
    out.append(RigidAtom("door", (D,)))
    return out


def generate_formulas(max_depth: int = 4, cap: int = 20000):
    """Breadth-first corpus of formulas over the two-fluent, two-action alphabet.

    Situation terms are drawn from the bound itself, one-step extensions of
    it, the empty history, a foreign situation variable, and any quantified
    history variables in scope; the corpus therefore exercises every class.
    """
    base_sits = [SIGMA, DoTerm(A_LOCK, SIGMA), S0, DoTerm(A_UNLOCK, S0), FREE_SIT]
    uppers = [SIGMA, DoTerm(A_LOCK, SIGMA), FREE_SIT]

    seen = set()
    corpus = []

    def add(f):
        if f not in seen and len(corpus) < cap:
            seen.add(f)
            corpus.append(f)
            return True
        return False

    def quant_var(i):
        return Var(f"q{i}", Sort.SITUATION)

    levels = [_atoms(base_sits)]
    for f in levels[0]:
        add(f)
    depth = 1
    while depth < max_depth and len(corpus) < cap:
        prev = levels[-1]
        atoms0 = levels[0]
        nxt = []
        for g in prev:
            if len(corpus) >= cap:
                break
            for cand in (Not(g), Exists((OBJ_VAR,), g), Or((g, atoms0[0]))):
                if add(cand):
                    nxt.append(cand)
            for h in atoms0[:4]:
                cand = And((g, h))
                if add(cand):
                    nxt.append(cand)
            v = quant_var(depth)
            g_v = _atoms([v])[0]
            for upper in uppers:
                for body in (g_v, And((g_v, g))):
                    cand = ExistsSit(v, S0, "<<=", "<<=", upper, body)
                    if add(cand):
                        nxt.append(cand)
                cand = ForallSit(v, S0, "<<=", "<<", upper, Implies(g_v, g))
                if add(cand):
                    nxt.append(cand)
        levels.append(nxt)
        depth += 1
    return corpus
