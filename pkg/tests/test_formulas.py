import pytest
from hypothesis import given, settings, strategies as st

from def1_oracle import FREE_SIT, SIGMA, brute_force_class, generate_formulas
from oblicalc.formulas import (
    HOLE,
    And,
    Boundedness,
    Eq,
    ExistsSit,
    FluentAtom,
    Not,
    Or,
    RigidAtom,
    SuppressedFormula,
    classify_bounded,
    formula_to_text,
    free_vars,
    mentions_poss,
    subst,
    suppress,
    PossAtom,
)
from oblicalc.terms import S0, ActionTerm, Const, DoTerm, Sort, Var, do_all

D = Const("D")
S = Var("s", Sort.SITUATION)


def atom(name="open", sit=S):
    return FluentAtom(name, (D,), sit)


class TestSuppression:
    def test_restore_plugs_every_hole(self):
        phi = SuppressedFormula(FluentAtom("locked", (D,), HOLE))
        sigma = do_all([ActionTerm("unlock", (D, 10))])
        assert phi.restore(sigma) == FluentAtom("locked", (D,), sigma)

    def test_suppress_then_restore_is_substitution(self):
        f = And((atom("open"), Not(atom("locked"))))
        sigma = do_all([ActionTerm("lock", (D, 3))])
        assert suppress(f, S).restore(sigma) == subst(f, {S: sigma})

    def test_bound_situation_variables_survive_suppression(self):
        v = Var("s1", Sort.SITUATION)
        f = ExistsSit(v, S0, "<<=", "<<=", S, atom("locked", v))
        restored = suppress(f, S).restore(S0)
        assert restored == ExistsSit(v, S0, "<<=", "<<=", S0, atom("locked", v))

    def test_suppressed_formulas_are_hashable_store_keys(self):
        a = SuppressedFormula(FluentAtom("locked", (D,), HOLE))
        b = SuppressedFormula(FluentAtom("locked", (D,), HOLE))
        assert a == b and len({a, b}) == 1


@st.composite
def small_formulas(draw):
    names = st.sampled_from(["open", "locked"])
    base = draw(
        st.lists(st.tuples(names, st.booleans()), min_size=1, max_size=4)
    )
    items = tuple(Not(atom(n)) if neg else atom(n) for n, neg in base)
    f = items[0] if len(items) == 1 else And(items)
    return f


@given(small_formulas())
@settings(max_examples=60)
def test_suppress_restore_round_trip(f):
    sigma = do_all([ActionTerm("unlock", (D, 5))])
    assert suppress(f, S).restore(sigma) == subst(f, {S: sigma})


@given(small_formulas())
@settings(max_examples=60)
def test_restore_then_suppress_is_the_identity(f):
    sigma = do_all([ActionTerm("unlock", (D, 5))])
    phi = suppress(f, S)
    assert suppress(phi.restore(sigma), sigma) == phi


class TestClassifyBounded:
    def test_atom_on_the_bound_itself_is_strict(self):
        assert classify_bounded(atom("open", S), S) is Boundedness.STRICTLY_BOUNDED

    def test_prefix_quantifier_over_the_bound_is_strict(self):
        v = Var("s1", Sort.SITUATION)
        f = ExistsSit(v, S0, "<<=", "<<=", S, atom("locked", v))
        assert classify_bounded(f, S) is Boundedness.STRICTLY_BOUNDED

    def test_foreign_root_is_unbounded(self):
        a = Var("a", Sort.ACTION)
        f = atom("open", DoTerm(a, FREE_SIT))
        assert classify_bounded(f, S) is Boundedness.UNBOUNDED

    def test_extension_of_the_bound_is_bounded_not_strict(self):
        ext = DoTerm(ActionTerm("lock", (D, 1)), S)
        assert classify_bounded(atom("open", ext), S) is Boundedness.BOUNDED

    def test_rigid_atoms_are_vacuously_strict(self):
        assert classify_bounded(RigidAtom("door", (D,)), S) is Boundedness.STRICTLY_BOUNDED

    def test_quantifier_without_upper_constraint_is_unbounded(self):
        from oblicalc.formulas import Exists

        v = Var("s1", Sort.SITUATION)
        f = Exists((v,), atom("open", v))
        assert classify_bounded(f, S) is Boundedness.UNBOUNDED

    def test_ground_bound_accepts_ground_subterms(self):
        sigma = do_all([ActionTerm("unlock", (D, 1)), ActionTerm("lock", (D, 2))])
        inner = sigma.parent
        assert classify_bounded(atom("open", inner), sigma) is Boundedness.STRICTLY_BOUNDED

    def test_matches_clause_by_clause_recursion_on_corpus_sample(self):
        for f in generate_formulas(max_depth=3, cap=3000):
            assert classify_bounded(f, SIGMA) is brute_force_class(f, SIGMA), formula_to_text(f)


def test_mentions_poss_sees_through_connectives():
    f = And((atom(), Not(Or((PossAtom(ActionTerm("lock", (D, 1)), S), atom("locked"))))))
    assert mentions_poss(f)
    assert not mentions_poss(atom())


def test_free_vars_excludes_bound_ones():
    v = Var("s1", Sort.SITUATION)
    d = Var("d", Sort.OBJECT)
    f = ExistsSit(v, S0, "<<=", "<<=", S, FluentAtom("locked", (d,), v))
    assert free_vars(f) == {S, d}


def test_printer_parenthesizes_by_precedence():
    f = Or((And((atom("open"), atom("locked"))), Not(atom("open"))))
    assert formula_to_text(f) == "open(D, s) and locked(D, s) or not open(D, s)"
    g = And((Or((atom("open"), atom("locked"))), atom("open")))
    assert formula_to_text(g) == "(open(D, s) or locked(D, s)) and open(D, s)"
