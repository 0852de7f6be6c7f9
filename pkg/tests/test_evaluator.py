import itertools
import random

import pytest

from progression_oracle import progress
from oblicalc.evaluator import (
    EvalError,
    PendingCompensation,
    Trace,
    eval_fluent,
    eval_formula,
    eval_poss,
    executability_report,
    executable,
)
from oblicalc.formulas import (
    HOLE,
    And,
    ExistsSit,
    FluentAtom,
    FunFluentEq,
    Not,
    SitCmp,
    SuppressedFormula,
)
from oblicalc.parser import parse_theory
from oblicalc.terms import S0, ActionTerm, Const, Sort, Var

D, E, M = Const("D"), Const("E"), Const("M")


def act(name, *args):
    return ActionTerm(name, tuple(Const(a) if isinstance(a, str) else a for a in args))


def fluent_at(tr, name, args, k):
    return eval_fluent(tr, FluentAtom(name, args, tr.prefix(k)), tr.prefix(k))


class TestFluentUnfolding:
    def test_press_button_opens_the_door(self, door):
        tr = Trace(door, [act("pressButton", "D", "E", 1)])
        assert fluent_at(tr, "open", (D,), 1)

    def test_initial_database_is_the_base_case(self, door):
        tr = Trace(door, [])
        assert fluent_at(tr, "locked", (D,), 0)
        assert not fluent_at(tr, "open", (D,), 0)

    def test_employee_press_disengages_the_latch(self, door):
        tr = Trace(door, [act("pressButton", "D", "E", 1)])
        assert not fluent_at(tr, "locked", (D,), 1)

    def test_non_employee_press_keeps_the_latch(self, door):
        tr = Trace(door, [act("pressButton", "D", "M", 1)])
        assert fluent_at(tr, "locked", (D,), 1)
        assert fluent_at(tr, "open", (D,), 1)  # the door still opens

    def test_locked_persists_through_unlock_and_lock_reinstates(self, door):
        tr = Trace(door, [act("unlock", "D", 2), act("pressButton", "D", "E", 3), act("lock", "D", 5)])
        assert fluent_at(tr, "locked", (D,), 1)
        assert not fluent_at(tr, "locked", (D,), 2)
        assert fluent_at(tr, "locked", (D,), 3)

    def test_moving_away_updates_at(self, door):
        tr = Trace(door, [act("moveTo", "E", 4)])
        assert not fluent_at(tr, "at", (D,), 1)
        assert fluent_at(tr, "at", (E,), 1)

    def test_undeclared_fluent_is_an_error(self, door):
        tr = Trace(door, [])
        with pytest.raises(EvalError):
            eval_fluent(tr, FluentAtom("ghost", (D,), S0), S0)


class TestFunctionalFluents:
    def test_undefined_until_first_notify(self, door):
        tr = Trace(door, [act("notify", "M", 7)])
        eq0 = FunFluentEq("notifiedManager", (), S0, M)
        assert not eval_fluent(tr, eq0, S0)
        eq1 = FunFluentEq("notifiedManager", (), tr.prefix(1), M)
        assert eval_fluent(tr, eq1, tr.prefix(1))

    def test_newest_notification_wins(self, door):
        # manager(M) is the only rigid manager, so notifying someone else
        # leaves the value alone; re-notifying M keeps it at M.
        tr = Trace(door, [act("notify", "M", 1), act("notify", "E", 2)])
        eq = FunFluentEq("notifiedManager", (), tr.prefix(2), M)
        assert eval_fluent(tr, eq, tr.prefix(2))


class TestPoss:
    def test_unlock_possible_at_start(self, door):
        tr = Trace(door, [])
        assert eval_poss(tr, act("unlock", "D", 2), S0)

    def test_move_and_notify_always_possible(self, door):
        tr = Trace(door, [act("pressButton", "D", "E", 1), act("lock", "D", 2)])
        for k in range(3):
            assert eval_poss(tr, act("moveTo", "D", 9), tr.prefix(k))
            assert eval_poss(tr, act("notify", "M", 9), tr.prefix(k))

    def test_lock_needs_an_open_door(self, door):
        tr = Trace(door, [act("pressButton", "D", "E", 1)])
        assert not eval_poss(tr, act("lock", "D", 3), S0)
        assert eval_poss(tr, act("lock", "D", 3), tr.prefix(1))


class TestFormulaEvaluation:
    def test_prefix_quantifier_finds_initial_lock(self, door):
        tr = Trace(door, [act("unlock", "D", 10)])
        v = Var("s1", Sort.SITUATION)
        f = ExistsSit(v, S0, "<<=", "<<=", tr.prefix(1), FluentAtom("locked", (D,), v))
        assert eval_formula(tr, f)

    def test_nothing_strictly_precedes_s0(self, door):
        tr = Trace(door, [act("unlock", "D", 10)])
        v = Var("s1", Sort.SITUATION)
        f = ExistsSit(v, S0, "<<=", "<<", S0, FluentAtom("locked", (D,), v))
        assert not eval_formula(tr, f)

    def test_connectives_combine_fluent_truths(self, door):
        tr = Trace(door, [act("pressButton", "D", "E", 1)])
        f = And((FluentAtom("open", (D,), tr.prefix(1)), Not(FluentAtom("locked", (D,), tr.prefix(1)))))
        assert eval_formula(tr, f)

    def test_unbounded_situation_quantifier_is_rejected(self, door):
        from oblicalc.formulas import Exists

        tr = Trace(door, [])
        v = Var("s1", Sort.SITUATION)
        with pytest.raises(EvalError):
            eval_formula(tr, Exists((v,), FluentAtom("locked", (D,), v)))

    def test_unbound_variable_is_rejected(self, door):
        tr = Trace(door, [])
        with pytest.raises(EvalError):
            eval_formula(tr, FluentAtom("locked", (Var("d", Sort.OBJECT),), S0))

    def test_poss_atoms_evaluate_through_the_preconditions(self, door):
        from oblicalc.formulas import PossAtom

        tr = Trace(door, [act("pressButton", "D", "E", 1)])
        assert not eval_formula(tr, PossAtom(act("lock", "D", 2), S0))
        assert eval_formula(tr, PossAtom(act("lock", "D", 2), tr.prefix(1)))


NONMARKOV = """
rigid: door(D).
action touch(d: object, t: time)
  poss: true
action press(d: object, c: object, t: time)
  poss: true
fluent open(d: object)
  ssa: exists t, c (a == press(d, c, t)) or (open(d, s) and not exists t (a == touch(d, t)))
fluent everOpen(d: object)
  ssa: exists s1 (s1 <<= s and open(d, s1)) or exists t, c (a == press(d, c, t))
init:
"""


class TestNonMarkovian:
    def test_ever_open_remembers_a_closed_past(self):
        bat, diags = parse_theory(NONMARKOV)
        assert bat is not None and not diags
        tr = Trace(bat, [act("press", "D", "E", 1), act("touch", "D", 2), act("touch", "D", 3)])
        assert fluent_at(tr, "open", (D,), 1)
        assert not fluent_at(tr, "open", (D,), 2)
        assert not fluent_at(tr, "everOpen", (D,), 0)
        assert fluent_at(tr, "everOpen", (D,), 1)
        assert fluent_at(tr, "everOpen", (D,), 2)
        assert fluent_at(tr, "everOpen", (D,), 3)

    def test_never_opened_never_ever_open(self):
        bat, _ = parse_theory(NONMARKOV)
        tr = Trace(bat, [act("touch", "D", 1)])
        assert not fluent_at(tr, "everOpen", (D,), 1)


def _all_fluent_values(bat, tr, objs):
    out = {}
    for name, decl in bat.fluents.items():
        for args in itertools.product(objs, repeat=len(decl.params)):
            for k in range(len(tr.actions) + 1):
                if decl.functional:
                    from oblicalc.evaluator import _fun_value

                    out[(name, args, k)] = _fun_value(tr, name, args, k)
                else:
                    out[(name, args, k)] = fluent_at(tr, name, args, k)
    return out


class TestProgressionAgreement:
    def test_unfolding_matches_forward_progression_on_scripted_traces(self, door):
        traces = [
            [],
            [act("moveTo", "D", 1)],
            [act("moveTo", "D", 1), act("unlock", "D", 2), act("lock", "D", 30)],
            [act("pressButton", "D", "E", 1), act("lock", "D", 2), act("pressButton", "D", "E", 3)],
            [act("notify", "M", 1), act("notify", "E", 2), act("moveTo", "E", 3)],
            [act("set", "E", 1), act("unlock", "D", 2), act("pressButton", "D", "E", 2)],
        ]
        objs = (D, E, M)
        for actions in traces:
            tr = Trace(door, actions)
            states = progress(door, actions)
            backward = _all_fluent_values(door, tr, objs)
            for (name, args, k), value in backward.items():
                decl = door.fluents[name]
                if decl.functional:
                    assert states[k].values.get((name, args)) == value, (name, args, k, actions)
                else:
                    assert ((name, args) in states[k].atoms) == value, (name, args, k, actions)

    def test_markovian_ssas_depend_only_on_the_current_state(self, door):
        # Two histories with identical final states; appending the same action
        # must produce identical fluent values.
        h1 = [act("pressButton", "D", "E", 1), act("lock", "D", 2)]
        h2 = [act("unlock", "D", 1), act("pressButton", "D", "E", 2), act("lock", "D", 3)]
        s1 = progress(door, h1)[-1]
        s2 = progress(door, h2)[-1]
        assert s1.atoms == s2.atoms and s1.values == s2.values
        nxt = act("pressButton", "D", "E", 5)
        tr1 = Trace(door, h1 + [nxt])
        tr2 = Trace(door, h2 + [nxt])
        objs = (D, E, M)
        for name, decl in door.fluents.items():
            if decl.functional:
                continue
            for args in itertools.product(objs, repeat=len(decl.params)):
                assert fluent_at(tr1, name, args, len(h1) + 1) == fluent_at(tr2, name, args, len(h2) + 1)


class TestExecutability:
    def test_empty_history_is_executable(self, door):
        assert executable(Trace(door, []))

    def test_decreasing_times_are_rejected(self, door):
        tr = Trace(door, [act("unlock", "D", 10), act("pressButton", "D", "E", 5)])
        ok, reasons = executability_report(tr)
        assert not ok
        assert any("time goes backwards" in r for r in reasons)

    def test_impossible_action_is_reported(self, door):
        tr = Trace(door, [act("lock", "D", 1)])
        ok, reasons = executability_report(tr)
        assert not ok and "Poss(lock(D,1)) is false at S0" in reasons[0]

    def test_prefix_closure(self, door):
        rng = random.Random(7)
        names = [("moveTo", ("D",)), ("unlock", ("D",)), ("pressButton", ("D", "E")), ("lock", ("D",))]
        for _ in range(200):
            n = rng.randint(0, 6)
            times = sorted(rng.randint(1, 9) for _ in range(n))
            actions = [act(nm, *args, t) for (nm, args), t in zip((rng.choice(names) for _ in range(n)), times)]
            tr = Trace(door, actions)
            pend = (PendingCompensation("x", rng.randint(0, 9)),) if rng.random() < 0.5 else ()
            flags = [executable(tr, tr.prefix(k), pend) for k in range(n + 1)]
            for shorter, longer in zip(flags, flags[1:]):
                assert shorter or not longer  # executable(longer) implies executable(shorter)

    def test_pending_compensation_blocks_later_actions(self, door):
        tr = Trace(door, [act("moveTo", "D", 1), act("notify", "M", 9)])
        assert executable(tr, pending=(PendingCompensation("locked(D)", 5),)) is False
        assert executable(tr, pending=(PendingCompensation("locked(D)", 10),)) is True

    def test_applied_compensation_releases_later_actions(self, door):
        tr = Trace(door, [act("notify", "M", 9)])
        assert executable(tr, pending=(PendingCompensation("locked(D)", 5, applied_at=8),)) is True
        assert executable(tr, pending=(PendingCompensation("locked(D)", 5, applied_at=10),)) is False


def test_trace_rejects_undeclared_or_malformed_actions(door):
    with pytest.raises(EvalError):
        Trace(door, [act("fly", "D", 1)])
    with pytest.raises(EvalError):
        Trace(door, [ActionTerm("unlock", (D, Var("t", Sort.TIME)))])
