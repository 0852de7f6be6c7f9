import pytest
from hypothesis import given, strategies as st

from oblicalc.terms import (
    S0,
    ActionTerm,
    Const,
    DoTerm,
    action_time,
    do_all,
    mk_do,
    precedes,
    precedes_eq,
    sit_prefixes,
    start,
    term_to_text,
)

D = Const("D")


def unlock(t):
    return ActionTerm("unlock", (D, t))


def lock(t):
    return ActionTerm("lock", (D, t))


class TestMkDo:
    def test_appending_sets_start_to_action_time(self):
        s = mk_do(unlock(10), S0)
        assert s == DoTerm(unlock(10), S0)
        assert start(s) == 10

    def test_list_form_expands_innermost_first(self):
        a1, a2 = unlock(1), lock(2)
        assert mk_do([a1, a2], S0) == DoTerm(a2, DoTerm(a1, S0))

    def test_distinct_actions_give_distinct_situations(self):
        assert mk_do(lock(1), S0) != mk_do(unlock(1), S0)

    def test_injective_in_both_arguments(self):
        s1, s2 = mk_do(unlock(1), S0), mk_do(unlock(2), S0)
        assert mk_do(lock(3), s1) != mk_do(lock(3), s2)
        assert mk_do(lock(3), s1) != mk_do(lock(4), s1)

    def test_rejects_non_action(self):
        with pytest.raises(TypeError):
            mk_do("unlock", S0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            ActionTerm("unlock", (D, -2))


class TestOrder:
    def test_every_nonempty_history_extends_s0(self):
        assert precedes(S0, mk_do(unlock(10), S0))

    def test_nothing_precedes_s0(self):
        for s in (S0, mk_do(unlock(1), S0), do_all([unlock(1), lock(2)])):
            assert not precedes(s, S0)

    def test_prefix_check_is_structural(self):
        a1, a2 = unlock(1), lock(2)
        s12 = do_all([a1, a2])
        assert precedes(mk_do(a1, S0), s12)
        assert not precedes(mk_do(a2, S0), s12)

    def test_reflexive_closure(self):
        s = do_all([unlock(1), lock(2)])
        assert precedes_eq(s, s) and not precedes(s, s)

    def test_non_ground_rejected(self):
        from oblicalc.terms import Sort, Var

        with pytest.raises(ValueError):
            precedes(Var("z", Sort.SITUATION), S0)


@st.composite
def ground_situations(draw):
    n = draw(st.integers(min_value=0, max_value=5))
    times = sorted(draw(st.lists(st.integers(min_value=0, max_value=9), min_size=n, max_size=n)))
    names = draw(st.lists(st.sampled_from(["unlock", "lock", "moveTo"]), min_size=n, max_size=n))
    return do_all([ActionTerm(f, (D, t)) for f, t in zip(names, times)])


@given(ground_situations(), ground_situations(), ground_situations())
def test_precedes_is_a_strict_partial_order(s1, s2, s3):
    assert not precedes(s1, s1)
    if precedes(s1, s2):
        assert not precedes(s2, s1)
    if precedes(s1, s2) and precedes(s2, s3):
        assert precedes(s1, s3)
    assert precedes_eq(s1, s2) == (precedes(s1, s2) or s1 == s2)


@given(ground_situations())
def test_start_of_extension_is_the_action_time(s):
    a = ActionTerm("notify", (Const("M"), 41))
    assert start(mk_do(a, s)) == action_time(a)


class TestTimes:
    def test_action_time_reads_last_argument(self):
        assert action_time(unlock(10)) == 10

    def test_start_of_s0_is_the_epoch(self):
        assert start(S0) == 0
        assert start(S0, epoch=7) == 7

    def test_start_after_two_steps(self):
        s = do_all([unlock(30), lock(40)])
        assert start(s) == 40

    def test_non_ground_time_rejected(self):
        from oblicalc.terms import Sort, Var

        with pytest.raises(ValueError):
            action_time(ActionTerm("unlock", (D, Var("t", Sort.TIME))))


def test_textual_form_matches_diagnostic_syntax():
    s = do_all([unlock(30), lock(40)])
    assert term_to_text(s) == "do(lock(D,40), do(unlock(D,30), S0))"


def test_prefixes_enumerate_root_first():
    a1, a2 = unlock(1), lock(2)
    s = do_all([a1, a2])
    assert sit_prefixes(s) == [S0, mk_do(a1, S0), s]
