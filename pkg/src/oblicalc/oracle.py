"""Brute-force possible-worlds cross-check of the obligation store.

Small instances only: enumerate every time-monotone history up to a depth
over a ground action alphabet, derive the obligation store of each history
by a direct, standalone replay of the declarations, induce the deontic
accessibility relation from that store (a history is an ideal alternative
exactly when it satisfies everything currently obliged), and evaluate
obligation the literal way: phi is obligatory at s when phi holds at every
history accessible from s.

check_equivalence compares the incremental monitor against this semantics
verdict by verdict; any disagreement is reported.  The store derivation here
is deliberately written from scratch rather than shared with the monitor, so
a defect in either side surfaces as a discrepancy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evaluator import Trace, eval_formula, executable
from .formulas import And, SuppressedFormula
from .monitor import run_monitor
from .terms import ActionTerm
from .theory import AchievementVariant, BasicActionTheory, OblType

DEFAULT_BUDGET = 100_000


class BudgetExceeded(Exception):
    pass


@dataclass
class WorldSet:
    """All enumerated histories, each one an action tuple with its own trace."""

    theory: BasicActionTheory
    worlds: tuple  # tuples of ActionTerm, S0 as the empty tuple
    traces: dict = field(default_factory=dict)
    _holds_cache: dict = field(default_factory=dict)

    def trace_of(self, world: tuple) -> Trace:
        tr = self.traces.get(world)
        if tr is None:
            tr = Trace(self.theory, world)
            self.traces[world] = tr
        return tr

    def holds(self, phi: SuppressedFormula, world: tuple) -> bool:
        key = (phi, world)
        hit = self._holds_cache.get(key)
        if hit is None:
            tr = self.trace_of(world)
            hit = eval_formula(tr, phi.restore(tr.prefix(len(world))))
            self._holds_cache[key] = hit
        return hit


def enumerate_situations(
    bat: BasicActionTheory,
    depth: int,
    times: Sequence[int] = (1, 2, 3),
    alphabet: Optional[Sequence] = None,
    budget: int = DEFAULT_BUDGET,
    executable_only: bool = False,
) -> WorldSet:
    """All histories of length <= depth with non-decreasing action times.

    The alphabet is a sequence of (action name, object args) templates;
    omitted, it comes from the theory's alphabet block.  Enumeration stops
    with BudgetExceeded once the world count would pass the budget.
    """
    templates = tuple(alphabet) if alphabet is not None else bat.alphabet_hints
    if not templates:
        raise ValueError("no enumeration alphabet: declare an alphabet block or pass one explicitly")
    grid = tuple(sorted(times))

    worlds = [()]
    frontier = [()]
    for _ in range(depth):
        nxt = []
        for w in frontier:
            last = w[-1].time if w else None
            for name, args in templates:
                for t in grid:
                    if last is not None and t < last:
                        continue
                    child = w + (ActionTerm(name, tuple(args) + (t,)),)
                    nxt.append(child)
                    if len(worlds) + len(nxt) > budget:
                        raise BudgetExceeded(f"more than {budget} situations at depth {depth}")
        worlds.extend(nxt)
        frontier = nxt

    ws = WorldSet(bat, tuple(worlds))
    if executable_only:
        keep = tuple(w for w in ws.worlds if executable(ws.trace_of(w)))
        ws = WorldSet(bat, keep, ws.traces)
    return ws


# ---------------------------------------------------------------------------
# Standalone store derivation (the reference side of the cross-check)
# ---------------------------------------------------------------------------


def reference_store(bat: BasicActionTheory, world: tuple, trace: Optional[Trace] = None) -> list:
    """In-force set at every prefix of one history, recomputed from scratch.

    For each trigger occurrence the whole in-force interval is worked out
    directly on the raw trace: window end from the times, discharge from the
    first fulfilling or stopping step, one pass per declaration.
    """
    tr = trace if trace is not None else Trace(bat, world)
    n = len(world)
    starts = tr.starts
    sets: list = [set() for _ in range(n + 1)]

    for i in range(1, n + 1):
        action = world[i - 1]
        for decl in bat.obligation_decls:
            if decl.trigger != action.functor:
                continue
            trig = bat.actions[decl.trigger]
            binding = dict(zip(trig.object_params, action.args[: len(trig.object_params)]))
            phi = decl.obliged.instantiate(binding)
            t1 = starts[i]
            t2 = t1 + decl.window

            def truth(j: int) -> bool:
                return eval_formula(tr, phi.restore(tr.prefix(j)))

            winend = i
            for j in range(i, n + 1):
                if starts[j] <= t2:
                    winend = j

            stop = None
            for j in range(i + 1, winend + 1):
                if _stopper_matches(bat, decl, binding, world[j - 1]):
                    stop = j
                    break

            if decl.otype is OblType.PUNCTUAL:
                end = i
            elif decl.otype is OblType.ACHIEVEMENT and decl.variant is AchievementVariant.NONPREEMPTIVE:
                fulfil = None
                for j in range(i + 1, winend + 1):
                    if truth(j):
                        fulfil = j
                        break
                if fulfil is not None and (stop is None or fulfil <= stop):
                    end = fulfil
                elif stop is not None:
                    end = stop - 1
                else:
                    end = winend
            else:
                end = stop - 1 if stop is not None else winend

            for j in range(i, end + 1):
                sets[j].add(phi)

    return [frozenset(s) for s in sets]


def _stopper_matches(bat: BasicActionTheory, decl, binding: dict, action: ActionTerm) -> bool:
    if action.functor not in decl.stoppers:
        return False
    trig = bat.actions[decl.trigger]
    by_name = {p.name: binding[p] for p in trig.object_params if p in binding}
    stop_decl = bat.actions[action.functor]
    for p, arg in zip(stop_decl.object_params, action.args):
        want = by_name.get(p.name)
        if want is not None and arg != want:
            return False
    return True


# ---------------------------------------------------------------------------
# Modal semantics
# ---------------------------------------------------------------------------


def accessible_worlds(ws: WorldSet, store: frozenset) -> list:
    """Histories satisfying everything in the store; all of them when it is empty."""
    out = []
    for w in ws.worlds:
        if all(ws.holds(psi, w) for psi in store):
            out.append(w)
    return out


def modal_oblg(ws: WorldSet, store: frozenset, phi: SuppressedFormula, _s=None) -> bool:
    """phi is obligatory iff it holds at every accessible history."""
    return all(ws.holds(phi, w) for w in accessible_worlds(ws, store))


# ---------------------------------------------------------------------------
# Equivalence check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Discrepancy:
    world: tuple
    formula: SuppressedFormula
    monitor_verdict: bool
    modal_verdict: bool


@dataclass
class EquivalenceReport:
    worlds: int
    candidates: tuple
    discrepancies: tuple

    @property
    def ok(self) -> bool:
        return not self.discrepancies


def candidate_formulas(bat: BasicActionTheory, templates: Sequence) -> tuple:
    """Ground formulas the check ranges over: every obligation a template
    trigger can produce, plus the compensations owed for them."""
    out = []
    seen = set()
    for decl in bat.obligation_decls:
        trig = bat.actions.get(decl.trigger)
        if trig is None:
            continue
        for name, args in templates:
            if name != decl.trigger:
                continue
            binding = dict(zip(trig.object_params, args))
            phi = decl.obliged.instantiate(binding)
            if phi not in seen:
                seen.add(phi)
                out.append(phi)
            comps, _ = bat.compensations_for(phi)
            for c in comps:
                if c not in seen:
                    seen.add(c)
                    out.append(c)
    return tuple(out)


def check_equivalence(
    bat: BasicActionTheory,
    depth: int,
    times: Sequence[int] = (1, 2, 3),
    alphabet: Optional[Sequence] = None,
    budget: int = DEFAULT_BUDGET,
    executable_only: bool = False,
    mutation: Optional[str] = None,
) -> EquivalenceReport:
    """Compare the monitor's store verdicts with the possible-worlds semantics.

    mutation='drop-discharge' runs the monitor with discharge handling turned
    off; the run must then report discrepancies, which demonstrates the check
    can actually fail.
    """
    if mutation not in (None, "drop-discharge"):
        raise ValueError(f"unknown mutation {mutation!r}")
    templates = tuple(alphabet) if alphabet is not None else bat.alphabet_hints
    ws = enumerate_situations(bat, depth, times, templates, budget, executable_only)
    candidates = candidate_formulas(bat, templates)

    # Truth tables per candidate over all worlds, so accessibility reduces to set algebra.
    truth_sets: dict = {}
    for phi in candidates:
        truth_sets[phi] = {i for i, w in enumerate(ws.worlds) if ws.holds(phi, w)}
    everything = set(range(len(ws.worlds)))

    discrepancies = []
    for w in ws.worlds:
        profile = run_monitor(bat, w, drop_discharge=(mutation == "drop-discharge"))
        monitor_store = profile.in_force_at(len(w))
        ref = reference_store(bat, w, ws.trace_of(w))[len(w)]

        accessible = set(everything)
        for psi in ref:
            ts = truth_sets.get(psi)
            if ts is None:
                ts = {i for i, v in enumerate(ws.worlds) if ws.holds(psi, v)}
                truth_sets[psi] = ts
            accessible &= ts

        for phi in candidates:
            monitor_verdict = phi in monitor_store
            modal_verdict = accessible <= truth_sets[phi]
            if monitor_verdict != modal_verdict:
                discrepancies.append(Discrepancy(w, phi, monitor_verdict, modal_verdict))

        # Soundness: the conjunction of everything in force must itself be
        # obligatory under the literal reading.
        if len(ref) > 1:
            conj = SuppressedFormula(And(tuple(sorted((p.body for p in ref), key=repr))))
            if not all(ws.holds(conj, ws.worlds[i]) for i in accessible):
                discrepancies.append(Discrepancy(w, conj, True, False))

    return EquivalenceReport(worlds=len(ws.worlds), candidates=candidates, discrepancies=tuple(discrepancies))
