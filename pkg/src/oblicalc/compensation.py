"""Compensation of violated obligations.

Every violated formula with a nonempty compensation set is owed amends: the
compensating formulas come in force once the compensation action is applied.
The compensation action is possible at the time points carved out, per
taxonomy type, from the violation found on the trace:

* punctual: exactly at the violated point's start time;
* preemptive achievement: any time up to the window end;
* nonpreemptive achievement: inside the window;
* maintenance: any time up to the window end;
* perdurant: between the window start and the deadline.

Compensation obligations default to nonpreemptive-achievement behaviour over
the window declared with the compensation rule, and are assumed never to be
violated themselves, so a compensated status is reached exactly when every
compensating formula has been fulfilled.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .evaluator import PendingCompensation
from .formulas import SuppressedFormula
from .monitor import (
    STATUS_ACTIVE,
    STATUS_COMPENSATED,
    STATUS_FULFILLED,
    STATUS_VIOLATED,
    ForceProfile,
    ObligationInstance,
)
from .theory import AchievementVariant, BasicActionTheory, OblType


class CompensationError(Exception):
    pass


REC_PENDING = "pending"
REC_APPLIED = "applied"
REC_COMPENSATED = "compensated"


@dataclass(frozen=True)
class CompensationRecord:
    formula: SuppressedFormula
    vtype: str
    enabling_time: int  # earliest time at which the compensation action is possible
    comp_formulas: tuple
    comp_window: int
    violated_ids: tuple
    instance_windows: tuple = ()  # per violated instance: (activation prefix, earliest enabling time)
    applied_at: Optional[int] = None
    comp_instance_ids: tuple = ()
    status: str = REC_PENDING

    @property
    def compensable(self) -> bool:
        return bool(self.comp_formulas)


@dataclass(frozen=True)
class CompensationState:
    records: tuple
    compensated_pairs: frozenset = frozenset()

    def record_for(self, phi: SuppressedFormula) -> Optional[CompensationRecord]:
        for r in self.records:
            if r.formula == phi:
                return r
        return None


def _enabling_window(inst: ObligationInstance) -> Tuple[int, int]:
    """Inclusive [lo, hi] range of times at which compensating this violation
    is possible."""
    if inst.otype is OblType.PUNCTUAL:
        return inst.t1, inst.t1
    if inst.otype is OblType.ACHIEVEMENT:
        if inst.variant is AchievementVariant.PREEMPTIVE:
            return 0, inst.t2
        return inst.t1, inst.t2
    if inst.otype is OblType.MAINTENANCE:
        return 0, inst.t2
    if inst.otype is OblType.PERDURANT:
        return inst.t1, inst.deadline
    raise CompensationError(f"unknown obligation type {inst.otype}")


def compensation_state(bat: BasicActionTheory, profile: ForceProfile) -> CompensationState:
    """Initial state: one pending record per distinct violated formula."""
    by_formula: dict = {}
    for inst in profile.instances:
        if inst.status != STATUS_VIOLATED or inst.is_compensation:
            continue
        lo, _hi = _enabling_window(inst)
        entry = by_formula.get(inst.formula)
        if entry is None:
            comps, window = bat.compensations_for(inst.formula)
            by_formula[inst.formula] = CompensationRecord(
                formula=inst.formula,
                vtype=inst.type_label(),
                enabling_time=lo,
                comp_formulas=comps,
                comp_window=window,
                violated_ids=(inst.id,),
                instance_windows=((inst.activation_index, lo),),
            )
        else:
            by_formula[inst.formula] = replace(
                entry,
                enabling_time=min(entry.enabling_time, lo),
                violated_ids=entry.violated_ids + (inst.id,),
                instance_windows=entry.instance_windows + ((inst.activation_index, lo),),
            )
    return CompensationState(records=tuple(by_formula.values()))


def is_compensable(bat: BasicActionTheory, phi: SuppressedFormula) -> bool:
    comps, _ = bat.compensations_for(phi)
    return bool(comps)


def is_compensated(state: CompensationState, phi: SuppressedFormula) -> bool:
    rec = state.record_for(phi)
    return rec is not None and rec.status == REC_COMPENSATED


def poss_exec_comp(profile: ForceProfile, phi: SuppressedFormula, t: int) -> bool:
    """Whether the compensation action for phi is possible at time t.

    True exactly when some violation of phi on the trace admits t under its
    type's time constraint.
    """
    for inst in profile.instances:
        if inst.formula != phi or inst.is_compensation:
            continue
        if inst.status not in (STATUS_VIOLATED, STATUS_COMPENSATED):
            continue
        lo, hi = _enabling_window(inst)
        if lo <= t <= hi:
            return True
    return False


def apply_compensation(
    state: CompensationState,
    profile: ForceProfile,
    phi: SuppressedFormula,
    t: int,
) -> Tuple[CompensationState, ForceProfile]:
    """Execute the compensation for phi at time t.

    Requires the compensation to be possible at t and still pending.  Brings
    one obligation instance in force per compensating formula, marks the pair
    compensated as each one is fulfilled, and removes phi from pending.
    """
    rec = state.record_for(phi)
    if rec is None or rec.status != REC_PENDING:
        raise CompensationError(f"no pending compensation for {phi}")
    if not rec.compensable:
        raise CompensationError(f"{phi} is not compensable: its compensation set is empty")
    if not poss_exec_comp(profile, phi, t):
        raise CompensationError(f"compensation of {phi} is not possible at {t}")

    trace = profile.trace
    n = len(trace)
    next_id = max((i.id for i in profile.instances), default=0) + 1
    t2 = t + rec.comp_window

    anchor = n + 1
    for k in range(0, n + 1):
        if trace.starts[k] >= t:
            anchor = k
            break
    winend = None
    for k in range(min(anchor, n), n + 1):
        if trace.starts[k] <= t2 and trace.starts[k] >= t:
            winend = k

    added = []
    pairs = set(state.compensated_pairs)
    all_fulfilled = True
    comp_ids = []
    for comp_phi in rec.comp_formulas:
        fulfill = None
        if winend is not None:
            for k in range(anchor, winend + 1):
                if profile.holds_at(comp_phi, k):
                    fulfill = k
                    break
        status = STATUS_FULFILLED if fulfill is not None else STATUS_ACTIVE
        force_end = fulfill if fulfill is not None else (winend if winend is not None else anchor - 1)
        inst = ObligationInstance(
            id=next_id,
            formula=comp_phi,
            otype=OblType.ACHIEVEMENT,
            variant=AchievementVariant.NONPREEMPTIVE,
            activation_index=min(anchor, n),
            t1=t,
            t2=t2,
            deadline=None,
            status=status,
            force_start=anchor,
            force_end=force_end,
            witnesses=(fulfill,) if fulfill is not None else (),
            fulfillment_index=fulfill,
            is_compensation=True,
        )
        comp_ids.append(next_id)
        next_id += 1
        added.append(inst)
        if fulfill is not None:
            pairs.add((phi, comp_phi))
        else:
            all_fulfilled = False

    replaced = {}
    if all_fulfilled:
        for vid in rec.violated_ids:
            old = profile.instance_by_id(vid)
            replaced[vid] = replace(old, status=STATUS_COMPENSATED)

    new_profile = profile.with_updates(replaced, added)
    new_rec = replace(
        rec,
        applied_at=t,
        comp_instance_ids=tuple(comp_ids),
        status=REC_COMPENSATED if all_fulfilled else REC_APPLIED,
    )
    new_records = tuple(new_rec if r.formula == phi else r for r in state.records)
    return CompensationState(records=new_records, compensated_pairs=frozenset(pairs)), new_profile


def pending_constraints(state: CompensationState) -> tuple:
    """Executability constraints induced by the current compensation state.

    One constraint per violated instance: actions executed after that
    instance's activation, at or after its earliest enabling time, are the
    ones that should have been compensation instead.
    """
    out = []
    for r in state.records:
        for activation, lo in r.instance_windows:
            out.append(
                PendingCompensation(
                    formula_text=str(r.formula),
                    min_enabling_time=lo,
                    active_from_action=activation,
                    applied_at=r.applied_at,
                )
            )
    return tuple(out)
