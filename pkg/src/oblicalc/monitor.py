"""The obligation store along a trace: activation, discharge, classification,
violation detection.

Each obligation-producing action instantiates a live obligation with an
in-force window counted from the trigger's time.  The store advances one
action at a time; once the trace is finished the profile is frozen and all
queries (what is in force when, which taxonomy class an interval realizes,
which obligations were violated) are read-only.

Operational readings used here:

* An achievement obligation is fulfilled by its formula holding at a strict
  successor of the activation prefix: the obliged state must be brought
  about after the trigger.  The preemptive variant is also satisfied by the
  formula having held at or before activation.
* Maintenance and perdurant obligations stay in force for their whole
  window; breaches do not remove them from force.
* A stopper action discharges an instance from the prefix it creates; the
  obligation was in force up to, but not at, the stopping prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .evaluator import EvalError, Trace, eval_formula
from .formulas import SuppressedFormula
from .terms import ActionTerm, SituationTerm
from .theory import AchievementVariant, BasicActionTheory, ObligationDecl, OblType

STATUS_ACTIVE = "active"
STATUS_FULFILLED = "fulfilled"
STATUS_STOPPED = "stopped"
STATUS_VIOLATED = "violated"
STATUS_COMPENSATED = "compensated"


@dataclass(frozen=True)
class ObligationInstance:
    """One live obligation produced along the trace (or by a compensation)."""

    id: int
    formula: SuppressedFormula
    otype: OblType
    variant: Optional[AchievementVariant]
    activation_index: int
    t1: int
    t2: int
    deadline: Optional[int]
    status: str
    force_start: int
    force_end: int
    witnesses: tuple
    fulfillment_index: Optional[int] = None
    stop_index: Optional[int] = None
    trigger_action: Optional[ActionTerm] = None
    is_compensation: bool = False

    def type_label(self) -> str:
        if self.otype is OblType.ACHIEVEMENT and self.variant is not None:
            return f"achievement.{self.variant.value}"
        return self.otype.value


@dataclass(frozen=True)
class ViolationRecord:
    instance_id: int
    formula: SuppressedFormula
    vtype: str
    t1: int
    t2: int
    deadline: Optional[int]
    witnesses: tuple  # prefix indices evidencing the violation


class _LiveInstance:
    """Mutable instance state while the trace is still growing."""

    def __init__(self, iid: int, decl: ObligationDecl, formula: SuppressedFormula, k: int, t1: int, trigger: ActionTerm, binding: dict):
        self.id = iid
        self.decl = decl
        self.formula = formula
        self.activation_index = k
        self.t1 = t1
        self.t2 = t1 + decl.window
        self.deadline = t1 + decl.deadline_offset if decl.otype is OblType.PERDURANT else None
        self.trigger = trigger
        self.binding = binding
        self.status = STATUS_ACTIVE
        self.fulfillment_index: Optional[int] = None
        self.stop_index: Optional[int] = None
        self.breaches: list = []
        self.early_witness: Optional[int] = None
        self.phi_by_prefix: dict = {}
        self.closed = False


class ObligationMonitor:
    """Single-writer monitor; feed actions with advance(), then freeze with finish()."""

    def __init__(self, theory: BasicActionTheory, drop_discharge: bool = False):
        self.theory = theory
        self.trace = Trace(theory, ())
        self._live: list = []
        self._next_id = 1
        # Verification hook: when set, stoppers and fulfillment no longer end
        # the in-force interval, which the possible-worlds cross-check must flag.
        self._drop_discharge = drop_discharge

    def advance(self, action: ActionTerm) -> None:
        """Append one action and update every live obligation."""
        self.trace = self.trace.extend(action)
        k = len(self.trace)
        at = self.trace.starts[k]

        for inst in self._live:
            if inst.closed:
                continue
            if at > inst.t2:
                self._expire(inst)
                continue
            self._update_live(inst, k, action)

        for decl in self.theory.obligation_decls:
            if decl.trigger == action.functor:
                self._activate(decl, action, k)

    def _phi_holds(self, inst: _LiveInstance, k: int) -> bool:
        if k not in inst.phi_by_prefix:
            inst.phi_by_prefix[k] = eval_formula(self.trace, inst.formula.restore(self.trace.prefix(k)))
        return inst.phi_by_prefix[k]

    def _activate(self, decl: ObligationDecl, action: ActionTerm, k: int) -> None:
        trig = self.theory.actions[decl.trigger]
        binding = dict(zip(trig.object_params, action.args[: len(trig.object_params)]))
        formula = decl.obliged.instantiate(binding)
        inst = _LiveInstance(self._next_id, decl, formula, k, self.trace.starts[k], action, binding)
        self._next_id += 1
        self._live.append(inst)

        if decl.otype is OblType.PUNCTUAL:
            ok = self._phi_holds(inst, k)
            inst.status = STATUS_FULFILLED if ok else STATUS_VIOLATED
            inst.closed = True
            return
        if decl.otype is OblType.ACHIEVEMENT and decl.variant is AchievementVariant.PREEMPTIVE:
            for j in range(0, k + 1):
                if self._phi_holds(inst, j):
                    inst.early_witness = j
                    break
        if decl.otype is OblType.MAINTENANCE and not self._phi_holds(inst, k):
            inst.breaches.append(k)
            inst.status = STATUS_VIOLATED

    def _update_live(self, inst: _LiveInstance, k: int, action: ActionTerm) -> None:
        decl = inst.decl
        if decl.otype is OblType.ACHIEVEMENT:
            if inst.status == STATUS_ACTIVE and self._phi_holds(inst, k):
                if decl.variant is AchievementVariant.NONPREEMPTIVE:
                    inst.status = STATUS_FULFILLED
                    inst.fulfillment_index = k
                    return
                if inst.early_witness is None:
                    inst.early_witness = k
            if inst.status == STATUS_ACTIVE and self._is_stopper(inst, action):
                inst.status = STATUS_STOPPED
                inst.stop_index = k
            return
        if decl.otype is OblType.MAINTENANCE:
            if not self._phi_holds(inst, k):
                inst.breaches.append(k)
                if inst.status == STATUS_ACTIVE:
                    inst.status = STATUS_VIOLATED
            if inst.status == STATUS_ACTIVE and self._is_stopper(inst, action):
                inst.status = STATUS_STOPPED
                inst.stop_index = k
            return
        if decl.otype is OblType.PERDURANT:
            self._phi_holds(inst, k)
            if inst.status == STATUS_ACTIVE and self._is_stopper(inst, action):
                inst.status = STATUS_STOPPED
                inst.stop_index = k
            return

    def _is_stopper(self, inst: _LiveInstance, action: ActionTerm) -> bool:
        if self._drop_discharge:
            return False
        if action.functor not in inst.decl.stoppers:
            return False
        decl = self.theory.actions[action.functor]
        trig = self.theory.actions[inst.decl.trigger]
        trig_by_name = {p.name: inst.binding[p] for p in trig.object_params if p in inst.binding}
        for p, arg in zip(decl.object_params, action.args):
            want = trig_by_name.get(p.name)
            if want is not None and arg != want:
                return False
        return True

    def _expire(self, inst: _LiveInstance) -> None:
        self._finalize(inst, self._window_end_index(inst))
        inst.closed = True

    def _window_end_index(self, inst: _LiveInstance) -> int:
        end = len(self.trace)
        k = inst.activation_index
        for j in range(inst.activation_index, end + 1):
            if self.trace.starts[j] <= inst.t2:
                k = j
        return k

    def _finalize(self, inst: _LiveInstance, window_end: int) -> None:
        decl = inst.decl
        if decl.otype is OblType.ACHIEVEMENT:
            if inst.status == STATUS_ACTIVE:
                if decl.variant is AchievementVariant.PREEMPTIVE and inst.early_witness is not None:
                    inst.status = STATUS_FULFILLED
                    inst.fulfillment_index = inst.early_witness
                else:
                    inst.status = STATUS_VIOLATED
        elif decl.otype is OblType.MAINTENANCE:
            if inst.status == STATUS_ACTIVE:
                inst.status = STATUS_FULFILLED
        elif decl.otype is OblType.PERDURANT:
            if inst.status == STATUS_ACTIVE:
                d_end = inst.activation_index
                for j in range(inst.activation_index, window_end + 1):
                    if self.trace.starts[j] <= inst.deadline:
                        d_end = j
                region = range(inst.activation_index, d_end + 1)
                if all(not self._phi_holds(inst, j) for j in region):
                    inst.status = STATUS_VIOLATED
                    inst.breaches = list(region)
                else:
                    inst.status = STATUS_FULFILLED

    def finish(self) -> "ForceProfile":
        """Close the trace and freeze the profile; unresolved windows resolve
        against the complete history."""
        end = len(self.trace)
        for inst in self._live:
            if not inst.closed:
                self._finalize(inst, self._window_end_index(inst))
                inst.closed = True

        instances = []
        for inst in self._live:
            winend = self._window_end_index(inst)
            force_end = min(winend, end)
            if inst.decl.otype is OblType.PUNCTUAL:
                force_end = inst.activation_index
            if inst.stop_index is not None and not self._drop_discharge:
                force_end = min(force_end, inst.stop_index - 1)
            if (
                inst.decl.otype is OblType.ACHIEVEMENT
                and inst.decl.variant is AchievementVariant.NONPREEMPTIVE
                and inst.fulfillment_index is not None
                and not self._drop_discharge
            ):
                force_end = min(force_end, inst.fulfillment_index)
            witnesses = self._witnesses(inst)
            instances.append(
                ObligationInstance(
                    id=inst.id,
                    formula=inst.formula,
                    otype=inst.decl.otype,
                    variant=inst.decl.variant,
                    activation_index=inst.activation_index,
                    t1=inst.t1,
                    t2=inst.t2,
                    deadline=inst.deadline,
                    status=inst.status,
                    force_start=inst.activation_index,
                    force_end=force_end,
                    witnesses=witnesses,
                    fulfillment_index=inst.fulfillment_index,
                    stop_index=inst.stop_index,
                    trigger_action=inst.trigger,
                )
            )
        return ForceProfile(self.trace, tuple(instances))

    def _witnesses(self, inst: _LiveInstance) -> tuple:
        if inst.status != STATUS_VIOLATED:
            if inst.fulfillment_index is not None:
                return (inst.fulfillment_index,)
            return ()
        if inst.decl.otype is OblType.PUNCTUAL:
            return (inst.activation_index,)
        if inst.decl.otype in (OblType.MAINTENANCE, OblType.PERDURANT):
            return tuple(inst.breaches)
        # Achievement violations: the whole scanned, fulfillment-free region.
        return tuple(range(inst.activation_index, self._window_end_index(inst) + 1))


def run_monitor(theory: BasicActionTheory, actions: Sequence[ActionTerm], drop_discharge: bool = False) -> "ForceProfile":
    mon = ObligationMonitor(theory, drop_discharge=drop_discharge)
    for a in actions:
        mon.advance(a)
    return mon.finish()


class StateView:
    """Membership view over the formulas true at one prefix."""

    def __init__(self, profile: "ForceProfile", index: Optional[int], note: str = ""):
        self._profile = profile
        self.index = index
        self.note = note

    def __contains__(self, phi: SuppressedFormula) -> bool:
        if self.index is None:
            return False
        return self._profile.holds_at(phi, self.index)

    def __bool__(self) -> bool:
        return self.index is not None


class ForceProfile:
    """Frozen result of a monitor run: per-prefix in-force sets plus queries."""

    def __init__(self, trace: Trace, instances: tuple):
        self.trace = trace
        self.instances = instances
        n = len(trace) + 1
        sets = [set() for _ in range(n)]
        for inst in instances:
            for k in range(inst.force_start, min(inst.force_end, n - 1) + 1):
                sets[k].add(inst.formula)
        self.force_sets = tuple(frozenset(s) for s in sets)
        self.violations = tuple(
            ViolationRecord(i.id, i.formula, i.type_label(), i.t1, i.t2, i.deadline, i.witnesses)
            for i in instances
            if i.status in (STATUS_VIOLATED, STATUS_COMPENSATED)
        )

    # -- indexing helpers ---------------------------------------------------

    def _k(self, s: Union[int, SituationTerm]) -> int:
        if isinstance(s, int):
            if not 0 <= s < len(self.force_sets):
                raise EvalError(f"prefix index {s} out of range")
            return s
        return self.trace.index_of(s)

    @property
    def last_index(self) -> int:
        return len(self.trace)

    def holds_at(self, phi: SuppressedFormula, s: Union[int, SituationTerm]) -> bool:
        k = self._k(s)
        return eval_formula(self.trace, phi.restore(self.trace.prefix(k)))

    # -- store queries -------------------------------------------------------

    def in_force_at(self, s: Union[int, SituationTerm]) -> frozenset:
        return self.force_sets[self._k(s)]

    def oblg(self, phi: SuppressedFormula, s: Union[int, SituationTerm]) -> bool:
        """Store reading of 'phi is obligatory at s'."""
        return phi in self.force_sets[self._k(s)]

    def force(self, t: int) -> frozenset:
        """In-force set at a time point: the set at the latest prefix starting
        at or before t (the store is a step function of time)."""
        best = None
        for k, st in enumerate(self.trace.starts):
            if st <= t:
                best = k
        if best is None:
            return frozenset()
        return self.force_sets[best]

    def state_at(self, t: int) -> StateView:
        """Membership view over formulas true at the prefix whose start is t."""
        best = None
        for k, st in enumerate(self.trace.starts):
            if st == t:
                best = k
        if best is None:
            return StateView(self, None, note=f"no situation at {t}")
        return StateView(self, best)

    # -- taxonomy classifiers -------------------------------------------------

    def classify_punctual(self, phi: SuppressedFormula, s: Union[int, SituationTerm]) -> bool:
        """In force at s but neither at its predecessor nor at its actual successor."""
        k = self._k(s)
        if not self.oblg(phi, k):
            return False
        if k > 0 and self.oblg(phi, k - 1):
            return False
        if k < self.last_index and self.oblg(phi, k + 1):
            return False
        return True

    def classify_punctual_at_time(self, phi: SuppressedFormula, t: int) -> bool:
        return any(st == t and self.classify_punctual(phi, k) for k, st in enumerate(self.trace.starts))

    def classify_persistent(self, phi: SuppressedFormula, s1, s2) -> bool:
        """In force throughout [s1, s2] and at neither boundary neighbour."""
        i1, i2 = self._interval(s1, s2)
        if not all(self.oblg(phi, k) for k in range(i1, i2 + 1)):
            return False
        if i1 > 0 and self.oblg(phi, i1 - 1):
            return False
        if i2 < self.last_index and self.oblg(phi, i2 + 1):
            return False
        return True

    def classify_achievement(self, phi: SuppressedFormula, s1, s2, variant: str = "plain") -> bool:
        """In force throughout [s1, s2]; the preemptive variant needs the state
        to witness phi at any prefix up to s2, the nonpreemptive one inside
        [s1, s2]."""
        i1, i2 = self._interval(s1, s2)
        if not all(self.oblg(phi, k) for k in range(i1, i2 + 1)):
            return False
        if variant == "plain":
            return True
        if variant == "preemptive":
            return any(self.holds_at(phi, j) for j in range(0, i2 + 1))
        if variant == "nonpreemptive":
            return any(self.holds_at(phi, j) for j in range(i1, i2 + 1))
        raise ValueError(f"unknown achievement variant {variant!r}")

    def classify_maintenance(self, phi: SuppressedFormula, s1, s2) -> bool:
        """In force and true in the state at every prefix of [s1, s2]."""
        i1, i2 = self._interval(s1, s2)
        return all(self.oblg(phi, k) and self.holds_at(phi, k) for k in range(i1, i2 + 1))

    def classify_perdurant(self, phi: SuppressedFormula, s1, d, s2) -> bool:
        """In force at every prefix from the deadline prefix d through s2."""
        i1, i2 = self._interval(s1, s2)
        idd = self._k(d)
        if not i1 <= idd <= i2:
            raise ValueError("deadline prefix outside the obligation interval")
        return all(self.oblg(phi, k) for k in range(idd, i2 + 1))

    def _interval(self, s1, s2):
        i1, i2 = self._k(s1), self._k(s2)
        if i1 > i2:
            raise ValueError("interval start does not precede its end")
        return i1, i2

    # -- violations ------------------------------------------------------------

    def detect_violation(self, inst: ObligationInstance) -> Optional[ViolationRecord]:
        for rec in self.violations:
            if rec.instance_id == inst.id:
                return rec
        return None

    def instance_by_id(self, iid: int) -> ObligationInstance:
        for inst in self.instances:
            if inst.id == iid:
                return inst
        raise KeyError(iid)

    def with_updates(self, replaced: dict, added: Sequence[ObligationInstance]) -> "ForceProfile":
        """A new profile with some instances replaced (by id) and new ones appended."""
        out = [replaced.get(i.id, i) for i in self.instances]
        out.extend(added)
        return ForceProfile(self.trace, tuple(out))
