"""Situation-calculus engine and obligation-compliance monitor.

Parse an action theory with obligation-producing actions, evaluate fluents
over ground traces, track which obligations are in force when, classify them
by taxonomy type, detect violations, and schedule compensation.
"""

from .terms import (
    S0,
    ActionTerm,
    Const,
    DoTerm,
    S0Term,
    Sort,
    Var,
    action_time,
    do_all,
    mk_do,
    precedes,
    precedes_eq,
    start,
    term_to_text,
)
from .formulas import (
    HOLE,
    Boundedness,
    SuppressedFormula,
    classify_bounded,
    formula_to_text,
    suppress,
)
from .theory import (
    AchievementVariant,
    BasicActionTheory,
    CompensationDecl,
    Diagnostic,
    ObligationDecl,
    OblType,
    validate_theory,
)
from .parser import TheoryParseError, TraceParseError, parse_theory, parse_trace, print_theory
from .evaluator import (
    EvalError,
    PendingCompensation,
    Trace,
    eval_fluent,
    eval_formula,
    eval_poss,
    executability_report,
    executable,
)
from .monitor import (
    ForceProfile,
    ObligationInstance,
    ObligationMonitor,
    ViolationRecord,
    run_monitor,
)
from .compensation import (
    CompensationError,
    CompensationRecord,
    CompensationState,
    apply_compensation,
    compensation_state,
    is_compensable,
    is_compensated,
    pending_constraints,
    poss_exec_comp,
)
from .oracle import (
    BudgetExceeded,
    EquivalenceReport,
    WorldSet,
    check_equivalence,
    enumerate_situations,
    modal_oblg,
    reference_store,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
