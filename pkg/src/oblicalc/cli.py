"""Command line front end.

    oblicalc validate <theory.bat>
    oblicalc monitor <theory.bat> <trace> [--auto-compensate] [--at T]
    oblicalc oracle <theory.bat> --depth K [--times 1,2,3] [--alphabet ...]

Reports go to standard output as a line-delimited record stream with a
summary footer; diagnostics go to standard error.  Exit codes: 0 clean,
1 violations or discrepancies, 2 input error, 3 trace not executable.
"""

from __future__ import annotations

import argparse
import hashlib
import re
import sys
from pathlib import Path

from .compensation import apply_compensation, compensation_state, pending_constraints
from .evaluator import executability_report
from .monitor import ForceProfile, run_monitor
from .oracle import BudgetExceeded, check_equivalence
from .parser import TraceParseError, parse_theory, parse_trace
from .terms import Const
from .theory import validate_theory

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_INPUT = 2
EXIT_NOT_EXECUTABLE = 3


def _load_theory(path: str, out_err) -> tuple:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        print(f"{path}: error: {e}", file=out_err)
        return None, None
    bat, diags = parse_theory(text, name=Path(path).stem)
    if bat is not None:
        diags = list(diags) + validate_theory(bat)
    return bat, diags


def cmd_validate(args, out=sys.stdout, err=sys.stderr) -> int:
    bat, diags = _load_theory(args.theory, err)
    if diags is None:
        return EXIT_INPUT
    for d in diags:
        print(d.render(args.theory), file=err)
    if diags:
        return EXIT_FINDINGS
    print(f"{args.theory}: ok", file=out)
    return EXIT_OK


def cmd_monitor(args, out=sys.stdout, err=sys.stderr) -> int:
    bat, diags = _load_theory(args.theory, err)
    if diags is None:
        return EXIT_INPUT
    if diags:
        for d in diags:
            print(d.render(args.theory), file=err)
        return EXIT_INPUT
    try:
        raw = Path(args.trace).read_bytes()
        actions = parse_trace(raw.decode("utf-8"), bat)
    except OSError as e:
        print(f"{args.trace}: error: {e}", file=err)
        return EXIT_INPUT
    except TraceParseError as e:
        print(f"{args.trace}:{e.line_no}: error: {e.reason}", file=err)
        return EXIT_INPUT

    if args.at is not None:
        actions = [a for a in actions if a.time <= args.at]

    profile = run_monitor(bat, actions)
    state = compensation_state(bat, profile)

    if args.auto_compensate:
        for rec in state.records:
            if rec.compensable:
                state, profile = apply_compensation(state, profile, rec.formula, rec.enabling_time)

    ok, reasons = executability_report(profile.trace, None, pending_constraints(state))
    _render_report(out, bat, args.trace, raw, profile, state, ok, reasons)

    if not ok:
        return EXIT_NOT_EXECUTABLE
    if profile.violations:
        return EXIT_FINDINGS
    return EXIT_OK


def _render_report(out, bat, trace_path, trace_bytes, profile: ForceProfile, state, exec_ok, reasons) -> None:
    digest = hashlib.sha256(trace_bytes).hexdigest()[:12]
    print(
        f"REPORT theory={bat.name} trace={Path(trace_path).name} sha256={digest} actions={len(profile.trace)}",
        file=out,
    )
    for inst in sorted(profile.instances, key=lambda i: i.id):
        deadline = inst.deadline if inst.deadline is not None else "-"
        trigger = str(inst.trigger_action) if inst.trigger_action is not None else "execComp"
        witnesses = ",".join(str(w) for w in inst.witnesses)
        print(
            f"INSTANCE id={inst.id} type={inst.type_label()} formula={inst.formula} "
            f"trigger={trigger} t1={inst.t1} t2={inst.t2} deadline={deadline} "
            f"status={inst.status} force=[{inst.force_start}..{inst.force_end}] witnesses=[{witnesses}]",
            file=out,
        )
    for v in profile.violations:
        witnesses = ",".join(str(w) for w in v.witnesses)
        print(
            f"VIOLATION instance={v.instance_id} type={v.vtype} formula={v.formula} witnesses=[{witnesses}]",
            file=out,
        )
    for rec in state.records:
        comps = ",".join(str(c) for c in rec.comp_formulas)
        applied = rec.applied_at if rec.applied_at is not None else "-"
        print(
            f"COMPENSATION formula={rec.formula} enabling={rec.enabling_time} comps={{{comps}}} "
            f"window={rec.comp_window} applied={applied} status={rec.status}",
            file=out,
        )
    print(f"EXECUTABLE verdict={'true' if exec_ok else 'false'}", file=out)
    for r in reasons:
        print(f"REASON {r}", file=out)
    print(
        f"SUMMARY instances={len(profile.instances)} violations={len(profile.violations)} "
        f"compensations={len(state.records)} executable={'true' if exec_ok else 'false'}",
        file=out,
    )


def _parse_alphabet(text: str):
    templates = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\(([^)]*)\)", part)
        if m is None:
            raise ValueError(f"bad alphabet entry {part!r}; expected name(Const, ...)")
        args = tuple(Const(a.strip()) for a in m.group(2).split(",") if a.strip())
        templates.append((m.group(1), args))
    return templates


def cmd_oracle(args, out=sys.stdout, err=sys.stderr) -> int:
    bat, diags = _load_theory(args.theory, err)
    if diags is None:
        return EXIT_INPUT
    if diags:
        for d in diags:
            print(d.render(args.theory), file=err)
        return EXIT_INPUT
    try:
        times = tuple(int(t) for t in args.times.split(","))
        alphabet = _parse_alphabet(args.alphabet) if args.alphabet else None
        report = check_equivalence(
            bat,
            depth=args.depth,
            times=times,
            alphabet=alphabet,
            executable_only=args.executable_worlds,
            mutation=args.mutate,
        )
    except (BudgetExceeded, ValueError) as e:
        print(f"oracle: error: {e}", file=err)
        return EXIT_INPUT
    print(
        f"ORACLE theory={bat.name} depth={args.depth} worlds={report.worlds} "
        f"candidates={len(report.candidates)} discrepancies={len(report.discrepancies)}",
        file=out,
    )
    for d in report.discrepancies:
        world = "[" + ", ".join(str(a) for a in d.world) + "]"
        print(
            f"DISCREPANCY world={world} formula={d.formula} monitor={d.monitor_verdict} modal={d.modal_verdict}",
            file=out,
        )
    return EXIT_OK if report.ok else EXIT_FINDINGS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oblicalc", description="Obligation compliance over timed action traces.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="parse and validate a theory file")
    v.add_argument("theory")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("monitor", help="replay a trace and report obligations, violations, compensations")
    m.add_argument("theory")
    m.add_argument("trace")
    m.add_argument("--auto-compensate", action="store_true", help="apply due compensations at their enabling times")
    m.add_argument("--at", type=int, default=None, help="only consider actions at or before this time")
    m.set_defaults(func=cmd_monitor)

    o = sub.add_parser("oracle", help="cross-check the monitor against possible-worlds semantics")
    o.add_argument("theory")
    o.add_argument("--depth", type=int, required=True)
    o.add_argument("--times", default="1,2,3", help="comma-separated time grid")
    o.add_argument("--alphabet", default=None, help="semicolon-separated templates, e.g. 'unlock(D);lock(D)'")
    o.add_argument("--executable-worlds", action="store_true", help="restrict accessibility to executable histories")
    o.add_argument("--mutate", choices=["drop-discharge"], default=None, help="self-test: run a deliberately broken monitor")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
