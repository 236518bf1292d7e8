"""Command-line front end.

Commands:

* ``check PROBLEM SYMMETRY``      - semi-invariance + linearized conditions
* ``currents PROBLEM SYMMETRY``   - emit the k*(m+1) conserved currents
* ``verify PROBLEM SYMMETRY TRAJ``- full pipeline incl. conservation
* ``simulate PROBLEM TRAJ``       - integration and extremality checks only

Exit codes: 0 pass, 1 verdict fail, 2 usage/parse/validation error.

A human-readable report goes to stdout (or the machine JSON with
``--format machine``); the same data is always written as ``report.json``
into the output directory, next to one CSV per trajectory and one per
(current, trajectory) pair.  Reports carry no timestamps and are
byte-identical across runs with the same configuration and seed.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

from . import __version__, engine
from .conservation import ConservationReport, conservation_suite
from .documents import (
    DocumentError,
    document_digest,
    load_problem,
    load_symmetry,
    load_trajectory_spec,
)
from .expr import ExprError, SampleEnv
from .extremal import (
    ExtremalError,
    IntegrationBlowupError,
    Trajectory,
    extremality_report,
    integrate_extremal,
)
from .noether import currents_report, generate_currents
from .problem import validate_problem
from .symmetry import InvarianceReport, run_invariance_checks

PASS = "PASS"
FAIL = "FAIL"


def _env_dict(env: SampleEnv | None):
    return None if env is None else env.named()


def _verdict_dict(v) -> dict:
    return {
        "equation": v.equation,
        "passed": v.passed,
        "max_scaled_residual": v.max_scaled_residual,
        "witness": _env_dict(v.witness),
        "witness_value": v.witness_value,
        "error": v.error,
    }


def _invariance_dict(rep: InvarianceReport) -> dict:
    return {
        "trials": rep.trials,
        "tol": rep.tol,
        "seed": rep.seed,
        "linearized_tol": rep.linearized_tol,
        "full": [_verdict_dict(v) for v in rep.full],
        "linearized": [
            {
                "i": g.i,
                "j": g.j,
                "passed": g.passed,
                "equations": [_verdict_dict(v) for v in g.equations],
            }
            for g in rep.linearized
        ],
        "controldot_dependence": rep.controldot_dependence,
        "full_pass": rep.full_pass,
        "linearized_pass": rep.linearized_pass,
        "overall": rep.overall,
    }


def _conservation_dict(rep: ConservationReport) -> dict:
    return {
        "passed": rep.passed,
        "warnings": list(rep.warnings),
        "records": [
            {
                "i": r.current_i,
                "j": r.current_j,
                "trajectory": r.trajectory,
                "mean": r.mean,
                "drift": r.drift,
                "relative_drift": r.relative_drift,
                "tolerance": r.tolerance,
                "conserved": r.conserved,
                "error": r.error,
            }
            for r in rep.records
        ],
    }


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "unnamed"


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _write_trajectory_csv(outdir: str, traj: Trajectory) -> str:
    n, r = traj.n, traj.r
    header = (
        ["t"]
        + [f"x{i}" for i in range(1, n + 1)]
        + [f"u{j}" for j in range(1, r + 1)]
        + [f"psi{i}" for i in range(1, n + 1)]
        + ["H"]
    )
    path = os.path.join(outdir, f"{_slug(traj.name)}.csv")
    rows = (
        [traj.times[i], *traj.x[i], *traj.u[i], *traj.psi[i], traj.H_values[i]]
        for i in range(len(traj.times))
    )
    _write_csv(path, header, rows)
    return path


def _report_text(report: dict) -> str:
    lines = [f"noethercheck {report['version']} - {report['command']}"]
    lines.append(f"problem: {report['problem']['name']} ({report['problem']['digest']})")
    if report.get("symmetry"):
        lines.append(f"symmetry digest: {report['symmetry']['digest']}")
    inv = report.get("invariance")
    if inv:
        lines.append("invariance:")
        for v in inv["full"]:
            status = PASS if v["passed"] else FAIL
            lines.append(
                f"  full {v['equation']:<8} {status}  max scaled residual "
                f"{v['max_scaled_residual']:.3e}"
            )
            if not v["passed"] and v["witness"] is not None:
                lines.append(f"    witness value {v['witness_value']:.6e} at:")
                for name, val in v["witness"].items():
                    lines.append(f"      {name} = {val!r}")
            if v["error"]:
                lines.append(f"    error: {v['error']}")
        for g in inv["linearized"]:
            status = PASS if g["passed"] else FAIL
            worst = max(e["max_scaled_residual"] for e in g["equations"])
            lines.append(
                f"  linearized (i={g['i']}, j={g['j']}) {status}  "
                f"max scaled residual {worst:.3e}"
            )
        if inv["controldot_dependence"]:
            lines.append(
                "  note: residuals depend on control derivatives (du); the "
                "checks treat du as a free symbol"
            )
        lines.append(
            f"  full: {PASS if inv['full_pass'] else FAIL}, linearized: "
            f"{PASS if inv['linearized_pass'] else FAIL}"
        )
    if report.get("forced"):
        lines.append("warning: invariance gate skipped via --force")
    cur = report.get("currents")
    if cur:
        lines.append(
            f"currents: {cur['count']} total, {cur['nontrivial_count']} non-trivial"
        )
        for c in cur["currents"]:
            tag = "trivial" if c["trivial"] else "non-trivial"
            lines.append(f"  (i={c['i']}, j={c['j']}) [{tag}]  {c['expression']}")
    for t in report.get("trajectories", []):
        if t.get("error"):
            lines.append(f"trajectory {t['name']}: ERROR {t['error']}")
            continue
        ex = t["extremality"]
        lines.append(
            f"trajectory {t['name']}: steps={t['steps']} psi0={t['psi0']!r} "
            f"({'normal' if ex['normal'] else 'abnormal'})"
        )
        lines.append(
            f"  adjoint residual {ex['adjoint_residual_max']:.3e} "
            f"(tol {ex['adjoint_tol']:.1e}) "
            f"{PASS if ex['adjoint_pass'] else FAIL}"
        )
        lines.append(
            f"  maximality violation {ex['maximality_violation_max']:.3e} "
            f"(tol {ex['maximality_tol']:.1e}) "
            f"{PASS if ex['maximality_pass'] else FAIL}"
        )
        lines.append(
            f"  dH/dt mismatch {ex['dHdt_mismatch_max']:.3e} "
            f"(tol {ex['dHdt_tol']:.1e}) {PASS if ex['dHdt_pass'] else FAIL}"
        )
        if ex["boundary_supremum"]:
            lines.append(
                "  warning: the Hamiltonian grows toward an open control "
                "bound; the maximality condition may only hold where dH/du = 0"
            )
        for w in t.get("warnings", []):
            lines.append(f"  warning: {w}")
    cons = report.get("conservation")
    if cons:
        lines.append(f"conservation: {PASS if cons['passed'] else FAIL}")
        for r in cons["records"]:
            status = PASS if r["conserved"] else FAIL
            if r["error"]:
                lines.append(
                    f"  C[i={r['i']},j={r['j']}] on {r['trajectory']}: "
                    f"ERROR {r['error']}"
                )
            else:
                lines.append(
                    f"  C[i={r['i']},j={r['j']}] on {r['trajectory']}: relative "
                    f"drift {r['relative_drift']:.3e} (tol {r['tolerance']:.1e}) {status}"
                )
        for w in cons["warnings"]:
            lines.append(f"  warning: {w}")
    lines.append(f"overall: {PASS if report['overall_pass'] else FAIL}")
    return "\n".join(lines) + "\n"


def _emit(report: dict, args) -> None:
    os.makedirs(args.out, exist_ok=True)
    machine = json.dumps(report, sort_keys=True, indent=2) + "\n"
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        fh.write(machine)
    if args.format == "machine":
        sys.stdout.write(machine)
    else:
        sys.stdout.write(_report_text(report))


def _base_report(command: str, args, problem, problem_doc) -> dict:
    return {
        "tool": "noethercheck",
        "version": __version__,
        "backend": engine.BACKEND,
        "command": command,
        "config": {
            "trials": args.trials,
            "tol": args.tol,
            "seed": args.seed,
            "steps": getattr(args, "steps", None),
            "samples": getattr(args, "samples", None),
            "force": getattr(args, "force", False),
            "out": args.out,
            "format": args.format,
        },
        "problem": {"name": problem.name, "digest": document_digest(problem_doc)},
    }


def _load_validated_problem(path: str):
    problem, doc = load_problem(path)
    diagnostics = validate_problem(problem)
    if diagnostics:
        msgs = "; ".join(str(d) for d in diagnostics)
        raise DocumentError(f"{path}: invalid problem: {msgs}")
    return problem, doc


def _run_trajectories(problem, spec, args, report: dict) -> tuple[list, bool]:
    """Integrate all cases, write CSVs, and collect extremality verdicts."""
    trajs: list[Trajectory] = []
    entries = []
    all_ok = True
    os.makedirs(args.out, exist_ok=True)
    for case in spec.cases:
        entry = {"name": case.name, "psi0": case.psi0}
        try:
            traj = integrate_extremal(
                problem,
                case.law,
                case.x0,
                case.psi0,
                case.psi_a,
                case.steps,
                name=case.name,
            )
        except IntegrationBlowupError as exc:
            entry["error"] = str(exc)
            entries.append(entry)
            all_ok = False
            continue
        ex = extremality_report(problem, traj, args.samples, args.seed)
        h = traj.h
        adjoint_tol = max(1e-8, 100.0 * h * h)
        dhdt_tol = max(1e-8, 100.0 * h * h)
        maximality_tol = 1e-9
        verdicts = {
            "adjoint_residual_max": ex.adjoint_residual_max,
            "adjoint_tol": adjoint_tol,
            "adjoint_pass": ex.adjoint_residual_max <= adjoint_tol,
            "maximality_violation_max": ex.maximality_violation_max,
            "maximality_tol": maximality_tol,
            "maximality_pass": ex.maximality_violation_max <= maximality_tol,
            "dHdt_mismatch_max": ex.dHdt_mismatch_max,
            "dHdt_tol": dhdt_tol,
            "dHdt_pass": ex.dHdt_mismatch_max <= dhdt_tol,
            "normal": ex.normal,
            "boundary_supremum": ex.boundary_supremum,
        }
        ok = (
            verdicts["adjoint_pass"]
            and verdicts["maximality_pass"]
            and verdicts["dHdt_pass"]
        )
        all_ok = all_ok and ok
        entry.update(
            {
                "steps": traj.steps,
                "h": traj.h,
                "J": traj.J_value,
                "extremality": verdicts,
                "warnings": list(ex.warnings),
                "csv": _write_trajectory_csv(args.out, traj),
                "error": None,
            }
        )
        entries.append(entry)
        trajs.append(traj)
    report["trajectories"] = entries
    return trajs, all_ok


def _write_current_csvs(outdir: str, currents, trajs, records) -> None:
    by_key = {(r.current_i, r.current_j, r.trajectory): r for r in records}
    for traj in trajs:
        for cur in currents:
            rec = by_key.get((cur.i, cur.j, traj.name))
            if rec is None or rec.values is None:
                continue
            path = os.path.join(
                outdir, f"{_slug(traj.name)}__current_i{cur.i}_j{cur.j}.csv"
            )
            _write_csv(path, ["t", "current"], zip(traj.times, rec.values))


def cmd_check(args) -> int:
    problem, pdoc = _load_validated_problem(args.problem)
    sym, sdoc = load_symmetry(args.symmetry, problem)
    report = _base_report("check", args, problem, pdoc)
    report["symmetry"] = {"digest": document_digest(sdoc)}
    inv = run_invariance_checks(sym, problem, args.trials, args.tol, args.seed)
    report["invariance"] = _invariance_dict(inv)
    report["overall_pass"] = inv.overall
    _emit(report, args)
    return 0 if inv.overall else 1


def cmd_currents(args) -> int:
    problem, pdoc = _load_validated_problem(args.problem)
    sym, sdoc = load_symmetry(args.symmetry, problem)
    report = _base_report("currents", args, problem, pdoc)
    report["symmetry"] = {"digest": document_digest(sdoc)}
    inv = run_invariance_checks(sym, problem, args.trials, args.tol, args.seed)
    report["invariance"] = _invariance_dict(inv)
    gate_ok = inv.overall
    report["forced"] = bool(args.force and not gate_ok)
    if not gate_ok and not args.force:
        report["overall_pass"] = False
        _emit(report, args)
        return 1
    currents = generate_currents(sym, problem, args.trials, args.tol, args.seed)
    report["currents"] = currents_report(currents)
    report["overall_pass"] = True
    _emit(report, args)
    return 0


def cmd_verify(args) -> int:
    problem, pdoc = _load_validated_problem(args.problem)
    sym, sdoc = load_symmetry(args.symmetry, problem)
    spec, tdoc = load_trajectory_spec(args.trajectories, problem, args.steps)
    report = _base_report("verify", args, problem, pdoc)
    report["symmetry"] = {"digest": document_digest(sdoc)}
    report["trajectory_spec"] = {"digest": document_digest(tdoc)}
    inv = run_invariance_checks(sym, problem, args.trials, args.tol, args.seed)
    report["invariance"] = _invariance_dict(inv)
    currents = generate_currents(sym, problem, args.trials, args.tol, args.seed)
    report["currents"] = currents_report(currents)
    trajs, extremality_ok = _run_trajectories(problem, spec, args, report)
    cons = conservation_suite(currents, trajs)
    report["conservation"] = _conservation_dict(cons)
    _write_current_csvs(args.out, currents, trajs, cons.records)
    integrated_all = all(t.get("error") is None for t in report["trajectories"])
    overall = inv.overall and extremality_ok and cons.passed and integrated_all
    report["overall_pass"] = overall
    _emit(report, args)
    return 0 if overall else 1


def cmd_simulate(args) -> int:
    problem, pdoc = _load_validated_problem(args.problem)
    spec, tdoc = load_trajectory_spec(args.trajectories, problem, args.steps)
    report = _base_report("simulate", args, problem, pdoc)
    report["trajectory_spec"] = {"digest": document_digest(tdoc)}
    _, extremality_ok = _run_trajectories(problem, spec, args, report)
    integrated_all = all(t.get("error") is None for t in report["trajectories"])
    report["overall_pass"] = extremality_ok and integrated_all
    _emit(report, args)
    return 0 if report["overall_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noethercheck",
        description=(
            "Verify gauge symmetries of optimal control problems, construct "
            "their conserved currents, and certify conservation along "
            "candidate Pontryagin extremals."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trajectories=False):
        p.add_argument("--trials", type=int, default=200, help="zero-test sample count")
        p.add_argument("--tol", type=float, default=1e-9, help="zero-test tolerance")
        p.add_argument("--seed", type=int, default=0, help="sampling seed")
        p.add_argument(
            "--out", default="noethercheck-out", help="output directory for reports"
        )
        p.add_argument("--format", choices=("text", "machine"), default="text")
        if trajectories:
            p.add_argument(
                "--steps", type=int, default=1000, help="default RK4 step count"
            )
            p.add_argument(
                "--samples",
                type=int,
                default=16,
                help="maximality samples per node",
            )

    p_check = sub.add_parser("check", help="run the semi-invariance checks")
    p_check.add_argument("problem")
    p_check.add_argument("symmetry")
    common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_cur = sub.add_parser("currents", help="emit the conserved currents")
    p_cur.add_argument("problem")
    p_cur.add_argument("symmetry")
    p_cur.add_argument(
        "--force",
        action="store_true",
        help="emit currents even when the invariance gate fails",
    )
    common(p_cur)
    p_cur.set_defaults(func=cmd_currents)

    p_ver = sub.add_parser("verify", help="full pipeline incl. conservation")
    p_ver.add_argument("problem")
    p_ver.add_argument("symmetry")
    p_ver.add_argument("trajectories")
    common(p_ver, trajectories=True)
    p_ver.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="integration only, no currents")
    p_sim.add_argument("problem")
    p_sim.add_argument("trajectories")
    common(p_sim, trajectories=True)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (DocumentError, ExprError, ExtremalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
