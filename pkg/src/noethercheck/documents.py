"""Input documents: TOML files for problems, symmetries, and trajectory specs.

All expression fields are strings in the grammar of
:mod:`noethercheck.grammar`.  Costates are accepted only inside control-law
expressions.

Problem document::

    name = "time_optimal"
    n = 1
    r = 1
    a = 0.0
    b = 1.0
    L = "1"
    phi = ["u1"]

    [[omega]]
    lower = -1.0
    upper = 1.0
    lower_open = true   # default true
    upper_open = true

Symmetry document::

    k = 1
    m = 2
    T = "p1 + t"
    X = ["(dp1 + 1)^2 * x1"]
    U = ["2*ddp1*x1 + (dp1 + 1)*u1"]
    F = "p1"                      # default "0"
    lambda = [[0.0, 0.0, 0.0]]    # k rows x (m+1) columns, default zeros

Trajectory spec document::

    steps = 1000                  # default for all cases

    [[trajectory]]
    name = "cruise"
    x0 = [0.0]
    psi0 = -1.0
    psi_a = [0.0]
    steps = 2000                  # optional override
    [trajectory.law]
    kind = "piecewise"            # or "feedback"
    breakpoints = [0.25, 0.75]
    values = [[0.9], [0.0], [-0.9]]
    # feedback laws instead use:  exprs = ["psi1"]
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .expr import Context, ExprError
from .grammar import parse
from .extremal import ControlLaw, FeedbackLaw, PiecewiseConstantLaw
from .problem import Bound, OcpProblem
from .symmetry import GaugeSymmetry


class DocumentError(Exception):
    """A document failed to load or validate; the message names the field."""


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise DocumentError(f"{path}: file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise DocumentError(f"{path}: invalid TOML: {exc}") from None


def document_digest(doc: dict) -> str:
    """Stable content digest of a loaded document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(canon).hexdigest()[:16]


def _require(doc: dict, key: str, types, path: str):
    if key not in doc:
        raise DocumentError(f"{path}: missing field {key!r}")
    v = doc[key]
    if not isinstance(v, types):
        raise DocumentError(f"{path}: field {key!r} has the wrong type")
    return v


def _parse_field(text, ctx: Context, label: str, path: str, **kw):
    if not isinstance(text, str):
        raise DocumentError(f"{path}: {label} must be an expression string")
    try:
        return parse(text, ctx, **kw)
    except ExprError as exc:
        raise DocumentError(f"{path}: {label}: {exc}") from None


def load_problem(path: str) -> tuple[OcpProblem, dict]:
    """Load a problem document; returns the problem and the raw dict."""
    doc = _load_toml(path)
    name = _require(doc, "name", str, path)
    n = _require(doc, "n", int, path)
    r = _require(doc, "r", int, path)
    a = float(_require(doc, "a", (int, float), path))
    b = float(_require(doc, "b", (int, float), path))
    if n < 1 or r < 1:
        raise DocumentError(f"{path}: dimensions must satisfy n >= 1 and r >= 1")
    ctx = Context(n=n, r=r)
    L = _parse_field(_require(doc, "L", str, path), ctx, "L", path)
    phi_texts = _require(doc, "phi", list, path)
    if len(phi_texts) != n:
        raise DocumentError(f"{path}: phi must have {n} components")
    phi = tuple(
        _parse_field(s, ctx, f"phi[{i}]", path) for i, s in enumerate(phi_texts, 1)
    )
    omega_docs = _require(doc, "omega", list, path)
    if len(omega_docs) != r:
        raise DocumentError(f"{path}: omega must have {r} bounds")
    omega = []
    for j, bd in enumerate(omega_docs, 1):
        if not isinstance(bd, dict):
            raise DocumentError(f"{path}: omega[{j}] must be a table")
        lower = float(_require(bd, "lower", (int, float), f"{path}:omega[{j}]"))
        upper = float(_require(bd, "upper", (int, float), f"{path}:omega[{j}]"))
        omega.append(
            Bound(
                lower=lower,
                upper=upper,
                lower_open=bool(bd.get("lower_open", True)),
                upper_open=bool(bd.get("upper_open", True)),
            )
        )
    problem = OcpProblem(
        name=name, n=n, r=r, a=a, b=b, L=L, phi=phi, omega=tuple(omega)
    )
    return problem, doc


def load_symmetry(path: str, problem: OcpProblem) -> tuple[GaugeSymmetry, dict]:
    """Load a symmetry document against a problem's dimensions."""
    doc = _load_toml(path)
    k = _require(doc, "k", int, path)
    m = _require(doc, "m", int, path)
    if k < 1 or m < 0:
        raise DocumentError(f"{path}: need k >= 1 and m >= 0")
    ctx = problem.context(k=k, m=m)
    T = _parse_field(_require(doc, "T", str, path), ctx, "T", path)
    x_texts = _require(doc, "X", list, path)
    u_texts = _require(doc, "U", list, path)
    if len(x_texts) != problem.n:
        raise DocumentError(f"{path}: X must have {problem.n} components")
    if len(u_texts) != problem.r:
        raise DocumentError(f"{path}: U must have {problem.r} components")
    X = tuple(
        _parse_field(s, ctx, f"X[{i}]", path) for i, s in enumerate(x_texts, 1)
    )
    U = tuple(
        _parse_field(s, ctx, f"U[{j}]", path) for j, s in enumerate(u_texts, 1)
    )
    F = _parse_field(doc.get("F", "0"), ctx, "F", path)
    lam_doc = doc.get("lambda")
    if lam_doc is None:
        lam = tuple((0.0,) * (m + 1) for _ in range(k))
    else:
        if (
            not isinstance(lam_doc, list)
            or len(lam_doc) != k
            or any(not isinstance(row, list) or len(row) != m + 1 for row in lam_doc)
        ):
            raise DocumentError(f"{path}: lambda must be a {k} x {m + 1} matrix")
        lam = tuple(tuple(float(v) for v in row) for row in lam_doc)
    try:
        sym = GaugeSymmetry(k=k, m=m, T=T, X=X, U=U, F=F, lam=lam)
    except ExprError as exc:
        raise DocumentError(f"{path}: {exc}") from None
    return sym, doc


@dataclass(frozen=True)
class TrajectoryCase:
    """One requested integration: law, initial data, and the step count."""

    name: str
    law: ControlLaw
    x0: tuple[float, ...]
    psi0: float
    psi_a: tuple[float, ...]
    steps: int


@dataclass(frozen=True)
class TrajectorySpec:
    cases: tuple[TrajectoryCase, ...]


def load_trajectory_spec(
    path: str, problem: OcpProblem, default_steps: int = 1000
) -> tuple[TrajectorySpec, dict]:
    """Load a trajectory spec; per-case steps fall back to the document's
    ``steps``, then to ``default_steps`` (the CLI --steps flag)."""
    doc = _load_toml(path)
    doc_steps = doc.get("steps", default_steps)
    if not isinstance(doc_steps, int) or doc_steps < 2:
        raise DocumentError(f"{path}: steps must be an integer >= 2")
    entries = _require(doc, "trajectory", list, path)
    if not isinstance(entries, list):
        raise DocumentError(f"{path}: trajectory must be an array of tables")
    ctx = problem.ctx
    cases = []
    for idx, entry in enumerate(entries, 1):
        where = f"{path}:trajectory[{idx}]"
        if not isinstance(entry, dict):
            raise DocumentError(f"{where}: must be a table")
        name = entry.get("name", f"trajectory_{idx}")
        x0 = _require(entry, "x0", list, where)
        psi_a = _require(entry, "psi_a", list, where)
        psi0 = float(_require(entry, "psi0", (int, float), where))
        if psi0 > 0:
            raise DocumentError(f"{where}: psi0 must be <= 0")
        if len(x0) != problem.n or len(psi_a) != problem.n:
            raise DocumentError(
                f"{where}: x0 and psi_a must have {problem.n} components"
            )
        steps = entry.get("steps", doc_steps)
        if not isinstance(steps, int) or steps < 2:
            raise DocumentError(f"{where}: steps must be an integer >= 2")
        law_doc = _require(entry, "law", dict, where)
        kind = _require(law_doc, "kind", str, where + ".law")
        if kind == "feedback":
            exprs = _require(law_doc, "exprs", list, where + ".law")
            if len(exprs) != problem.r:
                raise DocumentError(
                    f"{where}.law: feedback needs {problem.r} expressions"
                )
            parsed = tuple(
                _parse_field(s, ctx, f"law.exprs[{j}]", where, allow_costates=True)
                for j, s in enumerate(exprs, 1)
            )
            try:
                law: ControlLaw = FeedbackLaw(parsed)
            except ExprError as exc:
                raise DocumentError(f"{where}.law: {exc}") from None
        elif kind == "piecewise":
            breakpoints = tuple(
                float(v) for v in law_doc.get("breakpoints", [])
            )
            values_doc = _require(law_doc, "values", list, where + ".law")
            values = tuple(tuple(float(v) for v in row) for row in values_doc)
            try:
                law = PiecewiseConstantLaw(breakpoints=breakpoints, values=values)
            except ExprError as exc:
                raise DocumentError(f"{where}.law: {exc}") from None
            if any(len(v) != problem.r for v in values):
                raise DocumentError(
                    f"{where}.law: each value vector needs {problem.r} components"
                )
        else:
            raise DocumentError(f"{where}.law: unknown kind {kind!r}")
        cases.append(
            TrajectoryCase(
                name=str(name),
                law=law,
                x0=tuple(float(v) for v in x0),
                psi0=psi0,
                psi_a=tuple(float(v) for v in psi_a),
                steps=steps,
            )
        )
    return TrajectorySpec(cases=tuple(cases)), doc
