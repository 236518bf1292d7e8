"""Optimal control problem model and its Pontryagin Hamiltonian.

A problem in Lagrange form: minimize the integral of a running cost
L(t, x, u) over a fixed interval subject to dx/dt = phi(t, x, u) with
control values constrained to an open or closed box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .expr import (
    COSTATE0,
    Context,
    Expr,
    Var,
    add,
    costate,
    mul,
    symbols,
)


@dataclass(frozen=True)
class Bound:
    """One control component's admissible interval; infinite endpoints are
    allowed and openness is tracked per endpoint."""

    lower: float
    upper: float
    lower_open: bool = True
    upper_open: bool = True

    def contains_closure(self, v: float) -> bool:
        return self.lower <= v <= self.upper

    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class OcpProblem:
    """Optimal control problem data: dimensions, time interval, running
    cost L, dynamics phi, and the control box omega."""

    name: str
    n: int
    r: int
    a: float
    b: float
    L: Expr
    phi: tuple[Expr, ...]
    omega: tuple[Bound, ...]

    @property
    def ctx(self) -> Context:
        return Context(n=self.n, r=self.r)

    def context(self, k: int, m: int) -> Context:
        return Context(n=self.n, r=self.r, k=k, m=m)


_ALLOWED_KINDS = ("t", "x", "u")


def _check_expr(e: Expr, n: int, r: int, label: str, out: list[Diagnostic]):
    for s in symbols(e):
        if s.kind not in _ALLOWED_KINDS:
            out.append(Diagnostic(label, f"symbol {s.name} is not allowed here"))
        elif s.kind == "x" and not 1 <= s.index <= n:
            out.append(Diagnostic(label, f"state index {s.index} out of range 1..{n}"))
        elif s.kind == "u" and not 1 <= s.index <= r:
            out.append(
                Diagnostic(label, f"control index {s.index} out of range 1..{r}")
            )


def validate_problem(problem: OcpProblem) -> list[Diagnostic]:
    """Structural diagnostics; an empty list means the problem is usable."""
    out: list[Diagnostic] = []
    if problem.n < 1:
        out.append(Diagnostic("n", "state dimension must be >= 1"))
    if problem.r < 1:
        out.append(Diagnostic("r", "control dimension must be >= 1"))
    if not (math.isfinite(problem.a) and math.isfinite(problem.b)):
        out.append(Diagnostic("interval", "endpoints must be finite"))
    elif problem.a >= problem.b:
        out.append(Diagnostic("interval", f"degenerate interval [{problem.a}, {problem.b}]"))
    if len(problem.phi) != problem.n:
        out.append(
            Diagnostic("phi", f"expected {problem.n} components, got {len(problem.phi)}")
        )
    if len(problem.omega) != problem.r:
        out.append(
            Diagnostic(
                "omega", f"expected {problem.r} bounds, got {len(problem.omega)}"
            )
        )
    _check_expr(problem.L, problem.n, problem.r, "L", out)
    for i, phi_i in enumerate(problem.phi, 1):
        _check_expr(phi_i, problem.n, problem.r, f"phi[{i}]", out)
    for j, bound in enumerate(problem.omega, 1):
        if math.isnan(bound.lower) or math.isnan(bound.upper):
            out.append(Diagnostic(f"omega[{j}]", "bounds must not be NaN"))
        elif not bound.lower < bound.upper:
            out.append(
                Diagnostic(
                    f"omega[{j}]",
                    f"lower bound {bound.lower} not below upper bound {bound.upper}",
                )
            )
    return out


def build_hamiltonian(problem: OcpProblem) -> Expr:
    """Pontryagin Hamiltonian psi0*L + sum_i psi_i*phi_i as an expression
    over (t, x, u, psi0, psi)."""
    terms = [mul(Var(COSTATE0), problem.L)]
    for i, phi_i in enumerate(problem.phi, 1):
        terms.append(mul(Var(costate(i)), phi_i))
    return add(*terms)
