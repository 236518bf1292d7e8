"""Gauge symmetry candidates and the semi-invariance checks.

A candidate transformation group maps (t, x, u) to (T, X, U) and may depend
on k arbitrary functions of time through jet variables up to order m.  The
group must reduce to the identity when all jets vanish, which is enforced
at construction.

Two layers of checks are provided:

* the full semi-invariance identities, which relate the transformed cost
  rate and dynamics to the originals up to an exact derivative of the gauge
  term F and weighted total-derivative terms, and
* the linearized conditions, obtained by differentiating those identities
  with respect to each jet variable and then restricting all jets to zero.

Every check is a randomized zero-identity test on a residual expression;
a control-derivative (du) symbol surviving in some residual is reported via
``controldot_dependence`` since such identities are required to hold for
all values of du.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .expr import (
    Expr,
    ExprError,
    SampleEnv,
    SamplerExhaustedError,
    Sym,
    TIME,
    Var,
    add,
    control,
    has_kind,
    is_zero,
    jet,
    mul,
    neg,
    partial,
    restrict_to_zero_jets,
    state,
    sub,
    substitute,
    symbols,
    total_derivative,
)
from .problem import OcpProblem


class SymmetryError(ExprError):
    """The candidate transformation group is structurally invalid."""


_GROUP_KINDS = ("t", "x", "u", "p")


@dataclass(frozen=True)
class GaugeSymmetry:
    """Candidate gauge symmetry: new time T, new state X, new control U,
    gauge term F, and the k x (m+1) weight matrix ``lam``.

    All expressions may use t, x, u and jets of order up to m.  The zero-jet
    restriction of (T, X, U) must be the identity transformation; violating
    that raises :class:`SymmetryError` at construction.
    """

    k: int
    m: int
    T: Expr
    X: tuple[Expr, ...]
    U: tuple[Expr, ...]
    F: Expr
    lam: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.k < 1:
            raise SymmetryError("need at least one arbitrary function (k >= 1)")
        if self.m < 0:
            raise SymmetryError("jet order m must be >= 0")
        if len(self.lam) != self.k or any(len(row) != self.m + 1 for row in self.lam):
            raise SymmetryError(
                f"weight matrix must be {self.k} x {self.m + 1} (one row per "
                "function, one column per jet order)"
            )
        n, r = self.n, self.r
        for label, e in self._labeled_exprs():
            for s in symbols(e):
                if s.kind not in _GROUP_KINDS:
                    raise SymmetryError(f"{label} must not contain {s.name}")
                if s.kind == "p" and (s.index > self.k or s.order > self.m):
                    raise SymmetryError(
                        f"{label} uses jet {s.name} outside k={self.k}, m={self.m}"
                    )
                if s.kind == "x" and s.index > n:
                    raise SymmetryError(f"{label} uses {s.name} but n={n}")
                if s.kind == "u" and s.index > r:
                    raise SymmetryError(f"{label} uses {s.name} but r={r}")
        self._check_identity_at_zero()

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def r(self) -> int:
        return len(self.U)

    def _labeled_exprs(self):
        yield "T", self.T
        for i, x_i in enumerate(self.X, 1):
            yield f"X[{i}]", x_i
        for j, u_j in enumerate(self.U, 1):
            yield f"U[{j}]", u_j
        yield "F", self.F

    def _check_identity_at_zero(self):
        pairs = [("T", self.T, Var(TIME))]
        pairs += [
            (f"X[{i}]", x_i, Var(state(i))) for i, x_i in enumerate(self.X, 1)
        ]
        pairs += [
            (f"U[{j}]", u_j, Var(control(j))) for j, u_j in enumerate(self.U, 1)
        ]
        for label, e, ident in pairs:
            verdict = is_zero(sub(restrict_to_zero_jets(e), ident))
            if not verdict.is_zero:
                raise SymmetryError(
                    f"{label} does not reduce to the identity at zero jets "
                    f"(residual {verdict.witness_value:.3g} at a sample point)"
                )

    def weight_expr(self) -> Expr:
        """The jet-weighted combination sum_{i,j} lam[j][i] * p_j^(i)."""
        terms = []
        for j in range(1, self.k + 1):
            for i in range(self.m + 1):
                w = self.lam[j - 1][i]
                if w != 0:
                    terms.append(mul(w, Var(jet(j, i))))
        return add(*terms)


def identity_symmetry(n: int, r: int, k: int = 1, m: int = 0) -> GaugeSymmetry:
    """The identity transformation, a gauge symmetry of every problem."""
    return GaugeSymmetry(
        k=k,
        m=m,
        T=Var(TIME),
        X=tuple(Var(state(i)) for i in range(1, n + 1)),
        U=tuple(Var(control(j)) for j in range(1, r + 1)),
        F=add(),
        lam=tuple((0.0,) * (m + 1) for _ in range(k)),
    )


def substitute_group(e: Expr, sym: GaugeSymmetry) -> Expr:
    """Compose an expression over (t, x, u) with the transformation group:
    t -> T, x_i -> X_i, u_j -> U_j simultaneously."""
    mapping: dict[Sym, Expr] = {TIME: sym.T}
    for i, x_i in enumerate(sym.X, 1):
        mapping[state(i)] = x_i
    for j, u_j in enumerate(sym.U, 1):
        mapping[control(j)] = u_j
    return substitute(e, mapping)


def _invariance_sides(
    sym: GaugeSymmetry, problem: OcpProblem
) -> tuple[Expr, Expr, list[Expr], list[Expr]]:
    """Left and right side of each invariance identity.

    Cost identity:      L(g) * D_t T  =  weight * D_t L + L + D_t F
    Dynamics identity:  D_t X_i       =  phi_i(g) * D_t T
    """
    phi = problem.phi
    dT = total_derivative(sym.T, phi)
    cost_lhs = mul(substitute_group(problem.L, sym), dT)
    cost_rhs = add(
        mul(sym.weight_expr(), total_derivative(problem.L, phi)),
        problem.L,
        total_derivative(sym.F, phi),
    )
    dyn_lhs = [total_derivative(x_i, phi) for x_i in sym.X]
    dyn_rhs = [mul(substitute_group(phi_i, sym), dT) for phi_i in phi]
    return cost_lhs, cost_rhs, dyn_lhs, dyn_rhs


def invariance_residuals(
    sym: GaugeSymmetry, problem: OcpProblem
) -> tuple[Expr, tuple[Expr, ...]]:
    """Residual expressions of the semi-invariance identities; the problem is
    semi-invariant under the group exactly when all of them vanish
    identically in (t, x, u), the jets, and du."""
    if sym.n != problem.n or sym.r != problem.r:
        raise SymmetryError(
            f"symmetry dimensions (n={sym.n}, r={sym.r}) do not match the "
            f"problem (n={problem.n}, r={problem.r})"
        )
    cost_lhs, cost_rhs, dyn_lhs, dyn_rhs = _invariance_sides(sym, problem)
    r_cost = sub(cost_lhs, cost_rhs)
    r_dyn = tuple(sub(l, r) for l, r in zip(dyn_lhs, dyn_rhs))
    return r_cost, r_dyn


def linearized_residuals(
    sym: GaugeSymmetry, problem: OcpProblem, i: int, j: int
) -> tuple[Expr, tuple[Expr, ...]]:
    """Residuals of the linearized conditions for jet order i and function j:
    both sides of each invariance identity are differentiated with respect
    to p_j^(i) and then restricted to zero jets.

    Differentiation happens before the restriction, so the contributions of
    the jet-order promotions inside the total derivatives are kept.
    """
    if not 0 <= i <= sym.m:
        raise SymmetryError(f"jet order {i} out of range 0..{sym.m}")
    if not 1 <= j <= sym.k:
        raise SymmetryError(f"function index {j} out of range 1..{sym.k}")
    cost_lhs, cost_rhs, dyn_lhs, dyn_rhs = _invariance_sides(sym, problem)
    s = jet(j, i)

    def lin(lhs: Expr, rhs: Expr) -> Expr:
        return sub(
            restrict_to_zero_jets(partial(lhs, s)),
            restrict_to_zero_jets(partial(rhs, s)),
        )

    return lin(cost_lhs, cost_rhs), tuple(
        lin(l, r) for l, r in zip(dyn_lhs, dyn_rhs)
    )


@dataclass(frozen=True)
class EquationVerdict:
    """Outcome of one residual's zero test."""

    equation: str
    passed: bool
    max_scaled_residual: float
    witness: SampleEnv | None = None
    witness_value: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class GridVerdict:
    """Linearized-condition verdicts for one (jet order i, function j)."""

    i: int
    j: int
    equations: tuple[EquationVerdict, ...]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.equations)


@dataclass(frozen=True)
class InvarianceReport:
    """Verdicts of the full semi-invariance check and of the linearized
    grid, plus the du-dependence flag.  ``overall`` requires every
    sub-verdict to pass."""

    full: tuple[EquationVerdict, ...]
    linearized: tuple[GridVerdict, ...]
    controldot_dependence: bool
    trials: int
    tol: float
    seed: int
    linearized_tol: float | None = None

    @property
    def full_pass(self) -> bool:
        return all(v.passed for v in self.full)

    @property
    def linearized_pass(self) -> bool:
        return all(g.passed for g in self.linearized)

    @property
    def overall(self) -> bool:
        return self.full_pass and self.linearized_pass


def _check_residual(
    name: str, e: Expr, trials: int, tol: float, seed: int
) -> EquationVerdict:
    try:
        verdict = is_zero(e, trials=trials, tol=tol, seed=seed)
    except SamplerExhaustedError as exc:
        return EquationVerdict(
            equation=name,
            passed=False,
            max_scaled_residual=float("inf"),
            error=str(exc),
        )
    return EquationVerdict(
        equation=name,
        passed=verdict.is_zero,
        max_scaled_residual=verdict.max_scaled_residual,
        witness=verdict.witness,
        witness_value=verdict.witness_value,
    )


def check_semi_invariance(
    sym: GaugeSymmetry,
    problem: OcpProblem,
    trials: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
) -> InvarianceReport:
    """Run the full semi-invariance identities through the zero test."""
    r_cost, r_dyn = invariance_residuals(sym, problem)
    residuals = [("cost", r_cost)] + [
        (f"dyn[{i}]", e) for i, e in enumerate(r_dyn, 1)
    ]
    verdicts = tuple(
        _check_residual(name, e, trials, tol, seed) for name, e in residuals
    )
    du_flag = any(has_kind(e, "du") for _, e in residuals)
    return InvarianceReport(
        full=verdicts,
        linearized=(),
        controldot_dependence=du_flag,
        trials=trials,
        tol=tol,
        seed=seed,
    )


def run_invariance_checks(
    sym: GaugeSymmetry,
    problem: OcpProblem,
    trials: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
    linearized_tol: float | None = None,
) -> InvarianceReport:
    """Full check plus the complete (m+1) x k linearized grid.

    The linearized residuals are smaller expressions than the full ones, so
    their default tolerance is 10x the full tolerance, matching the
    guarantee that a passing full check implies passing linearized checks at
    that looser tolerance.
    """
    full_report = check_semi_invariance(sym, problem, trials, tol, seed)
    lin_tol = 10.0 * tol if linearized_tol is None else linearized_tol
    grid: list[GridVerdict] = []
    du_flag = full_report.controldot_dependence
    for i in range(sym.m + 1):
        for j in range(1, sym.k + 1):
            lin_cost, lin_dyn = linearized_residuals(sym, problem, i, j)
            residuals = [("cost", lin_cost)] + [
                (f"dyn[{l}]", e) for l, e in enumerate(lin_dyn, 1)
            ]
            verdicts = tuple(
                _check_residual(name, e, trials, lin_tol, seed)
                for name, e in residuals
            )
            du_flag = du_flag or any(has_kind(e, "du") for _, e in residuals)
            grid.append(GridVerdict(i=i, j=j, equations=verdicts))
    return InvarianceReport(
        full=full_report.full,
        linearized=tuple(grid),
        controldot_dependence=du_flag,
        trials=trials,
        tol=tol,
        seed=seed,
        linearized_tol=lin_tol,
    )
