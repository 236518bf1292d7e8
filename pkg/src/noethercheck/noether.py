"""Construction of the conserved currents guaranteed by a gauge symmetry.

For each jet order i = 0..m and each arbitrary function j = 1..k, the
current is assembled from the zero-jet restrictions of the partial
derivatives of the gauge term F, the new state X, and the new time T with
respect to p_j^(i):

    psi0 * (dF/dp_j^(i)|0 + lam[j][i] * L)
        + sum_l psi_l * dX_l/dp_j^(i)|0
        - H * dT/dp_j^(i)|0

with H the Pontryagin Hamiltonian kept in expanded form so that currents
are directly evaluable along trajectories.  Currents are emitted
unsimplified apart from constant folding; a current that tests identically
zero is flagged trivial.
"""

from __future__ import annotations

from dataclasses import dataclass

from .expr import (
    COSTATE0,
    Expr,
    Var,
    add,
    costate,
    is_zero,
    jet,
    mul,
    neg,
    partial,
    restrict_to_zero_jets,
)
from .grammar import to_text
from .problem import OcpProblem, build_hamiltonian
from .symmetry import GaugeSymmetry


@dataclass(frozen=True)
class NoetherCurrent:
    """One conserved current, labeled by jet order i and function index j.
    The expression is over (t, x, u, psi0, psi); ``trivial`` marks currents
    that are identically zero."""

    i: int
    j: int
    expr: Expr
    trivial: bool


def generate_currents(
    sym: GaugeSymmetry,
    problem: OcpProblem,
    trials: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
) -> list[NoetherCurrent]:
    """Build all k*(m+1) currents of a verified gauge symmetry.

    The construction itself is deterministic; the confidence parameters only
    drive the triviality classification.
    """
    H = build_hamiltonian(problem)
    currents: list[NoetherCurrent] = []
    for i in range(sym.m + 1):
        for j in range(1, sym.k + 1):
            s = jet(j, i)
            dF = restrict_to_zero_jets(partial(sym.F, s))
            dT = restrict_to_zero_jets(partial(sym.T, s))
            w = sym.lam[j - 1][i]
            gauge_part = add(dF, mul(w, problem.L)) if w != 0 else dF
            terms = [mul(Var(COSTATE0), gauge_part)]
            for l, x_l in enumerate(sym.X, 1):
                dX = restrict_to_zero_jets(partial(x_l, s))
                terms.append(mul(Var(costate(l)), dX))
            terms.append(neg(mul(H, dT)))
            e = add(*terms)
            trivial = is_zero(e, trials=trials, tol=tol, seed=seed).is_zero
            currents.append(NoetherCurrent(i=i, j=j, expr=e, trivial=trivial))
    return currents


def currents_report(currents: list[NoetherCurrent]) -> dict:
    """Machine-readable summary of a current list."""
    return {
        "count": len(currents),
        "nontrivial_count": sum(1 for c in currents if not c.trivial),
        "currents": [
            {
                "i": c.i,
                "j": c.j,
                "expression": to_text(c.expr),
                "trivial": c.trivial,
            }
            for c in currents
        ],
    }
