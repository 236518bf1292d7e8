"""Candidate Pontryagin extremals: integration and extremality checks.

The tool verifies rather than solves: the caller supplies a control law, an
initial state, the cost multiplier psi0 <= 0 and an initial costate, and a
classical fixed-step fourth-order Runge-Kutta scheme integrates the coupled
system

    dx/dt   = phi(t, x, u)
    dpsi/dt = -dH/dx(t, x, u, psi0, psi)
    dJ/dt   = L(t, x, u)

with the control resolved from the law at every stage.  The recorded
trajectory is then checked against the extremality conditions: the adjoint
equation (central differences of psi against -dH/dx), the maximality of H
over sampled interior points of the control box, and the identity
dH/dt = dH/dt|partial along the trajectory.

For piecewise-constant laws the grid is refined so that every breakpoint is
a node, one constant control value is used per step, and nodes adjacent to
a breakpoint are exempted from the finite-difference and maximality checks
(the control jump makes those conditions meaningless at isolated points).
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .expr import (
    COSTATE0,
    Expr,
    ExprError,
    Sym,
    TIME,
    control,
    costate,
    neg,
    partial,
    state,
    symbols,
)
from .problem import OcpProblem, build_hamiltonian


class ExtremalError(ExprError):
    """Invalid integration setup (dimensions, psi0 sign, grid alignment)."""


class IntegrationBlowupError(ExtremalError):
    """State or costate left the finite range during integration."""

    def __init__(self, t: float):
        super().__init__(f"non-finite state or costate at t = {t!r}")
        self.t = t


@dataclass(frozen=True)
class FeedbackLaw:
    """Control resolved from expressions over (t, x, psi0, psi)."""

    exprs: tuple[Expr, ...]

    def __post_init__(self):
        for j, e in enumerate(self.exprs, 1):
            for s in symbols(e):
                if s.kind not in ("t", "x", "psi0", "psi"):
                    raise ExtremalError(
                        f"feedback law component {j} must not contain {s.name}"
                    )


@dataclass(frozen=True)
class PiecewiseConstantLaw:
    """Constant control values on the segments split by the breakpoints;
    ``values`` has one vector per segment (one more than breakpoints)."""

    breakpoints: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ExtremalError(
                f"need {len(self.breakpoints) + 1} value vectors for "
                f"{len(self.breakpoints)} breakpoints, got {len(self.values)}"
            )
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ExtremalError("breakpoints must be strictly increasing")

    def segment(self, t: float) -> int:
        return bisect.bisect_right(self.breakpoints, t)


ControlLaw = FeedbackLaw | PiecewiseConstantLaw


def master_columns(n: int, r: int) -> dict[Sym, int]:
    """Column layout shared by integration, the checks, and conservation
    sweeps: t, x1..xn, u1..ur, psi0, psi1..psin."""
    cols: dict[Sym, int] = {TIME: 0}
    for i in range(1, n + 1):
        cols[state(i)] = i
    for j in range(1, r + 1):
        cols[control(j)] = n + j
    cols[COSTATE0] = n + r + 1
    for i in range(1, n + 1):
        cols[costate(i)] = n + r + 1 + i
    return cols


@dataclass
class Trajectory:
    """Discretized candidate extremal on a uniform grid."""

    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    psi: np.ndarray
    psi0: float
    H_values: np.ndarray
    J_value: float
    warnings: tuple[str, ...] = ()
    breakpoint_nodes: frozenset[int] = frozenset()
    name: str = ""
    _table: np.ndarray | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return self.u.shape[1]

    @property
    def normal(self) -> bool:
        return self.psi0 != 0.0

    def table(self) -> np.ndarray:
        """(nodes, columns) value table in the master_columns layout."""
        if self._table is None:
            nodes = len(self.times)
            cols = 2 + 2 * self.n + self.r
            tab = np.empty((nodes, cols), dtype=np.float64)
            tab[:, 0] = self.times
            tab[:, 1 : 1 + self.n] = self.x
            tab[:, 1 + self.n : 1 + self.n + self.r] = self.u
            tab[:, 1 + self.n + self.r] = self.psi0
            tab[:, 2 + self.n + self.r :] = self.psi
            self._table = tab
        return self._table


def _align_steps(steps: int, a: float, b: float, breakpoints: tuple[float, ...]) -> int:
    """Smallest multiple of ``steps`` whose uniform grid hits every
    breakpoint (within 1e-9 of the interval length)."""
    span = b - a
    for mult in range(1, 65):
        n = steps * mult
        h = span / n
        if all(
            abs((bp - a) / h - round((bp - a) / h)) * h <= 1e-9 * span
            for bp in breakpoints
        ):
            return n
    raise ExtremalError(
        "breakpoints cannot be aligned with a uniform grid refined up to 64x; "
        "choose commensurate breakpoints or a different step count"
    )


class _CompiledProblem:
    """Programs and bindings for the integration master vector."""

    def __init__(self, problem: OcpProblem):
        n, r = problem.n, problem.r
        self.n, self.r = n, r
        self.cols = master_columns(n, r)
        H = build_hamiltonian(problem)
        self.H = H

        def prog(e: Expr):
            p = engine.compile_cached(e, None)
            return p, engine.binding_for(p, self.cols)

        self.phi = [prog(e) for e in problem.phi]
        self.adj = [prog(neg(partial(H, state(i)))) for i in range(1, n + 1)]
        self.L = prog(problem.L)
        self.H_prog = prog(H)
        self.dHdt = prog(partial(H, TIME))
        self.dHdu = [prog(partial(H, control(j))) for j in range(1, r + 1)]

    def eval(self, pair, master: np.ndarray) -> float:
        p, b = pair
        return engine.run_bound(p, master, b)


def integrate_extremal(
    problem: OcpProblem,
    law: ControlLaw,
    x_a,
    psi0: float,
    psi_a,
    steps: int,
    name: str = "",
) -> Trajectory:
    """Integrate the coupled state/costate system under the supplied law.

    Raises :class:`IntegrationBlowupError` when values leave the finite
    range; controls leaving the closure of the admissible box only add a
    warning.
    """
    n, r = problem.n, problem.r
    if steps < 2:
        raise ExtremalError("need at least 2 steps")
    if psi0 > 0:
        raise ExtremalError(f"psi0 must be <= 0, got {psi0}")
    x0 = np.asarray(x_a, dtype=np.float64).reshape(n)
    p0 = np.asarray(psi_a, dtype=np.float64).reshape(n)
    if psi0 == 0.0 and not np.any(p0):
        raise ExtremalError("(psi0, psi_a) must not both be zero")
    if isinstance(law, FeedbackLaw) and len(law.exprs) != r:
        raise ExtremalError(f"feedback law needs {r} components, got {len(law.exprs)}")
    if isinstance(law, PiecewiseConstantLaw):
        if any(len(v) != r for v in law.values):
            raise ExtremalError(f"piecewise law values need {r} components")
        if any(not problem.a < bp < problem.b for bp in law.breakpoints):
            raise ExtremalError("breakpoints must lie strictly inside the interval")
        steps = _align_steps(steps, problem.a, problem.b, law.breakpoints)

    compiled = _CompiledProblem(problem)
    cols = compiled.cols
    ncols = 2 + 2 * n + r
    master = np.empty(ncols, dtype=np.float64)
    master[1 + n + r] = psi0

    law_progs = None
    if isinstance(law, FeedbackLaw):
        law_progs = []
        for e in law.exprs:
            p = engine.compile_cached(e, None)
            law_progs.append((p, engine.binding_for(p, cols)))

    h = (problem.b - problem.a) / steps
    times = problem.a + h * np.arange(steps + 1)
    times[-1] = problem.b

    def resolve_u(t: float, xv: np.ndarray, pv: np.ndarray, seg_value) -> np.ndarray:
        if seg_value is not None:
            return seg_value
        master[0] = t
        master[1 : 1 + n] = xv
        master[2 + n + r :] = pv
        return np.array(
            [engine.run_bound(p, master, b) for p, b in law_progs], dtype=np.float64
        )

    def rhs(t: float, xv: np.ndarray, pv: np.ndarray, seg_value):
        uv = resolve_u(t, xv, pv, seg_value)
        master[0] = t
        master[1 : 1 + n] = xv
        master[1 + n : 1 + n + r] = uv
        master[2 + n + r :] = pv
        dx = np.array([compiled.eval(pr, master) for pr in compiled.phi])
        dp = np.array([compiled.eval(pr, master) for pr in compiled.adj])
        dJ = compiled.eval(compiled.L, master)
        return dx, dp, dJ, uv

    x = np.empty((steps + 1, n))
    psi = np.empty((steps + 1, n))
    u_rec = np.empty((steps + 1, r))
    H_rec = np.empty(steps + 1)
    x[0] = x0
    psi[0] = p0

    breakpoint_nodes: set[int] = set()
    segments = None
    if isinstance(law, PiecewiseConstantLaw):
        segments = [np.asarray(v, dtype=np.float64) for v in law.values]
        for bp in law.breakpoints:
            breakpoint_nodes.add(int(round((bp - problem.a) / h)))

    warnings: list[str] = []
    outside = None

    def record(node: int, t: float, xv, pv, seg_for_node):
        nonlocal outside
        uv = resolve_u(t, xv, pv, seg_for_node)
        u_rec[node] = uv
        master[0] = t
        master[1 : 1 + n] = xv
        master[1 + n : 1 + n + r] = uv
        master[2 + n + r :] = pv
        H_rec[node] = compiled.eval(compiled.H_prog, master)
        if outside is None:
            for j, bound in enumerate(problem.omega):
                if not bound.contains_closure(uv[j]):
                    outside = (t, j + 1, uv[j])

    def seg_value_at(t: float):
        if segments is None:
            return None
        return segments[law.segment(t)]

    J = 0.0
    record(0, times[0], x[0], psi[0], seg_value_at(times[0]))
    for nstep in range(steps):
        t0 = times[nstep]
        xv = x[nstep]
        pv = psi[nstep]
        # one constant control segment per step (grid is breakpoint-aligned)
        seg = seg_value_at(t0 + 0.5 * h)
        k1x, k1p, k1J, _ = rhs(t0, xv, pv, seg)
        k2x, k2p, k2J, _ = rhs(t0 + 0.5 * h, xv + 0.5 * h * k1x, pv + 0.5 * h * k1p, seg)
        k3x, k3p, k3J, _ = rhs(t0 + 0.5 * h, xv + 0.5 * h * k2x, pv + 0.5 * h * k2p, seg)
        k4x, k4p, k4J, _ = rhs(t0 + h, xv + h * k3x, pv + h * k3p, seg)
        x[nstep + 1] = xv + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        psi[nstep + 1] = pv + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        J += (h / 6.0) * (k1J + 2.0 * k2J + 2.0 * k3J + k4J)
        if not (
            np.all(np.isfinite(x[nstep + 1])) and np.all(np.isfinite(psi[nstep + 1]))
        ):
            raise IntegrationBlowupError(float(times[nstep + 1]))
        t1 = times[nstep + 1]
        # recorded control is right-continuous at breakpoints; the final
        # node keeps the last segment
        node_seg = seg if nstep + 1 == steps else seg_value_at(t1)
        record(nstep + 1, t1, x[nstep + 1], psi[nstep + 1], node_seg)

    if outside is not None:
        t_bad, j_bad, v_bad = outside
        warnings.append(
            f"control u{j_bad} = {v_bad!r} leaves the closure of the "
            f"admissible box at t = {t_bad!r}"
        )
    return Trajectory(
        times=times,
        x=x,
        u=u_rec,
        psi=psi,
        psi0=float(psi0),
        H_values=H_rec,
        J_value=float(J),
        warnings=tuple(warnings),
        breakpoint_nodes=frozenset(breakpoint_nodes),
        name=name,
    )


def _eligible_interior(traj: Trajectory) -> np.ndarray:
    """Interior node indices away from control breakpoints."""
    nodes = len(traj.times)
    mask = np.ones(nodes, dtype=bool)
    mask[0] = mask[-1] = False
    for b in traj.breakpoint_nodes:
        for i in (b - 1, b, b + 1):
            if 0 <= i < nodes:
                mask[i] = False
    return np.nonzero(mask)[0]


def check_adjoint(problem: OcpProblem, traj: Trajectory) -> float:
    """Max mismatch between central differences of psi and -dH/dx."""
    compiled = _CompiledProblem(problem)
    table = traj.table()
    h = traj.h
    idx = _eligible_interior(traj)
    if len(idx) == 0:
        return 0.0
    worst = 0.0
    for comp, (prog, binding) in enumerate(compiled.adj):
        rhs = engine.run_rows(prog, table, binding)
        diff = (traj.psi[idx + 1, comp] - traj.psi[idx - 1, comp]) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(diff - rhs[idx]))))
    return worst


def check_dHdt(problem: OcpProblem, traj: Trajectory) -> float:
    """Max mismatch between central differences of the recorded H and the
    symbolic partial dH/dt along the trajectory."""
    compiled = _CompiledProblem(problem)
    table = traj.table()
    h = traj.h
    idx = _eligible_interior(traj)
    if len(idx) == 0:
        return 0.0
    prog, binding = compiled.dHdt
    rhs = engine.run_rows(prog, table, binding)
    diff = (traj.H_values[idx + 1] - traj.H_values[idx - 1]) / (2.0 * h)
    return float(np.max(np.abs(diff - rhs[idx])))


def check_maximality(
    problem: OcpProblem,
    traj: Trajectory,
    samples_per_node: int = 16,
    seed: int = 0,
) -> tuple[float, bool]:
    """Sample interior points of the control box at each node and measure
    how much H there exceeds H at the trajectory's control.

    Returns (max violation clamped at zero, boundary flag); the flag is set
    when the worst violating sample sits near an open finite bound, the
    signature of a supremum attained only on the boundary.
    """
    if samples_per_node < 1:
        raise ExtremalError("samples_per_node must be >= 1")
    compiled = _CompiledProblem(problem)
    n, r = problem.n, problem.r
    rng = random.Random(seed)
    master = np.empty(2 + 2 * n + r, dtype=np.float64)
    master[1 + n + r] = traj.psi0
    exempt = set()
    for b in traj.breakpoint_nodes:
        exempt.add(b)
    violation = 0.0
    near_boundary = False
    windows = []
    for j, bound in enumerate(problem.omega):
        lo, hi = bound.lower, bound.upper
        windows.append((lo, hi, bound))
    for node in range(len(traj.times)):
        if node in exempt:
            continue
        master[0] = traj.times[node]
        master[1 : 1 + n] = traj.x[node]
        master[2 + n + r :] = traj.psi[node]
        h_node = float(traj.H_values[node])
        for _ in range(samples_per_node):
            sample = np.empty(r)
            for j, (lo, hi, bound) in enumerate(windows):
                wlo = lo if math.isfinite(lo) else traj.u[node, j] - 10.0
                whi = hi if math.isfinite(hi) else traj.u[node, j] + 10.0
                span = whi - wlo
                sample[j] = rng.uniform(wlo + 1e-9 * span, whi - 1e-9 * span)
            master[1 + n : 1 + n + r] = sample
            h_s = compiled.eval(compiled.H_prog, master)
            gap = float(h_s) - h_node
            if gap > violation:
                violation = gap
                near_boundary = any(
                    math.isfinite(lo)
                    and bound.lower_open
                    and (sample[j] - lo) < 0.05 * (hi - lo)
                    or math.isfinite(hi)
                    and bound.upper_open
                    and (hi - sample[j]) < 0.05 * (hi - lo)
                    for j, (lo, hi, bound) in enumerate(windows)
                    if math.isfinite(lo) and math.isfinite(hi)
                )
    return max(violation, 0.0), near_boundary


@dataclass(frozen=True)
class ExtremalityReport:
    """Aggregated extremality residuals for one trajectory."""

    adjoint_residual_max: float
    maximality_violation_max: float
    dHdt_mismatch_max: float
    normal: bool
    boundary_supremum: bool
    warnings: tuple[str, ...] = ()


def extremality_report(
    problem: OcpProblem,
    traj: Trajectory,
    samples_per_node: int = 16,
    seed: int = 0,
) -> ExtremalityReport:
    violation, near_boundary = check_maximality(problem, traj, samples_per_node, seed)
    return ExtremalityReport(
        adjoint_residual_max=check_adjoint(problem, traj),
        maximality_violation_max=violation,
        dHdt_mismatch_max=check_dHdt(problem, traj),
        normal=traj.normal,
        boundary_supremum=near_boundary,
        warnings=traj.warnings,
    )
