"""Evaluation of Noether currents along trajectories.

A current is conserved when its values along a trajectory stay constant.
Drift is measured against the mean of the node values (symmetric to
transient integration error at either endpoint) and compared relatively:

    relative_drift = max|value - mean| / (1 + |mean|)

The default tolerance ties acceptance to the integrator order,
max(1e-8, 100 * h^4) for step size h, instead of a fixed constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .extremal import Trajectory, master_columns
from .noether import NoetherCurrent


def default_tolerance(h: float) -> float:
    return max(1e-8, 100.0 * h**4)


@dataclass(frozen=True)
class ConservationRecord:
    """Node values and drift statistics of one current along one trajectory."""

    current_i: int
    current_j: int
    trajectory: str
    values: np.ndarray | None
    mean: float
    drift: float
    relative_drift: float
    tolerance: float
    conserved: bool
    error: str | None = None

    @property
    def label(self) -> str:
        return f"C[i={self.current_i},j={self.current_j}]"


def evaluate_current_along(
    current: NoetherCurrent, traj: Trajectory, tolerance: float | None = None
) -> ConservationRecord:
    """Evaluate a current at every trajectory node and judge conservation."""
    tol = default_tolerance(traj.h) if tolerance is None else tolerance
    cols = master_columns(traj.n, traj.r)
    program = engine.compile_cached(current.expr, None)
    try:
        binding = engine.binding_for(program, cols)
        values = engine.run_rows(program, traj.table(), binding)
    except engine.RowEvalError as exc:
        return ConservationRecord(
            current_i=current.i,
            current_j=current.j,
            trajectory=traj.name,
            values=None,
            mean=float("nan"),
            drift=float("inf"),
            relative_drift=float("inf"),
            tolerance=tol,
            conserved=False,
            error=f"evaluation failed at node {exc.row}: {exc.reason}",
        )
    mean = float(values.mean())
    drift = float(np.max(np.abs(values - mean)))
    relative = drift / (1.0 + abs(mean))
    return ConservationRecord(
        current_i=current.i,
        current_j=current.j,
        trajectory=traj.name,
        values=values,
        mean=mean,
        drift=drift,
        relative_drift=relative,
        tolerance=tol,
        conserved=relative <= tol,
    )


@dataclass(frozen=True)
class ConservationReport:
    """Cross-product records with an aggregate verdict and worst offender."""

    records: tuple[ConservationRecord, ...]
    passed: bool
    worst: ConservationRecord | None
    warnings: tuple[str, ...] = ()


def conservation_suite(
    currents: list[NoetherCurrent],
    trajectories: list[Trajectory],
    tolerance: float | None = None,
) -> ConservationReport:
    """Evaluate every current along every trajectory.

    Per-pair evaluation errors are recorded in their records rather than
    raised; an empty trajectory list passes vacuously with a warning.
    """
    warnings: list[str] = []
    if not trajectories:
        warnings.append("no trajectories supplied; conservation passes vacuously")
    records: list[ConservationRecord] = []
    for traj in trajectories:
        for cur in currents:
            records.append(evaluate_current_along(cur, traj, tolerance))
    worst = None
    for rec in records:
        if worst is None or rec.relative_drift > worst.relative_drift:
            worst = rec
    return ConservationReport(
        records=tuple(records),
        passed=all(r.conserved for r in records),
        worst=worst,
        warnings=tuple(warnings),
    )
