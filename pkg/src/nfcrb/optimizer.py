"""Brute-force search oracle and sweep harness.

``grid_search`` exhaustively evaluates a displacement grid (or a full 2-D box,
which gives up vertical-distance invariance) and returns the grid minimizer,
serving as the independent check on the repositioning modes.  ``sweep``
re-evaluates a scenario over a frequency or velocity grid, optionally
repositioning per point, and produces rows ready for CSV reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError
from .fim_crb import crb_from_fim, fim_for_scenario
from .geometry import (
    PairwiseScenario,
    Scenario,
    delay_matrix,
    pairwise_delay_matrix,
    scenario_positions,
    to_polar,
)
from .reposition import (
    DisplacementGrid,
    RepositionPlan,
    analytic_reposition,
    apply_reposition,
    evaluate_objective,
    scan_displacements,
)
from .signal_model import covariances, received_power, steering_matrix


@dataclass(frozen=True)
class BoxGrid:
    """Rectangular grid of candidate element positions (x, y)."""

    x_start: float
    x_stop: float
    x_steps: int
    y_start: float
    y_stop: float
    y_steps: int

    def __post_init__(self) -> None:
        if self.x_steps < 1 or self.y_steps < 1:
            raise ValidationError("box grid needs at least one step per axis")
        if self.x_stop < self.x_start or self.y_stop < self.y_start:
            raise ValidationError("box grid bounds reversed")

    def points(self) -> np.ndarray:
        xs = (
            np.array([0.5 * (self.x_start + self.x_stop)])
            if self.x_steps == 1
            else np.linspace(self.x_start, self.x_stop, self.x_steps)
        )
        ys = (
            np.array([0.5 * (self.y_start + self.y_stop)])
            if self.y_steps == 1
            else np.linspace(self.y_start, self.y_stop, self.y_steps)
        )
        return np.array([(x, y) for x in xs for y in ys])


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep description: vary a source frequency or the velocity."""

    vary: str
    start: float
    stop: float
    steps: int
    source: int | None = None
    modes: tuple[str, ...] = ("primary",)

    def __post_init__(self) -> None:
        if self.vary not in ("frequency", "velocity"):
            raise ValidationError(f"vary must be 'frequency' or 'velocity', got {self.vary!r}")
        if self.vary == "frequency" and self.source is None:
            raise ValidationError("frequency sweeps need a source index")
        if not (0 < self.start < self.stop):
            raise ValidationError(f"sweep bounds must satisfy 0 < start < stop, got [{self.start}, {self.stop}]")
        if self.steps < 2:
            raise ValidationError(f"sweep needs at least 2 steps, got {self.steps}")
        if not self.modes:
            raise ValidationError("at least one sweep mode is required")
        for mode in self.modes:
            if mode not in ("primary", "reposition"):
                raise ValidationError(f"unknown sweep mode {mode!r}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class SweepRow:
    """One (grid point, mode) result."""

    point: float
    mode: str
    det: float
    crb_theta_total: float
    crb_r_total: float
    diagnostics: str = ""


@dataclass(frozen=True)
class ConstellationMetrics:
    """Headline quantities of one constellation."""

    det: float
    crb_theta_total: float
    crb_r_total: float


@dataclass(frozen=True)
class ComparisonReport:
    """Before/after ratios; a ratio below 1 means the quantity got worse."""

    det_ratio: float
    crb_theta_ratio: float
    crb_r_ratio: float
    worsened: tuple[str, ...]


def constellation_metrics(scn) -> tuple[ConstellationMetrics, tuple[str, ...]]:
    """|det R_x| plus CRB totals for a polar or pairwise scenario.

    The determinant uses the scenario's native delays; the bounds need polar
    coordinates, so pairwise input is least-squares reconstructed first and
    the residual reported in the notes.
    """
    notes: list[str] = []
    if isinstance(scn, PairwiseScenario):
        tau = pairwise_delay_matrix(scn)
        polar, residual = to_polar(scn)
        notes.append(f"reconstruction residual {residual:.6e} m")
    elif isinstance(scn, Scenario):
        polar = scn
        tau = delay_matrix(scn)
    else:
        raise ValidationError(f"expected a scenario, got {type(scn).__name__}")
    freqs = np.array([sig.freq_hz for sig in scn.signals])
    A = steering_matrix(tau, freqs)
    covset = covariances(A, scn.signals, scn.noise_variance)
    det = float(abs(np.linalg.det(covset.array_cov)))
    report = crb_from_fim(fim_for_scenario(polar))
    if report.rank_deficient:
        notes.append(f"information matrix rank deficient ({report.rank}/{report.size})")
    return (
        ConstellationMetrics(det, report.crb_theta_total, report.crb_r_total),
        tuple(notes),
    )


def grid_search(scn, element: int, objective: str, region) -> RepositionPlan:
    """Exhaustive search over a displacement grid or a 2-D box of positions.

    Returns the global grid minimizer (ties to the lowest candidate in scan
    order).  Unlike the line search, the original position competes only if
    the region contains it, so a single-point grid returns that point.
    """
    if isinstance(region, DisplacementGrid):
        return scan_displacements(
            scn, element, objective, region.values(), mode="grid", include_origin=False
        )
    if not isinstance(region, BoxGrid):
        raise ValidationError(f"region must be a DisplacementGrid or BoxGrid, got {type(region).__name__}")

    sensors_xy, sources_xy, _ = scenario_positions(scn)
    if not 0 <= element < len(sensors_xy):
        raise ValidationError(f"element {element} outside 0..{len(sensors_xy) - 1}")
    base_val = None
    best_val = None
    best_pos = None
    notes: list[str] = []
    try:
        base_val = evaluate_objective(
            objective, element, sensors_xy, sources_xy, scn.signals,
            scn.velocity_mps, scn.noise_variance, scn.snapshots,
        )
    except ValidationError as exc:
        notes.append(f"original position not evaluable: {exc}")
    for x, y in region.points():
        moved = sensors_xy.copy()
        moved[element] = (x, y)
        try:
            val = evaluate_objective(
                objective, element, moved, sources_xy, scn.signals,
                scn.velocity_mps, scn.noise_variance, scn.snapshots,
            )
        except ValidationError as exc:
            notes.append(f"position ({x:.6g}, {y:.6g}) skipped: {exc}")
            continue
        if best_val is None or val < best_val:
            best_val = val
            best_pos = (float(x), float(y))
    if best_val is None:
        raise ValidationError("objective evaluation failed at every grid point")
    x, y = best_pos
    vertical = sources_xy[:, 1] - y
    arrival = np.arctan2(vertical, sources_xy[:, 0] - x)
    if base_val is not None and best_val > base_val:
        notes.append("grid minimizer is worse than the original position")
    return RepositionPlan(
        element=element,
        mode="grid",
        new_arrival_rad=arrival,
        displacement_m=None,
        objective=objective,
        objective_before=float(base_val) if base_val is not None else float("nan"),
        objective_after=float(best_val),
        source_notes=tuple(notes),
        new_position_m=best_pos,
    )


def _with_point(scn, spec: SweepSpec, point: float):
    if spec.vary == "velocity":
        return replace(scn, velocity_mps=float(point))
    signals = list(scn.signals)
    idx = int(spec.source)
    if not 0 <= idx < len(signals):
        raise ValidationError(f"source index {idx} outside 0..{len(signals) - 1}")
    signals[idx] = replace(signals[idx], freq_hz=float(point))
    return replace(scn, signals=tuple(signals))


def sweep(scn, spec: SweepSpec) -> list[SweepRow]:
    """Evaluate det and CRB totals over the grid, per requested mode.

    Reposition rows re-select the strongest element at each point and apply a
    fresh analytic plan; points where no analytic target is feasible keep the
    primary constellation and say so in the diagnostics, so every row stays
    finite.  Rows are ordered by grid point, then by mode name.
    """
    rows: list[SweepRow] = []
    for point in spec.grid():
        scn_pt = _with_point(scn, spec, float(point))
        for mode in spec.modes:
            notes: list[str] = []
            target = scn_pt
            if mode == "reposition":
                if isinstance(scn_pt, PairwiseScenario):
                    tau = pairwise_delay_matrix(scn_pt)
                else:
                    tau = delay_matrix(scn_pt)
                freqs = np.array([sig.freq_hz for sig in scn_pt.signals])
                A = steering_matrix(tau, freqs)
                _, strongest = received_power(A, scn_pt.signals)
                notes.append(f"strongest element {strongest + 1}")
                try:
                    plan = analytic_reposition(scn_pt, strongest)
                    target = apply_reposition(scn_pt, plan)
                    infeasible = sum("infeasible" in n for n in plan.source_notes)
                    if infeasible:
                        notes.append(f"{infeasible} source target(s) infeasible")
                except ValidationError as exc:
                    notes.append(f"reposition skipped: {exc}")
            try:
                metrics, extra = constellation_metrics(target)
                notes.extend(extra)
                rows.append(
                    SweepRow(
                        point=float(point),
                        mode=mode,
                        det=metrics.det,
                        crb_theta_total=metrics.crb_theta_total,
                        crb_r_total=metrics.crb_r_total,
                        diagnostics="; ".join(notes),
                    )
                )
            except ValidationError as exc:
                notes.append(f"evaluation failed: {exc}")
                rows.append(
                    SweepRow(
                        point=float(point),
                        mode=mode,
                        det=float("nan"),
                        crb_theta_total=float("nan"),
                        crb_r_total=float("nan"),
                        diagnostics="; ".join(notes),
                    )
                )
    return rows


def compare_report(before: ConstellationMetrics, after: ConstellationMetrics) -> ComparisonReport:
    """Ratios before/after for the headline quantities; ratios < 1 are flagged."""
    det_ratio = before.det / after.det
    crb_theta_ratio = before.crb_theta_total / after.crb_theta_total
    crb_r_ratio = before.crb_r_total / after.crb_r_total
    worsened = tuple(
        name
        for name, ratio in (
            ("det", det_ratio),
            ("crb_theta", crb_theta_ratio),
            ("crb_r", crb_r_ratio),
        )
        if ratio < 1.0
    )
    return ComparisonReport(det_ratio, crb_theta_ratio, crb_r_ratio, worsened)
