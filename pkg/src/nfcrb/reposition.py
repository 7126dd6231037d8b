"""Single-element repositioning of a planar array.

One chosen element slides along the reference axis, which preserves its
vertical distance to every source while changing each arrival angle.  Three
realizations are provided:

* an analytic mode that assigns per-source phase targets alternating between
  a small value (pi / m) and a right angle, solving each target back to an
  arrival angle when the resulting sine stays within [0, 1];
* a line-search mode that scans displacements along the axis and keeps the
  best value of a chosen objective (the current position always competes, so
  the plan never loses to standing still);
* plan application, which rewrites the chosen element's pairwise row.

The analytic targets set each phase term independently, so the N solved
angles are generally not realizable by one physical displacement; the plan
records them as-is and the line-search mode is the physically realizable
counterpart.  Both arcsine branches of a solved target share the same sine,
hence the same phase objective; the acute branch is kept unless a caller
asks for the obtuse one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularGeometryError, ValidationError
from .fim_crb import crb_from_fim, fim_for_scenario
from .geometry import (
    PairwiseGeometry,
    PairwiseScenario,
    Scenario,
    scenario_from_positions,
    scenario_positions,
    to_pairwise,
)
from .signal_model import covariances, received_power, steering_matrix

OBJECTIVES = ("gf", "power", "det", "crb_theta", "crb_r")


@dataclass(frozen=True, eq=False)
class PhaseTerms:
    """Per-source steering phases of one element: term = scale / sin(arrival)."""

    values: np.ndarray
    element: int
    scale: np.ndarray


@dataclass(frozen=True, eq=False)
class RepositionPlan:
    """Outcome of a reposition computation for one element.

    ``new_arrival_rad`` holds the element's arrival angle per source after the
    move; ``displacement_m`` is the signed slide along the reference axis
    (None in analytic mode, where the per-source angles need not be jointly
    realizable); ``new_position_m`` is set only by two-dimensional searches,
    which give up vertical-distance invariance.
    """

    element: int
    mode: str
    new_arrival_rad: np.ndarray
    displacement_m: float | None
    objective: str
    objective_before: float
    objective_after: float
    source_notes: tuple[str, ...]
    new_position_m: tuple[float, float] | None = None


@dataclass(frozen=True)
class DisplacementGrid:
    """Evenly spaced displacements along the reference axis."""

    start: float
    stop: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValidationError(f"grid needs at least one step, got {self.steps}")
        if self.stop < self.start:
            raise ValidationError(f"grid bounds reversed: [{self.start}, {self.stop}]")

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([0.5 * (self.start + self.stop)])
        return np.linspace(self.start, self.stop, self.steps)


def hadamard_bound(matrix) -> float:
    """Determinant bound (max |entry|)^M * M^(M/2) for a square M x M matrix."""
    X = np.asarray(matrix, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValidationError(f"matrix must be square, got {X.shape}")
    m = X.shape[0]
    if m == 0:
        return 1.0
    return float(np.abs(X).max() ** m * m ** (m / 2.0))


def _check_element(element: int, num_sensors: int) -> None:
    if not 0 <= element < num_sensors:
        raise ValidationError(f"element {element} outside 0..{num_sensors - 1}")


def phase_terms(pws: PairwiseScenario, element: int) -> PhaseTerms:
    """Steering phase of the given element toward each source.

    term_n = 2 pi f_n H_n / (c sin(arrival_n)), which equals 2 pi f_n times
    the propagation delay of that pair.
    """
    _check_element(element, pws.num_sensors)
    H = pws.geometry.vertical_m[element]
    arrival = pws.geometry.arrival_rad[element]
    s = np.sin(arrival)
    if np.any(s <= 0):
        raise SingularGeometryError("arrival angle at 0 or pi has no finite phase term")
    freqs = np.array([sig.freq_hz for sig in pws.signals])
    scale = 2.0 * np.pi * freqs * H / pws.velocity_mps
    return PhaseTerms(values=scale / s, element=element, scale=scale)


def gf_objective(terms) -> float:
    """Squared coherent sum of unit phasors: (sum cos T)^2 + (sum sin T)^2.

    Accepts PhaseTerms or a bare array of angles.  Equals |sum_n exp(j T_n)|^2
    and is bounded by N^2.
    """
    T = np.asarray(getattr(terms, "values", terms), dtype=float)
    if T.size < 1:
        raise ValidationError("at least one phase term is required")
    return float(np.cos(T).sum() ** 2 + np.sin(T).sum() ** 2)


def _as_pairwise(scn) -> PairwiseScenario:
    if isinstance(scn, PairwiseScenario):
        return scn
    if isinstance(scn, Scenario):
        return to_pairwise(scn)
    raise ValidationError(f"expected a scenario, got {type(scn).__name__}")


def analytic_reposition(
    scn, element: int, m: int | str = "auto", branches=None
) -> RepositionPlan:
    """Assign per-source arrival-angle targets for the chosen element.

    Sources alternate between the small-phase target (solve
    sin(arrival) = 2 m f H / c, with m the requested integer or, for 'auto',
    the largest integer keeping the argument <= 1) and the right-angle target
    (sin(arrival) = 4 f H / c), starting with the small-phase target.  A
    source whose argument exceeds 1 is marked infeasible and keeps its
    arrival angle.  ``branches`` may force 'acute' or 'obtuse' per source;
    both give the same phase objective, so the default is acute.
    """
    pws = _as_pairwise(scn)
    _check_element(element, pws.num_sensors)
    N = pws.num_sources
    if branches is None:
        branches = [None] * N
    if len(branches) != N:
        raise ValidationError(f"{len(branches)} branch choices for {N} sources")
    if m != "auto":
        m = int(m)
        if m < 1:
            raise ValidationError(f"phase divisor must be a positive integer, got {m}")

    H = pws.geometry.vertical_m[element]
    arrival = pws.geometry.arrival_rad[element].copy()
    freqs = np.array([sig.freq_hz for sig in pws.signals])
    c = pws.velocity_mps

    before = gf_objective(phase_terms(pws, element))
    new_arrival = arrival.copy()
    notes = []
    any_feasible = False
    for n in range(N):
        near_zero = n % 2 == 0
        if near_zero:
            if m == "auto":
                m_n = int(math.floor(c / (2.0 * freqs[n] * H[n])))
            else:
                m_n = m
            if m_n < 1:
                notes.append(f"source {n + 1}: small-phase target infeasible (no valid divisor); angle kept")
                continue
            arg = 2.0 * m_n * freqs[n] * H[n] / c
            label = f"small-phase target (divisor {m_n})"
        else:
            arg = 4.0 * freqs[n] * H[n] / c
            label = "right-angle target"
        if arg > 1.0:
            notes.append(f"source {n + 1}: {label} infeasible (argument {arg:.4f} > 1); angle kept")
            continue
        acute = math.asin(arg)
        # both branches share sin(arrival), so the phase objective ties; keep
        # the acute branch unless the caller forces the obtuse one
        branch = branches[n] or "acute"
        if branch not in ("acute", "obtuse"):
            raise ValidationError(f"branch must be 'acute' or 'obtuse', got {branch!r}")
        new_arrival[n] = acute if branch == "acute" else math.pi - acute
        notes.append(
            f"source {n + 1}: {label}, {branch} branch, arrival {math.degrees(new_arrival[n]):.3f} deg"
        )
        any_feasible = True
    if not any_feasible:
        raise ValidationError(
            "no source admits an analytic target here; use the line-search mode instead"
        )

    after_terms = 2.0 * np.pi * freqs * H / (c * np.sin(new_arrival))
    return RepositionPlan(
        element=element,
        mode="analytic",
        new_arrival_rad=new_arrival,
        displacement_m=None,
        objective="gf",
        objective_before=before,
        objective_after=gf_objective(after_terms),
        source_notes=tuple(notes),
    )


def evaluate_objective(
    objective: str,
    element: int,
    sensors_xy: np.ndarray,
    sources_xy: np.ndarray,
    signals,
    velocity_mps: float,
    noise_variance: float,
    snapshots: int,
) -> float:
    """Objective value of one candidate constellation given in Cartesian form."""
    if objective not in OBJECTIVES:
        raise ValidationError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    d = np.linalg.norm(sources_xy[None, :, :] - sensors_xy[:, None, :], axis=2)
    if np.any(d <= 0):
        raise SingularGeometryError("a sensor coincides with a source")
    tau = d / velocity_mps
    freqs = np.array([sig.freq_hz for sig in signals])
    if objective == "gf":
        return gf_objective(2.0 * np.pi * freqs * tau[element])
    A = steering_matrix(tau, freqs)
    if objective == "power":
        powers, _ = received_power(A, signals)
        return float(powers[element])
    if objective == "det":
        covset = covariances(A, signals, noise_variance)
        return float(abs(np.linalg.det(covset.array_cov)))
    scn = scenario_from_positions(
        sensors_xy, sources_xy, velocity_mps, signals, noise_variance, snapshots
    )
    report = crb_from_fim(fim_for_scenario(scn))
    return report.crb_theta_total if objective == "crb_theta" else report.crb_r_total


def scan_displacements(
    scn, element: int, objective: str, displacements, mode: str, include_origin: bool = True
) -> RepositionPlan:
    """Evaluate the objective at each displacement of the element along the axis.

    Candidates are scanned in ascending order and the first minimum wins, so
    ties resolve to the lowest displacement.  With ``include_origin`` the
    current position competes even when the grid omits it; without it the
    origin is evaluated only for the before/after report.  Failing grid points
    are skipped and noted; the scan errors out only if every point fails.
    """
    sensors_xy, sources_xy, _ = scenario_positions(scn)
    _check_element(element, len(sensors_xy))
    signals, velocity = scn.signals, scn.velocity_mps
    eta, ns = scn.noise_variance, scn.snapshots

    def value_at(disp: float) -> float:
        moved = sensors_xy.copy()
        moved[element, 0] += disp
        return evaluate_objective(
            objective, element, moved, sources_xy, signals, velocity, eta, ns
        )

    cand = np.asarray(displacements, dtype=float)
    if include_origin:
        cand = np.concatenate([cand, [0.0]])
    cand = np.unique(cand)
    notes = []
    best_val = None
    best_disp = None
    base_val = None
    for disp in cand:
        try:
            val = value_at(float(disp))
        except ValidationError as exc:
            notes.append(f"displacement {disp:+.6g} m skipped: {exc}")
            continue
        if disp == 0.0:
            base_val = val
        if best_val is None or val < best_val:
            best_val = val
            best_disp = float(disp)
    if best_val is None:
        raise ValidationError("objective evaluation failed at every grid point")
    if base_val is None:
        try:
            base_val = value_at(0.0)
        except ValidationError:
            notes.append("original position not evaluable; improvement not comparable")
            base_val = float("inf")
    if best_val > base_val:
        notes.append("grid minimizer is worse than the original position")

    moved = sensors_xy.copy()
    moved[element, 0] += best_disp
    vertical = sources_xy[:, 1] - moved[element, 1]
    horizontal = sources_xy[:, 0] - moved[element, 0]
    if np.any(vertical <= 0):
        raise SingularGeometryError(
            "chosen displacement puts a source on or below the element's horizontal line"
        )
    new_arrival = np.arctan2(vertical, horizontal)
    return RepositionPlan(
        element=element,
        mode=mode,
        new_arrival_rad=new_arrival,
        displacement_m=best_disp,
        objective=objective,
        objective_before=float(base_val),
        objective_after=float(best_val),
        source_notes=tuple(notes),
    )


def line_search_reposition(
    scn, element: int, objective: str, grid: DisplacementGrid
) -> RepositionPlan:
    """Slide the element along the reference axis and keep the best objective.

    Vertical distances are invariant under the slide.  Displacement zero is
    always a candidate, so objective_after <= objective_before.
    """
    return scan_displacements(scn, element, objective, grid.values(), mode="linesearch")


def apply_reposition(scn, plan: RepositionPlan) -> PairwiseScenario:
    """Rewrite the planned element's pairwise row; all other rows are untouched.

    Axis-preserving plans keep the row's vertical distances and replace its
    arrival angles.  Two-dimensional plans (with ``new_position_m``) recompute
    the row's vertical distances as well, from reconstructed positions.
    """
    pws = _as_pairwise(scn)
    _check_element(plan.element, pws.num_sensors)
    vertical = pws.geometry.vertical_m.copy()
    arrival = pws.geometry.arrival_rad.copy()
    if plan.new_position_m is not None:
        _, sources_xy, _ = scenario_positions(pws)
        x, y = plan.new_position_m
        v = sources_xy[:, 1] - y
        if np.any(v <= 0):
            raise SingularGeometryError(
                "planned position puts a source on or below the element's horizontal line"
            )
        vertical[plan.element] = v
        arrival[plan.element] = np.arctan2(v, sources_xy[:, 0] - x)
    else:
        angles = np.asarray(plan.new_arrival_rad, dtype=float)
        if angles.shape != (pws.num_sources,):
            raise ValidationError(
                f"plan carries {angles.shape} arrival angles for {pws.num_sources} sources"
            )
        if np.any(angles <= 0) or np.any(angles >= math.pi):
            raise ValidationError("planned arrival angles must lie strictly inside (0, pi)")
        arrival[plan.element] = angles
    return PairwiseScenario(
        PairwiseGeometry(vertical, arrival),
        pws.velocity_mps,
        pws.signals,
        pws.noise_variance,
        pws.snapshots,
    )
