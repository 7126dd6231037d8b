"""Scenario files, run reports, and CSV serialization.

Scenario files are JSON with exactly one geometry encoding:

* ``polar``: sources as (range_m, bearing_deg), sensors as (radius_m,
  azimuth_deg);
* ``pairwise``: (vertical_m, arrival_deg) matrices with one row per element
  and one column per source.

Angles in files are degrees; everything downstream is radians.  Noise
variance (default 1.0) and snapshot count (default 1) may be omitted; every
applied default is recorded and echoed in reports, never silent.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .fim_crb import crb_from_fim, fim_closed_form, fim_for_scenario
from .geometry import (
    PairwiseGeometry,
    PairwiseScenario,
    Scenario,
    SensorGeom,
    SourceGeom,
    delay_matrix,
    pairwise_delay_matrix,
    to_polar,
)
from .optimizer import SweepRow
from .signal_model import SourceSignal, covariances, received_power, steering_matrix

DEFAULT_NOISE_VARIANCE = 1.0
DEFAULT_SNAPSHOTS = 1
BUNDLED = ("scenario_a", "scenario_b")


@dataclass(frozen=True)
class ScenarioFile:
    """Parsed scenario file; exactly one of ``polar`` / ``pairwise`` is set."""

    name: str
    description: str
    velocity_mps: float
    signals: tuple[SourceSignal, ...]
    noise_variance: float
    snapshots: int
    polar: tuple[tuple[SourceGeom, ...], tuple[SensorGeom, ...]] | None
    pairwise: PairwiseGeometry | None
    defaults_applied: tuple[str, ...] = field(compare=False, default=())

    @property
    def num_sources(self) -> int:
        return len(self.signals)

    @property
    def num_sensors(self) -> int:
        if self.pairwise is not None:
            return self.pairwise.num_sensors
        return len(self.polar[1])

    @property
    def encoding(self) -> str:
        return "pairwise" if self.pairwise is not None else "polar"


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"{path}.{key}: missing required field")
    return obj[key]


def _positive(value, path: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}: expected a number, got {value!r}") from None
    if not out > 0:
        raise ValidationError(f"{path}: must be positive, got {out}")
    return out


def parse_scenario(text: str) -> ScenarioFile:
    """Parse and validate scenario JSON; errors carry the offending field path."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError("scenario file must be a JSON object")

    name = str(raw.get("name", "unnamed"))
    description = str(raw.get("description", ""))
    velocity = _positive(_need(raw, "velocity_mps", "scenario"), "scenario.velocity_mps")

    sig_raw = _need(raw, "signals", "scenario")
    if not isinstance(sig_raw, list) or not sig_raw:
        raise ValidationError("scenario.signals: must be a nonempty list")
    signals = []
    for i, entry in enumerate(sig_raw):
        path = f"scenario.signals[{i}]"
        if not isinstance(entry, dict):
            raise ValidationError(f"{path}: must be an object")
        freq = _positive(_need(entry, "freq_hz", path), f"{path}.freq_hz")
        amp = _need(entry, "amplitude", path)
        if not (isinstance(amp, list) and len(amp) == 2):
            raise ValidationError(f"{path}.amplitude: expected [re, im]")
        signals.append(SourceSignal(freq, complex(float(amp[0]), float(amp[1]))))
    signals = tuple(signals)

    defaults = []
    if "noise_variance" in raw:
        noise = _positive(raw["noise_variance"], "scenario.noise_variance")
    else:
        noise = DEFAULT_NOISE_VARIANCE
        defaults.append(f"noise_variance={DEFAULT_NOISE_VARIANCE}")
    if "snapshots" in raw:
        snapshots = int(raw["snapshots"])
        if snapshots < 1:
            raise ValidationError(f"scenario.snapshots: must be >= 1, got {snapshots}")
    else:
        snapshots = DEFAULT_SNAPSHOTS
        defaults.append(f"snapshots={DEFAULT_SNAPSHOTS}")

    geom = _need(raw, "geometry", "scenario")
    if not isinstance(geom, dict):
        raise ValidationError("scenario.geometry: must be an object")
    has_polar = "polar" in geom
    has_pairwise = "pairwise" in geom
    if has_polar == has_pairwise:
        raise ValidationError(
            "scenario.geometry: exactly one of 'polar' or 'pairwise' must be present"
        )

    N = len(signals)
    polar = None
    pairwise = None
    if has_polar:
        p = geom["polar"]
        src_raw = _need(p, "sources", "scenario.geometry.polar")
        sen_raw = _need(p, "sensors", "scenario.geometry.polar")
        if len(src_raw) != N:
            raise ValidationError(
                f"scenario.geometry.polar.sources: {len(src_raw)} entries for {N} signals"
            )
        sources = tuple(
            SourceGeom(
                _positive(_need(e, "range_m", f"scenario.geometry.polar.sources[{i}]"),
                          f"scenario.geometry.polar.sources[{i}].range_m"),
                math.radians(float(_need(e, "bearing_deg", f"scenario.geometry.polar.sources[{i}]"))),
            )
            for i, e in enumerate(src_raw)
        )
        sensors = tuple(
            SensorGeom(
                float(_need(e, "radius_m", f"scenario.geometry.polar.sensors[{i}]")),
                math.radians(float(_need(e, "azimuth_deg", f"scenario.geometry.polar.sensors[{i}]"))),
            )
            for i, e in enumerate(sen_raw)
        )
        if N >= len(sensors):
            raise ValidationError(
                f"scenario.geometry: {len(sensors)} sensors can separate at most "
                f"{len(sensors) - 1} sources; got {N}"
            )
        polar = (sources, sensors)
    else:
        p = geom["pairwise"]
        vert = np.array(_need(p, "vertical_m", "scenario.geometry.pairwise"), dtype=float)
        adeg = np.array(_need(p, "arrival_deg", "scenario.geometry.pairwise"), dtype=float)
        if vert.ndim != 2 or vert.shape != adeg.shape:
            raise ValidationError(
                "scenario.geometry.pairwise: vertical_m and arrival_deg must be equal-shape matrices"
            )
        if vert.shape[1] != N:
            raise ValidationError(
                f"scenario.geometry.pairwise: {vert.shape[1]} columns for {N} signals"
            )
        if N >= vert.shape[0]:
            raise ValidationError(
                f"scenario.geometry: {vert.shape[0]} sensors can separate at most "
                f"{vert.shape[0] - 1} sources; got {N}"
            )
        try:
            pairwise = PairwiseGeometry(vert, np.radians(adeg))
        except ValidationError as exc:
            raise ValidationError(f"scenario.geometry.pairwise: {exc}") from None

    return ScenarioFile(
        name=name,
        description=description,
        velocity_mps=velocity,
        signals=signals,
        noise_variance=noise,
        snapshots=snapshots,
        polar=polar,
        pairwise=pairwise,
        defaults_applied=tuple(defaults),
    )


def serialize_scenario(sf: ScenarioFile) -> str:
    """Inverse of parse_scenario (all fields written explicitly)."""
    out: dict = {
        "name": sf.name,
        "description": sf.description,
        "velocity_mps": sf.velocity_mps,
        "signals": [
            {"freq_hz": s.freq_hz, "amplitude": [s.amplitude.real, s.amplitude.imag]}
            for s in sf.signals
        ],
        "noise_variance": sf.noise_variance,
        "snapshots": sf.snapshots,
    }
    if sf.pairwise is not None:
        out["geometry"] = {
            "pairwise": {
                "vertical_m": sf.pairwise.vertical_m.tolist(),
                "arrival_deg": np.degrees(sf.pairwise.arrival_rad).tolist(),
            }
        }
    else:
        sources, sensors = sf.polar
        out["geometry"] = {
            "polar": {
                "sources": [
                    {"range_m": s.range_m, "bearing_deg": math.degrees(s.bearing_rad)}
                    for s in sources
                ],
                "sensors": [
                    {"radius_m": s.radius_m, "azimuth_deg": math.degrees(s.azimuth_rad)}
                    for s in sensors
                ],
            }
        }
    return json.dumps(out, indent=2)


def load_scenario(path_or_name: str) -> ScenarioFile:
    """Load a scenario from a filesystem path or a bundled name."""
    p = Path(path_or_name)
    if p.exists():
        return parse_scenario(p.read_text())
    if path_or_name in BUNDLED:
        text = resources.files("nfcrb").joinpath("data", f"{path_or_name}.json").read_text()
        return parse_scenario(text)
    raise ValidationError(
        f"scenario {path_or_name!r} is neither a readable file nor one of the bundled names {BUNDLED}"
    )


def runtime_scenario(
    sf: ScenarioFile,
    noise_variance: float | None = None,
    snapshots: int | None = None,
) -> tuple[Scenario | PairwiseScenario, tuple[str, ...]]:
    """Build the runtime scenario object, tracking which defaults remain in force."""
    defaults = list(sf.defaults_applied)
    eta = sf.noise_variance
    ns = sf.snapshots
    if noise_variance is not None:
        eta = float(noise_variance)
        defaults = [d for d in defaults if not d.startswith("noise_variance")]
    if snapshots is not None:
        ns = int(snapshots)
        defaults = [d for d in defaults if not d.startswith("snapshots")]
    if sf.pairwise is not None:
        scn = PairwiseScenario(sf.pairwise, sf.velocity_mps, sf.signals, eta, ns)
    else:
        sources, sensors = sf.polar
        scn = Scenario(sources, sensors, sf.velocity_mps, sf.signals, eta, ns)
    return scn, tuple(defaults)


@dataclass(frozen=True, eq=False)
class RunReport:
    """Everything a single bound computation produced, defaults included."""

    scenario_name: str
    encoding: str
    num_sensors: int
    num_sources: int
    velocity_mps: float
    noise_variance: float
    snapshots: int
    defaults_applied: tuple[str, ...]
    det: float
    crb_theta: np.ndarray
    crb_r: np.ndarray
    crb_theta_total: float
    crb_r_total: float
    strongest_element: int
    received_powers: np.ndarray
    reconstruction_residual: float | None
    fim_rank: int
    fim_size: int
    rank_deficient: bool
    array_cov_condition: float
    closed_form_deviations: dict[str, float]


def run_report(scn, name: str, defaults: tuple[str, ...]) -> RunReport:
    """Compute the full report for a polar or pairwise scenario."""
    residual = None
    if isinstance(scn, PairwiseScenario):
        tau = pairwise_delay_matrix(scn)
        polar, residual = to_polar(scn)
    else:
        polar = scn
        tau = delay_matrix(scn)
    freqs = np.array([sig.freq_hz for sig in scn.signals])
    A = steering_matrix(tau, freqs)
    covset = covariances(A, scn.signals, scn.noise_variance)
    powers, strongest = received_power(A, scn.signals)
    det = float(abs(np.linalg.det(covset.array_cov)))

    fim = fim_for_scenario(polar)
    crb = crb_from_fim(fim)
    A_polar = steering_matrix(delay_matrix(polar), freqs)
    covset_polar = covariances(A_polar, polar.signals, polar.noise_variance)
    _, deviations = fim_closed_form(polar, A_polar, covset_polar, polar.snapshots)

    return RunReport(
        scenario_name=name,
        encoding="pairwise" if isinstance(scn, PairwiseScenario) else "polar",
        num_sensors=scn.num_sensors,
        num_sources=scn.num_sources,
        velocity_mps=scn.velocity_mps,
        noise_variance=scn.noise_variance,
        snapshots=scn.snapshots,
        defaults_applied=defaults,
        det=det,
        crb_theta=crb.crb_theta,
        crb_r=crb.crb_r,
        crb_theta_total=crb.crb_theta_total,
        crb_r_total=crb.crb_r_total,
        strongest_element=strongest,
        received_powers=powers,
        reconstruction_residual=residual,
        fim_rank=crb.rank,
        fim_size=crb.size,
        rank_deficient=crb.rank_deficient,
        array_cov_condition=fim.array_cov_condition,
        closed_form_deviations=deviations,
    )


def _sci(x: float) -> str:
    return f"{x:.4e}"


def format_run_report(report: RunReport) -> str:
    """Human-readable report text; every applied default is listed."""
    lines = [
        f"scenario: {report.scenario_name} ({report.encoding} geometry, "
        f"M={report.num_sensors} sensors, N={report.num_sources} sources)",
        f"velocity: {_sci(report.velocity_mps)} m/s",
        f"noise variance: {_sci(report.noise_variance)}   snapshots: {report.snapshots}",
        "defaults applied: " + (", ".join(report.defaults_applied) if report.defaults_applied else "none"),
    ]
    if report.reconstruction_residual is not None:
        lines.append(f"reconstruction residual: {_sci(report.reconstruction_residual)} m")
    lines += [
        "received powers: [" + ", ".join(_sci(p) for p in report.received_powers) + "]",
        f"strongest element: {report.strongest_element + 1} (1-based)",
        f"det(R_x): {_sci(report.det)}",
        "CRB bearing (rad^2): ["
        + ", ".join(_sci(v) for v in report.crb_theta)
        + f"], total {_sci(report.crb_theta_total)}",
        "CRB range (m^2): ["
        + ", ".join(_sci(v) for v in report.crb_r)
        + f"], total {_sci(report.crb_r_total)}",
        f"FIM rank: {report.fim_rank}/{report.fim_size}"
        + (" (rank deficient, pseudo-inverse used)" if report.rank_deficient else ""),
        f"cond(R_x): {_sci(report.array_cov_condition)}",
        "closed-form vs generic max block deviation: "
        + _sci(max(report.closed_form_deviations.values())),
    ]
    return "\n".join(lines)


CSV_HEADER = ["point", "mode", "det", "crb_theta_total", "crb_r_total", "flags"]


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    """CSV text for sweep rows: one row per (point, mode), 5 significant digits, LF endings."""
    if not rows:
        raise ValidationError("no sweep rows to write")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                _sci(row.point),
                row.mode,
                _sci(row.det),
                _sci(row.crb_theta_total),
                _sci(row.crb_r_total),
                row.diagnostics.replace(",", ";"),
            ]
        )
    return buf.getvalue()


def parse_sweep_csv(text: str) -> list[SweepRow]:
    """Read back a sweep CSV produced by sweep_rows_to_csv."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        rows.append(
            SweepRow(
                point=float(rec[0]),
                mode=rec[1],
                det=float(rec[2]),
                crb_theta_total=float(rec[3]),
                crb_r_total=float(rec[4]),
                diagnostics=rec[5],
            )
        )
    return rows


def run_report_to_csv(report: RunReport) -> str:
    """Single-constellation report in the sweep CSV layout (point = 0)."""
    flags = list(report.defaults_applied)
    if report.rank_deficient:
        flags.append("rank_deficient")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerow(
        [
            _sci(0.0),
            "primary",
            _sci(report.det),
            _sci(report.crb_theta_total),
            _sci(report.crb_r_total),
            "; ".join(flags).replace(",", ";"),
        ]
    )
    return buf.getvalue()


def write_reports(rows, fmt: str, destination: str | Path) -> Path:
    """Write sweep rows as 'csv' or aligned 'text' to the destination path."""
    if not rows:
        raise ValidationError("no results to write")
    if fmt not in ("csv", "text"):
        raise ValidationError(f"format must be 'csv' or 'text', got {fmt!r}")
    dest = Path(destination)
    if fmt == "csv":
        payload = sweep_rows_to_csv(list(rows))
    else:
        widths = [14, 12, 12, 16, 16]
        header = "".join(h.ljust(w) for h, w in zip(CSV_HEADER[:5], widths)) + "flags"
        lines = [header]
        for row in rows:
            lines.append(
                "".join(
                    v.ljust(w)
                    for v, w in zip(
                        [
                            _sci(row.point),
                            row.mode,
                            _sci(row.det),
                            _sci(row.crb_theta_total),
                            _sci(row.crb_r_total),
                        ],
                        widths,
                    )
                )
                + row.diagnostics
            )
        payload = "\n".join(lines) + "\n"
    try:
        dest.write_text(payload)
    except OSError as exc:
        raise OSError(f"cannot write report to {dest}: {exc}") from exc
    return dest
