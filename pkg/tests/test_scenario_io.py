import json
import math

import pytest

from nfcrb import (
    PairwiseScenario,
    Scenario,
    SweepRow,
    ValidationError,
    load_scenario,
    parse_scenario,
    parse_sweep_csv,
    run_report,
    runtime_scenario,
    serialize_scenario,
    sweep_rows_to_csv,
    write_reports,
)
from nfcrb.cli import main


def polar_doc():
    return {
        "name": "toy",
        "description": "polar toy",
        "velocity_mps": 3e8,
        "signals": [
            {"freq_hz": 1e6, "amplitude": [1.0, 0.0]},
            {"freq_hz": 2e6, "amplitude": [0.0, 1.0]},
        ],
        "noise_variance": 0.5,
        "snapshots": 4,
        "geometry": {
            "polar": {
                "sources": [
                    {"range_m": 200.0, "bearing_deg": 80.0},
                    {"range_m": 300.0, "bearing_deg": 100.0},
                ],
                "sensors": [
                    {"radius_m": 0.0, "azimuth_deg": 0.0},
                    {"radius_m": 10.0, "azimuth_deg": 0.0},
                    {"radius_m": 20.0, "azimuth_deg": 0.0},
                ],
            }
        },
    }


class TestParseScenario:
    def test_bundled_scenario_a(self):
        sf = load_scenario("scenario_a")
        assert sf.encoding == "pairwise"
        assert sf.num_sensors == 4 and sf.num_sources == 3
        assert sf.defaults_applied == ("noise_variance=1.0", "snapshots=1")
        scn, defaults = runtime_scenario(sf)
        assert isinstance(scn, PairwiseScenario)
        assert scn.noise_variance == 1.0 and scn.snapshots == 1
        assert defaults == ("noise_variance=1.0", "snapshots=1")

    def test_polar_document(self):
        sf = parse_scenario(json.dumps(polar_doc()))
        assert sf.encoding == "polar"
        scn, defaults = runtime_scenario(sf)
        assert isinstance(scn, Scenario)
        assert defaults == ()
        assert scn.sources[0].bearing_rad == pytest.approx(math.radians(80.0))

    def test_both_encodings_rejected(self):
        doc = polar_doc()
        doc["geometry"]["pairwise"] = {
            "vertical_m": [[1.0, 1.0]], "arrival_deg": [[45.0, 45.0]]
        }
        with pytest.raises(ValidationError, match="exactly one"):
            parse_scenario(json.dumps(doc))

    def test_square_array_rejected(self):
        doc = polar_doc()
        doc["signals"] = doc["signals"] * 2  # four signals, four sensors below
        doc["geometry"]["polar"]["sources"] = doc["geometry"]["polar"]["sources"] * 2
        doc["geometry"]["polar"]["sensors"].append({"radius_m": 30.0, "azimuth_deg": 0.0})
        with pytest.raises(ValidationError, match="separate at most"):
            parse_scenario(json.dumps(doc))

    def test_error_paths_name_fields(self):
        doc = polar_doc()
        del doc["velocity_mps"]
        with pytest.raises(ValidationError, match="velocity_mps"):
            parse_scenario(json.dumps(doc))
        doc = polar_doc()
        doc["signals"][0]["freq_hz"] = -5.0
        with pytest.raises(ValidationError, match=r"signals\[0\]"):
            parse_scenario(json.dumps(doc))

    def test_overrides_clear_default_flags(self):
        sf = load_scenario("scenario_b")
        scn, defaults = runtime_scenario(sf, noise_variance=2.0, snapshots=8)
        assert scn.noise_variance == 2.0 and scn.snapshots == 8
        assert defaults == ()

    def test_round_trip_equivalence(self):
        for name in ("scenario_a", "scenario_b"):
            sf = load_scenario(name)
            again = parse_scenario(serialize_scenario(sf))
            assert again == sf
        sf = parse_scenario(json.dumps(polar_doc()))
        assert parse_scenario(serialize_scenario(sf)) == sf


class TestRunReport:
    def test_defaults_listed(self, scenario_a):
        report = run_report(scenario_a, "scenario_a", ("noise_variance=1.0", "snapshots=1"))
        assert report.defaults_applied == ("noise_variance=1.0", "snapshots=1")
        assert report.reconstruction_residual == pytest.approx(0.51165, abs=1e-4)
        assert report.rank_deficient
        assert report.det == pytest.approx(193.3216, rel=1e-5)
        assert report.strongest_element == 1

    def test_polar_report_has_no_residual(self):
        sf = parse_scenario(json.dumps(polar_doc()))
        scn, defaults = runtime_scenario(sf)
        report = run_report(scn, sf.name, defaults)
        assert report.reconstruction_residual is None
        assert max(report.closed_form_deviations.values()) < 1e-8


class TestCsv:
    def _rows(self, n_points=10):
        rows = []
        for i in range(n_points):
            for mode in ("primary", "reposition"):
                rows.append(
                    SweepRow(
                        point=1e6 * (i + 1),
                        mode=mode,
                        det=1.234e-3 * (i + 1),
                        crb_theta_total=5.4321e-7 / (i + 1),
                        crb_r_total=9.87e2 * (i + 1),
                        diagnostics="note one; note two",
                    )
                )
        return rows

    def test_header_and_row_count(self, tmp_path):
        rows = self._rows()
        out = tmp_path / "sweep.csv"
        write_reports(rows, "csv", out)
        lines = out.read_text().split("\n")
        assert lines[0] == "point,mode,det,crb_theta_total,crb_r_total,flags"
        assert len([ln for ln in lines if ln]) == 21  # header + 10 points x 2 modes
        assert "\r" not in out.read_text()

    def test_empty_rows_error(self, tmp_path):
        with pytest.raises(ValidationError):
            write_reports([], "csv", tmp_path / "x.csv")

    def test_round_trip_five_significant_digits(self):
        rows = self._rows(3)
        parsed = parse_sweep_csv(sweep_rows_to_csv(rows))
        assert len(parsed) == len(rows)
        for a, b in zip(rows, parsed):
            assert b.mode == a.mode
            assert b.point == pytest.approx(a.point, rel=1e-4)
            assert b.det == pytest.approx(a.det, rel=1e-4)
            assert b.crb_theta_total == pytest.approx(a.crb_theta_total, rel=1e-4)
            assert b.crb_r_total == pytest.approx(a.crb_r_total, rel=1e-4)

    def test_text_format(self, tmp_path):
        out = tmp_path / "sweep.txt"
        write_reports(self._rows(2), "text", out)
        text = out.read_text()
        assert text.startswith("point")
        assert len(text.strip().split("\n")) == 5


class TestCli:
    def test_compute_runs(self, capsys):
        assert main(["compute", "--scenario", "scenario_a"]) == 0
        out = capsys.readouterr().out
        assert "defaults applied: noise_variance=1.0, snapshots=1" in out
        assert "det(R_x)" in out

    def test_compute_csv_out(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert main(["compute", "--scenario", "scenario_b", "--out", str(out)]) == 0
        assert out.read_text().startswith("point,mode,det")

    def test_reposition_analytic(self, capsys):
        code = main(
            ["reposition", "--scenario", "scenario_b", "--mode", "analytic", "--element", "3"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "plan: element 3, mode analytic" in out
        assert "comparison" in out

    def test_reposition_linesearch(self, capsys):
        # the grid value starts with a dash, so the = form is required
        code = main(
            [
                "reposition", "--scenario", "scenario_b", "--mode", "linesearch",
                "--element", "3", "--objective", "det", "--grid=-50:50:21",
            ]
        )
        assert code == 0
        assert "displacement" in capsys.readouterr().out

    def test_reposition_grid_mode(self, capsys):
        code = main(
            [
                "reposition", "--scenario", "scenario_b", "--mode", "grid",
                "--element", "3", "--objective", "crb_theta", "--grid=-30:30:13",
            ]
        )
        assert code == 0
        assert "mode grid" in capsys.readouterr().out

    def test_sweep_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main(
            [
                "sweep", "--scenario", "scenario_b",
                "--vary", "frequency:1:1000000:10000000:3",
                "--modes", "primary,reposition", "--out", str(out),
            ]
        )
        assert code == 0
        rows = parse_sweep_csv(out.read_text())
        assert len(rows) == 6

    def test_validate_passes_on_bundled(self, capsys):
        assert main(["validate", "--scenario", "scenario_a"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert main(["validate", "--scenario", "scenario_b"]) == 0

    def test_unknown_scenario_exits_nonzero(self, capsys):
        assert main(["compute", "--scenario", "no_such_file.json"]) == 2
        assert "error" in capsys.readouterr().err
