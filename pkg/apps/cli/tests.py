import csv
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.core.exceptions import ConfigError
from apps.oracles.fixtures import (
    BROKEN_SQUARED,
    IDEAL_GAS,
    PHI_GAS,
    SQUARED_CALIBRATION,
    VARIABLE_GAMMA,
    fixture_path,
)
from config.cli import main

from .constants import parse_grid, parse_levels
from .loaders import apply_overrides, load_config, parse_config, prepare
from .services import PipelineService
from .writers import dumps, format_number


def read_rows(path: Path) -> list:
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def fixture_document(name: str) -> dict:
    return json.loads(fixture_path(name).read_text(encoding="utf-8"))


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        workspace = tempfile.TemporaryDirectory()
        self.addCleanup(workspace.cleanup)
        self.tmp = Path(workspace.name)

    def run_command(self, name: str, *args, **options) -> str:
        out = StringIO()
        call_command(name, *args, stdout=out, stderr=StringIO(), **options)
        return out.getvalue()

    def write_config(self, document: dict, name: str = "model.json") -> Path:
        path = self.tmp / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path


class ReconstructCommandTests(CommandTestCase):
    def test_writes_grid_curves_and_report(self):
        out_dir = self.tmp / "run"
        message = self.run_command("reconstruct", str(fixture_path(IDEAL_GAS)), output=str(out_dir))
        self.assertIn("valid temperature band", message)
        for name in ("entropy_grid.csv", "adiabats.json", "report.json"):
            self.assertTrue((out_dir / name).exists(), name)

        report = json.loads((out_dir / "report.json").read_text())
        self.assertEqual(report["mode"], "calibrated")
        self.assertAlmostEqual(report["valid_band"]["X_min"], 0.5**0.4, delta=1e-6)
        self.assertAlmostEqual(report["valid_band"]["X_max"], 2.0**0.4, delta=1e-6)
        self.assertEqual(report["config"]["samples"], 257)

        rows = read_rows(out_dir / "entropy_grid.csv")
        self.assertEqual(rows[0], ["x", "y", "S"])
        self.assertEqual(len(rows), 60 * 60 + 1)
        # cells off the band are left empty
        self.assertTrue(any(row[2] == "" for row in rows[1:]))

        document = json.loads((out_dir / "adiabats.json").read_text())
        self.assertEqual([entry["level"] for entry in document["levels"]], [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_output_is_byte_identical_across_runs(self):
        first, second = self.tmp / "a", self.tmp / "b"
        config = str(fixture_path(IDEAL_GAS))
        self.run_command("reconstruct", config, output=str(first))
        self.run_command("reconstruct", config, output=str(second))
        for name in ("entropy_grid.csv", "adiabats.json", "report.json"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes(), name)

    def test_grid_and_levels_flags(self):
        out_dir = self.tmp / "run"
        self.run_command(
            "reconstruct",
            str(fixture_path(IDEAL_GAS)),
            output=str(out_dir),
            grid="20x24",
            levels="0,0.25",
        )
        self.assertEqual(len(read_rows(out_dir / "entropy_grid.csv")), 20 * 24 + 1)
        document = json.loads((out_dir / "adiabats.json").read_text())
        self.assertEqual([entry["level"] for entry in document["levels"]], [0.0, 0.25])

    def test_calibrated_config_with_two_adiabats(self):
        document = fixture_document(IDEAL_GAS)
        document["adiabats"].append({"kind": "explicit", "expression": "x^(-0.6)*1.1"})
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(self.write_config(document)), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)

    def test_mode_mismatch(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(fixture_path(SQUARED_CALIBRATION)), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn("recalibrate", str(caught.exception))

    def test_bad_grid_flag(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(fixture_path(IDEAL_GAS)), output=str(self.tmp), grid="20by20")
        self.assertEqual(caught.exception.returncode, 1)

    def test_missing_config(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(self.tmp / "absent.json"), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)

    def test_syntax_error_in_f(self):
        document = fixture_document(IDEAL_GAS)
        document["f"] = "x*"
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(self.write_config(document)), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)

    def test_numerical_failure_exits_two(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("reconstruct", str(fixture_path(BROKEN_SQUARED)), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 2)


class RecalibrateCommandTests(CommandTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        workspace = tempfile.TemporaryDirectory()
        cls.addClassCleanup(workspace.cleanup)
        cls.out_dir = Path(workspace.name)
        call_command(
            "recalibrate",
            str(fixture_path(SQUARED_CALIBRATION)),
            output=str(cls.out_dir),
            stdout=StringIO(),
        )

    def test_writes_recalibration_files(self):
        for name in (
            "entropy_grid.csv",
            "adiabats.json",
            "report.json",
            "recalibration.csv",
            "temperature_grid.csv",
        ):
            self.assertTrue((self.out_dir / name).exists(), name)

    def test_phi_is_monotone(self):
        rows = read_rows(self.out_dir / "recalibration.csv")
        self.assertEqual(rows[0], ["X_tilde", "phi"])
        table = np.array(rows[1:], dtype=float)
        self.assertEqual(table[0, 1], 0.0)
        self.assertTrue(np.all(np.diff(table[:, 0]) > 0))
        self.assertTrue(np.all(np.diff(table[:, 1]) > 0))

    def test_power_law_in_report(self):
        report = json.loads((self.out_dir / "report.json").read_text())
        self.assertEqual(report["mode"], "uncalibrated")
        self.assertAlmostEqual(report["power_law"]["exponent"], -0.5, delta=1e-3)
        self.assertEqual(report["phi_range"][0], 0.0)

    def test_calibrated_config_is_refused(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("recalibrate", str(fixture_path(IDEAL_GAS)), output=str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)


class AuditCommandTests(CommandTestCase):
    def test_shipped_fixtures_pass(self):
        for name in (IDEAL_GAS, SQUARED_CALIBRATION, PHI_GAS, VARIABLE_GAMMA):
            with self.subTest(fixture=name):
                out = self.run_command("audit", str(fixture_path(name)))
                self.assertIn("max |jacobian - 1|", out)
                self.assertNotIn("FAIL", out)

    def test_recalibrated_field_follows_closed_form(self):
        model = prepare(load_config(fixture_path(SQUARED_CALIBRATION)))
        rows = {row.invariant: row for row in PipelineService.audit(model).rows}
        row = rows["oracle gradient deviation"]
        self.assertTrue(row.passed)
        self.assertLessEqual(row.measured, 1e-4)

    def test_oracle_row_present(self):
        out = self.run_command("audit", str(fixture_path(IDEAL_GAS)))
        self.assertIn("oracle gradient deviation", out)

    def test_vanishing_partial_fails_sign_scan(self):
        out = StringIO()
        with self.assertRaises(CommandError) as caught:
            call_command("audit", str(fixture_path(BROKEN_SQUARED)), stdout=out, stderr=StringIO())
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("f_y sign scan", out.getvalue())
        self.assertIn("FAIL", out.getvalue())

    def test_finer_scan_catches_sign_change_between_nodes(self):
        # f_y = (x - 0.2)(x - 0.3) is positive on the nodes x = 0, 0.5, 1
        document = fixture_document(IDEAL_GAS)
        document.update(
            f="y*(x - 0.2)*(x - 0.3)",
            domain={"x_min": 0.0, "x_max": 1.0, "y_min": 0.5, "y_max": 2.0},
            tolerances={"scan_grid": 3},
            oracle=None,
        )
        path = self.write_config(document)
        out = StringIO()
        with self.assertRaises(CommandError) as caught:
            call_command("audit", str(path), stdout=out, stderr=StringIO())
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("f_y sign scan", out.getvalue())
        self.assertIn("FAIL", out.getvalue())
        self.assertNotIn("max |jacobian - 1|", out.getvalue())

    def test_zero_tolerance_fails(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("audit", str(fixture_path(IDEAL_GAS)), tol=0.0)
        self.assertEqual(caught.exception.returncode, 2)


class PlotCommandTests(CommandTestCase):
    def reconstruct(self) -> Path:
        out_dir = self.tmp / "run"
        self.run_command("reconstruct", str(fixture_path(IDEAL_GAS)), output=str(out_dir))
        return out_dir

    def test_one_path_per_nonempty_level(self):
        out_dir = self.reconstruct()
        self.run_command("plot", str(out_dir))
        document = json.loads((out_dir / "adiabats.json").read_text())
        nonempty = [entry for entry in document["levels"] if entry["polylines"]]
        svg = (out_dir / "adiabats.svg").read_text()
        self.assertTrue(svg.startswith("<svg"))
        self.assertEqual(svg.count("<path"), len(nonempty))

    def test_plot_is_deterministic(self):
        out_dir = self.reconstruct()
        self.run_command("plot", str(out_dir))
        first = (out_dir / "adiabats.svg").read_bytes()
        self.run_command("plot", str(out_dir))
        self.assertEqual((out_dir / "adiabats.svg").read_bytes(), first)

    def test_empty_levels_draw_axes_only(self):
        document = {
            "mode": "calibrated",
            "title": "empty",
            "domain": {"x_min": 0.5, "x_max": 2.0, "y_min": 0.5, "y_max": 2.0},
            "levels": [{"level": 10.0, "polylines": []}],
        }
        (self.tmp / "adiabats.json").write_text(json.dumps(document))
        self.run_command("plot", str(self.tmp))
        svg = (self.tmp / "adiabats.svg").read_text()
        self.assertNotIn("<path", svg)
        self.assertIn("<line", svg)

    def test_missing_input(self):
        with self.assertRaises(CommandError) as caught:
            self.run_command("plot", str(self.tmp))
        self.assertEqual(caught.exception.returncode, 1)


class ConsoleScriptTests(SimpleTestCase):
    def test_check_is_an_alias_for_audit(self):
        with mock.patch("django.core.management.execute_from_command_line") as execute:
            main(["adiabat", "check", "model.json"])
        execute.assert_called_once_with(["adiabat", "audit", "model.json"])

    def test_other_commands_pass_through(self):
        with mock.patch("django.core.management.execute_from_command_line") as execute:
            main(["adiabat", "reconstruct", "model.json", "-o", "out"])
        execute.assert_called_once_with(["adiabat", "reconstruct", "model.json", "-o", "out"])

    def test_failed_check_exits_with_code(self):
        with self.assertRaises(SystemExit) as caught, mock.patch("sys.stdout", new=StringIO()), mock.patch(
            "sys.stderr", new=StringIO()
        ):
            main(["adiabat", "check", str(fixture_path(BROKEN_SQUARED))])
        self.assertEqual(caught.exception.code, 2)


class EntropyApiTests(SimpleTestCase):
    def post(self, route: str, document: dict):
        return self.client.post(f"/api/entropy/{route}", data=json.dumps(document), content_type="application/json")

    def test_reconstruct(self):
        response = self.post("reconstruct", fixture_document(IDEAL_GAS))
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertEqual(body["mode"], "calibrated")
        self.assertAlmostEqual(body["results"]["valid_band"]["X_max"], 2.0**0.4, delta=1e-6)
        self.assertEqual(len(body["results"]["adiabats"]), 5)

    def test_config_error_is_400(self):
        document = fixture_document(IDEAL_GAS)
        document["f"] = "x + foo(y)"
        response = self.post("reconstruct", document)
        self.assertEqual(response.status_code, 400)
        self.assertIn("foo", response.json()["detail"])

    def test_numerical_error_is_422(self):
        response = self.post("reconstruct", fixture_document(BROKEN_SQUARED))
        self.assertEqual(response.status_code, 422)
        self.assertIn("step", response.json())

    def test_check_reports_failure_in_body(self):
        response = self.post("check", fixture_document(BROKEN_SQUARED))
        self.assertEqual(response.status_code, 200)
        body = response.json()
        self.assertFalse(body["passed"])
        self.assertEqual(body["rows"][0]["status"], "FAIL")

    def test_recalibrate(self):
        response = self.post("recalibrate", fixture_document(SQUARED_CALIBRATION))
        self.assertEqual(response.status_code, 200)
        self.assertAlmostEqual(response.json()["results"]["power_law"]["exponent"], -0.5, delta=1e-3)


class OptionParsingTests(SimpleTestCase):
    def test_parse_grid(self):
        self.assertEqual(parse_grid("60x40"), (60, 40))
        self.assertEqual(parse_grid(" 16 X 16 "), (16, 16))
        with self.assertRaises(ValueError):
            parse_grid("60")

    def test_parse_levels(self):
        self.assertEqual(parse_levels("-1, 0,0.5"), [-1.0, 0.0, 0.5])
        with self.assertRaises(ValueError):
            parse_levels("a,b")

    def test_config_samples_win_over_environment_default(self):
        document = fixture_document(IDEAL_GAS)
        self.assertEqual(parse_config(document).samples, 257)
        del document["samples"]
        with self.settings(ADIABAT_CURVE_SAMPLES=65):
            self.assertEqual(parse_config(document).samples, 65)

    def test_tol_targets_root_or_audit(self):
        config = load_config(fixture_path(IDEAL_GAS))
        self.assertEqual(apply_overrides(config, tol=1e-9).tolerances.root, 1e-9)
        self.assertEqual(apply_overrides(config, tol=1e-3, audit=True).tolerances.audit, 1e-3)

    def test_small_grid_is_rejected(self):
        config = load_config(fixture_path(IDEAL_GAS))
        with self.assertRaises(ConfigError):
            apply_overrides(config, grid=(4, 4))

    def test_unknown_mode(self):
        document = fixture_document(IDEAL_GAS)
        document["mode"] = "hybrid"
        with self.assertRaises(ConfigError):
            parse_config(document)


class WriterTests(SimpleTestCase):
    def test_masked_values(self):
        self.assertEqual(format_number(float("nan")), "")
        self.assertEqual(format_number(0.1), "0.1")
        self.assertEqual(json.loads(dumps({"S": [1.5, float("nan")]})), {"S": [1.5, None]})
