"""Tests for the command-line runner and report writers."""

import contextlib
import io
import json
import sys
import tempfile
import unittest
from unittest import mock
from pathlib import Path

import numpy as np
import pandas as pd

import reports
from reports import CheckReport


def _load_main_module():
    if "main" in sys.modules:
        return sys.modules["main"]
    import main

    return main


def _run(argv):
    main = _load_main_module()
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main.main(argv)
    return code, out.getvalue(), err.getvalue()


class TestReports(unittest.TestCase):
    def test_plain_values(self):
        value = reports.plain({"a": np.float64(1.5), "b": np.arange(3), "c": float("inf"), 1: np.bool_(True)})
        self.assertEqual(value, {"a": 1.5, "b": [0, 1, 2], "c": None, "1": True})

    def test_grading_by_tolerance(self):
        passed = reports.run_check("x", lambda: {"max_error": 1e-12}, 1e-10)
        failed = reports.run_check("x", lambda: {"max_error": 1e-8}, 1e-10)
        missing = reports.run_check("x", lambda: {"max_error": float("nan")}, 1e-10)
        self.assertTrue(passed.passed)
        self.assertFalse(failed.passed)
        self.assertFalse(missing.passed)
        self.assertEqual(failed.error, 1e-8)

    def test_grading_by_flag_and_tables(self):
        report = reports.run_check("y", lambda: {"ok": False, "rows": [{"n": 1}]}, table_key="rows")
        self.assertFalse(report.passed)
        self.assertIsNone(report.error)
        self.assertEqual(report.table, [{"n": 1}])
        self.assertNotIn("rows", report.values)

    def test_flag_fails_a_check_within_tolerance(self):
        flagged = reports.run_check("x", lambda: {"max_error": 0.0, "ok": False}, 1e-10)
        self.assertFalse(flagged.passed)
        self.assertEqual(flagged.error, 0.0)
        self.assertTrue(reports.run_check("x", lambda: {"max_error": 0.0, "ok": True}, 1e-10).passed)

    def test_json_has_no_timings_by_default(self):
        check = CheckReport("z", {"max_error": 0.0}, 0.0, 1e-6, True, runtime_ms=17)
        with tempfile.TemporaryDirectory() as tmp:
            path = reports.write_json([check], {"seed": 1}, Path(tmp) / "r.json")
            document = json.loads(path.read_text())
            timed = json.loads(reports.write_json([check], {"seed": 1}, Path(tmp) / "t.json", timings=True).read_text())
        self.assertTrue(document["pass"])
        self.assertNotIn("runtime_ms", document["checks"][0])
        self.assertEqual(timed["checks"][0]["runtime_ms"], 17)

    def test_csv_writes_summary_tables_and_config(self):
        checks = [
            CheckReport("a", {"max_error": 0.0}, 0.0, 1e-6, True, table=[{"n": 1, "v": 2.0}]),
            CheckReport("b", {"ok": False}, None, None, False),
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = reports.write_csv(checks, {"seed": 3}, Path(tmp) / "run.csv")
            summary = pd.read_csv(path)
            table = pd.read_csv(Path(tmp) / "run_a.csv")
            saved = json.loads((Path(tmp) / "run_config.json").read_text())
        self.assertEqual(list(summary["name"]), ["a", "b"])
        self.assertEqual(list(summary["pass"]), [True, False])
        self.assertEqual(table.shape, (1, 2))
        self.assertEqual(saved, {"seed": 3})


class TestMain(unittest.TestCase):
    def test_dry_run_prints_resolved_config(self):
        code, out, _ = _run(["zeta", "--preset", "bfk-torus", "--seed", "7", "--dry-run"])
        self.assertEqual(code, 0)
        cfg = json.loads(out)
        self.assertEqual(cfg["seed"], 7)
        self.assertEqual(cfg["subcommand"], "zeta")

    def test_malformed_config_exits_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.json"
            path.write_text("{\n  \"zeta\": [\n")
            code, _, err = _run(["zeta", "--config", str(path)])
        self.assertEqual(code, 2)
        self.assertIn("line", err)

    def test_unknown_field_exits_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps({"zeta": {"radius": 1.0}}))
            code, _, err = _run(["zeta", "--config", str(path)])
        self.assertEqual(code, 2)
        self.assertIn("zeta.radius", err)

    def test_bad_tolerance_scale(self):
        code, _, _ = _run(["zeta", "--tolerance-scale", "0", "--dry-run"])
        self.assertEqual(code, 2)

    def test_unknown_preset_is_a_usage_error(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                _load_main_module().main(["zeta", "--preset", "nope"])
        self.assertEqual(ctx.exception.code, 2)

    def test_invalid_graph_exits_with_two(self):
        doc = {"lattice": {"graph": {"type": "explicit", "n_vertices": 4, "edges": [[0, 1], [2, 3]]}}}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps(doc))
            code, _, err = _run(["lattice", "--config", str(path), "--out", str(Path(tmp) / "r.json")])
        self.assertEqual(code, 2)
        self.assertIn("disconnected", err)

    def test_unbounded_interaction_exits_with_two(self):
        doc = {"chain": {"polynomial": [0.0, 0.0, 0.0, 1.0], "order": 40, "n_list": [1]}}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps(doc))
            code, _, err = _run(["chain", "--config", str(path), "--out", str(Path(tmp) / "r.json")])
        self.assertEqual(code, 2)
        self.assertIn("even degree", err)

    def test_zeta_reports_are_reproducible(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "zeta.json"
            argv = ["zeta", "--preset", "bfk-torus", "--seed", "11", "--out", str(path)]
            code_a, out, _ = _run(argv)
            first = path.read_bytes()
            code_b, _, _ = _run(argv)
            self.assertEqual(out.strip(), str(path))
            self.assertEqual(path.read_bytes(), first)
            document = json.loads(first.decode())
        self.assertEqual(code_a, 0)
        self.assertEqual(code_b, 0)
        self.assertTrue(document["pass"])
        self.assertEqual(
            [c["name"] for c in document["checks"]],
            ["circle_det", "zeta_omega0", "t_split", "bfk_torus", "rn_det", "dn_energy", "fredholm"],
        )

    def test_side_flag_fails_the_run(self):
        main = _load_main_module()
        flagged = {"check": "compose", "max_error": 0.0, "commutator": 0.0, "ok": False}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "segal.json"
            with mock.patch.object(main.segal, "compose_check", return_value=flagged):
                code, _, _ = _run(["segal", "--preset", "two-site-slab", "--out", str(path)])
            document = json.loads(path.read_text())
        compose = next(c for c in document["checks"] if c["name"] == "compose")
        self.assertEqual(code, 1)
        self.assertFalse(compose["pass"])
        self.assertEqual(compose["error"], 0.0)

    def test_csv_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "zeta.csv"
            code, _, _ = _run(["zeta", "--preset", "bfk-torus", "--format", "csv", "--out", str(path)])
            summary = pd.read_csv(path)
            self.assertTrue((Path(tmp) / "zeta_config.json").is_file())
        self.assertEqual(code, 0)
        self.assertEqual(len(summary), 7)

    def test_report_path_precedence(self):
        main = _load_main_module()
        cfg = {"subcommand": "chain", "format": "csv", "output": None}
        self.assertEqual(main.report_path(cfg, "x.csv"), Path("x.csv"))
        self.assertEqual(main.report_path({**cfg, "output": "y.csv"}, None), Path("y.csv"))
        self.assertEqual(main.report_path(cfg, None).name, "chain.csv")

    def test_default_sigma(self):
        main = _load_main_module()
        torus = main.lattice.LatticeGraph.torus(6, 4)
        self.assertEqual(main.default_sigma(torus).tolist(), [0, 1, 2, 3, 12, 13, 14, 15])
        cycle = main.lattice.LatticeGraph.cycle(8)
        self.assertEqual(main.default_sigma(cycle).tolist(), [0, 4])


if __name__ == "__main__":
    unittest.main()
