#!/usr/bin/env python3
"""End-to-end checks of the zips command-line tool."""

import argparse
import json
import re
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

ZIPS = None
ROOT = None
STAMP = "2024-01-01T00:00:00Z"


def run(*args, check=None):
    proc = subprocess.run([ZIPS, *map(str, args)], capture_output=True, text=True)
    if check is not None and proc.returncode != check:
        raise AssertionError(
            f"zips {' '.join(map(str, args))} exited {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
    return proc


def schema(name):
    return json.loads((ROOT / "schema" / f"{name}.schema.json").read_text())


class CliTest(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls.tmp.name)
        cls.zip_csv = cls.dir / "zip.csv"
        run("simulate", "--config", ROOT / "data" / "zip_regression.cfg", "--n", 3000,
            "--seed", 5, "--timestamp", STAMP, cls.zip_csv, check=0)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def fit_json(self, *extra, name="fit.json"):
        out = self.dir / name
        run("fit", self.zip_csv, "--format", "json", "--timestamp", STAMP, "-o", out, *extra, check=0)
        return out

    def test_simulate_row_count_and_sidecar(self):
        out = self.dir / "table1.csv"
        run("simulate", "--config", ROOT / "data" / "table1.cfg", "--n", 67856, "--seed", 1, out, check=0)
        lines = out.read_text().splitlines()
        self.assertEqual(len(lines), 67857)
        self.assertEqual(lines[0], "numclaims,veh_value,gender,age_young,age_old,veh_age_young")
        truth = json.loads(Path(str(out) + ".truth.json").read_text())
        self.assertEqual(truth["family"], "Poisson")
        self.assertAlmostEqual(truth["beta"]["intercept"], -2.0229846138236587, places=12)
        self.assertEqual(truth["manifest"]["seed"], 1)

    def test_simulate_rejects_zero_rows(self):
        proc = run("simulate", "--config", ROOT / "data" / "table1.cfg", "--n", 0, self.dir / "none.csv")
        self.assertNotEqual(proc.returncode, 0)
        self.assertIn("--n", proc.stderr + proc.stdout)
        self.assertFalse((self.dir / "none.csv").exists())

    def test_sidecar_truth_recovered_by_fit(self):
        truth = json.loads(Path(str(self.zip_csv) + ".truth.json").read_text())
        x_cols = ",".join(k for k in truth["beta"] if k != "intercept")
        z_cols = ",".join(k for k in truth["gamma"] if k != "intercept")
        out = self.fit_json("--model", "zip", "--x-cols", x_cols, "--z-cols", z_cols, name="truth.json")
        report = json.loads(out.read_text())
        for row in report["coefficients"]:
            block, col = re.fullmatch(r"(beta|gamma)\[(.+)\]", row["name"]).groups()
            self.assertLess(abs(row["estimate"] - truth[block][col]), 4 * row["std_error"], row["name"])

    def test_fit_json_is_byte_identical_and_valid(self):
        args = ("--model", "zip", "--x-cols", "veh_value,age_young", "--z-cols", "veh_age_young")
        a = self.fit_json(*args, name="a.json").read_bytes()
        b = self.fit_json(*args, name="b.json").read_bytes()
        self.assertEqual(a, b)
        report = json.loads(a)
        jsonschema.validate(report, schema("fit"))
        self.assertEqual(report["model"], "ZIP")
        self.assertTrue(report["converged"])

    def test_bayes_fit_is_reproducible_and_valid(self):
        args = ("--model", "bzips", "--x-cols", "veh_value", "--z-cols", "none", "--chains", 2,
                "--iters", 1500, "--burnin", 500, "--seed", 7)
        a = self.fit_json(*args, name="ba.json").read_bytes()
        b = self.fit_json(*args, name="bb.json").read_bytes()
        self.assertEqual(a, b)
        report = json.loads(a)
        jsonschema.validate(report, schema("fit"))
        self.assertEqual(report["model"], "BZIPS")
        self.assertIsNotNone(report["dic"])
        self.assertIn("posterior_sd", report["coefficients"][0])

    def test_text_numbers_appear_in_json(self):
        args = ("fit", self.zip_csv, "--model", "zip", "--x-cols", "veh_value", "--timestamp", STAMP)
        text = run(*args, check=0).stdout
        raw = run(*args, "--format", "json", check=0).stdout
        report = json.loads(raw)
        self.assertIn("Wald", text)
        self.assertIn("Run: zips", text)
        values = [report["loglik"], report["aic"], report["bic"]]
        for row in report["coefficients"]:
            values += [row["estimate"], row["std_error"]]
        shown = {float(m) for m in re.findall(r"-?\d+\.\d{5}\b", text)}
        tokens = {float(t): t for t in re.findall(r"-?\d+\.\d+(?:[eE][-+]?\d+)?", raw)}
        for v in values:
            self.assertIn(round(v, 5) + 0.0, shown, v)
            digits = re.sub(r"[eE].*", "", tokens[v]).replace("-", "").replace(".", "").lstrip("0")
            self.assertGreaterEqual(len(digits), 15, tokens[v])

    def test_missing_column_is_named(self):
        bad = self.dir / "bad.csv"
        bad.write_text("numclaims,veh_value,gender\n0,1.0,1\n")
        proc = run("fit", bad, "--model", "zip")
        self.assertEqual(proc.returncode, 2)
        for col in ("age_young", "age_old", "veh_age_young"):
            self.assertIn(col, proc.stderr)

    def test_compare_marks_inflated_and_validates(self):
        out = self.dir / "cmp.json"
        run("compare", "--data", self.zip_csv, "--model", "poisson,zip", "--x-cols", "veh_value",
            "--format", "json", "--timestamp", STAMP, "-o", out, check=0)
        table = json.loads(out.read_text())
        jsonschema.validate(table, schema("compare"))
        self.assertEqual([r["model"] for r in table["rows"]], ["Poisson", "ZIP"])
        self.assertTrue(table["rows"][1]["lowest"]["aic"])

    def test_compare_saved_reports_and_tie(self):
        a = self.fit_json("--model", "zip", name="tie.json")
        proc = run("compare", a, a, "--timestamp", STAMP, check=0)
        lines = [l for l in proc.stdout.splitlines() if l.startswith("ZIP")]
        self.assertEqual(len(lines), 2)
        self.assertIn("<", lines[0])
        self.assertNotIn("<", lines[1])

    def test_compare_refuses_mixed_data(self):
        other_csv = self.dir / "other.csv"
        run("simulate", "--config", ROOT / "data" / "zip_regression.cfg", "--n", 3000, "--seed", 6,
            other_csv, check=0)
        a = self.fit_json("--model", "zip", name="mine.json")
        b = self.dir / "other.json"
        run("fit", other_csv, "--model", "zip", "--format", "json", "-o", b, check=0)
        proc = run("compare", a, b)
        self.assertEqual(proc.returncode, 2)
        self.assertIn("different data", proc.stderr)

    def test_indices_from_summaries(self):
        proc = run("indices", "--summaries", "67856,63232,0.07275", "--format", "json",
                   "--timestamp", STAMP, check=0)
        report = json.loads(proc.stdout)
        jsonschema.validate(report, schema("indices"))
        cols = {c["label"]: c for c in report["columns"]}
        self.assertEqual(list(cols), ["Sample", "Poisson", "Geometric", "ZIP", "ZIG"])
        self.assertIsNone(cols["Sample"]["kappa3"])
        self.assertAlmostEqual(cols["Poisson"]["p0"], 0.92983, delta=1e-4)
        self.assertAlmostEqual(cols["Geometric"]["kappa_index"], 0.22886, delta=1e-4)
        self.assertLess(cols["ZIG"]["omega"], 0)
        text = run("indices", "--summaries", "67856,63232,0.07275", check=0).stdout
        kappa3_line = next(l for l in text.splitlines() if l.startswith("kappa3"))
        self.assertEqual(kappa3_line.split()[1], "—")

    def test_indices_csv_matches_summaries(self):
        rows = self.zip_csv.read_text().splitlines()[1:]
        counts = [int(r.split(",")[0]) for r in rows]
        n, n0 = len(counts), counts.count(0)
        mean = sum(counts) / n
        via_csv = json.loads(run("indices", self.zip_csv, "--format", "json", check=0).stdout)
        via_sum = json.loads(run("indices", "--summaries", f"{n},{n0},{mean!r}", "--format", "json",
                                 check=0).stdout)
        for a, b in zip(via_csv["columns"], via_sum["columns"]):
            self.assertAlmostEqual(a["p0"], b["p0"], places=12)
            self.assertAlmostEqual(a["z_index"], b["z_index"], places=10)
            if b["theta"] is not None:
                self.assertAlmostEqual(a["theta"], b["theta"], places=9)
        self.assertIsNotNone(via_csv["columns"][0]["kappa3"])

    def test_indices_rejects_inconsistent_summaries(self):
        proc = run("indices", "--summaries", "10,11,0.5")
        self.assertEqual(proc.returncode, 2)

    def test_usage_errors_are_nonzero(self):
        self.assertNotEqual(run().returncode, 0)
        self.assertNotEqual(run("fit").returncode, 0)
        self.assertEqual(run("--help").returncode, 0)


def main():
    global ZIPS, ROOT
    parser = argparse.ArgumentParser()
    parser.add_argument("--zips", required=True)
    parser.add_argument("--root", required=True)
    args, rest = parser.parse_known_args()
    ZIPS = args.zips
    ROOT = Path(args.root)
    unittest.main(argv=[sys.argv[0], *rest], verbosity=2)


if __name__ == "__main__":
    main()
