#!/usr/bin/env python3
"""End-to-end checks of the mbi command-line tool.

usage: test_cli.py <mbi binary> <fixture dir>
"""
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import unittest

MBI = None
FIXTURE = None


def run(*args, check=None):
    p = subprocess.run([str(MBI), *map(str, args)], capture_output=True, text=True, timeout=600)
    if check is not None and p.returncode != check:
        raise AssertionError(f"exit {p.returncode} (want {check}) for {args}\nstdout:{p.stdout}\nstderr:{p.stderr}")
    return p


def rows(text):
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


class Cli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory()
        cls.dir = pathlib.Path(cls.tmp.name)
        cls.data = ["--images", FIXTURE / "images.idx", "--labels", FIXTURE / "labels.idx"]
        cls.model = ["--model", FIXTURE / "model.manifest", "--weights", FIXTURE / "model.bin"]
        cls.table = cls.dir / "table.mbi"
        run("distill", *cls.data, *cls.model, "--seed", 3, "-o", cls.table, check=0)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_energy_defaults(self):
        p = run("energy", check=0)
        self.assertIn("energy_per_inference = 13.16 nJ", p.stdout)
        total = [r for r in rows(p.stdout.split("\n", 1)[1]) if r["component"] == "total"]
        self.assertAlmostEqual(float(total[0]["joules"]), 13.16e-9, delta=1e-15)

    def test_usage_errors_exit_1(self):
        self.assertEqual(run().returncode, 1)
        self.assertEqual(run("no-such-command").returncode, 1)
        self.assertEqual(run("eval", *self.data).returncode, 1)  # --table missing
        self.assertEqual(run("subsample", "--table", self.table, "--fraction", 2, "-o", self.dir / "x").returncode, 1)
        self.assertEqual(run("--help").returncode, 0)

    def test_data_errors_exit_2(self):
        bad = self.dir / "bad.mbi"
        bad.write_bytes(b"NOPE" + bytes(40))
        p = run("eval", "--table", bad, *self.data, check=2)
        self.assertIn("magic", p.stderr)
        # label file given as images
        p = run("eval", "--table", self.table, "--images", FIXTURE / "labels.idx", "--labels", FIXTURE / "labels.idx",
                check=2)
        self.assertIn("magic", p.stderr)

    def test_subsample_then_eval(self):
        half = self.dir / "half.mbi"
        run("subsample", "--table", self.table, "--fraction", 0.5, "--seed", 1, "-o", half, check=0)
        p = run("--no-timestamp", "eval", "--table", half, *self.data, check=0)
        (report,) = rows(p.stdout)
        self.assertEqual(report["mode"], "mbi")
        self.assertEqual(int(report["images"]), 10)
        self.assertTrue(0.0 <= float(report["accuracy"]) <= 1.0)
        self.assertEqual(float(report["mbi_fraction"]), 1.0)

    def test_distillation_images_replay_at_zero_noise(self):
        # same images and location seed as distillation: every lookup is exact
        p = run("--no-timestamp", "infer-one", "--table", self.table, *self.data, "--index", 4, check=0)
        lookups = rows(p.stdout.rsplit("\n", 2)[0])
        self.assertEqual(len(lookups), 5)
        self.assertTrue(all(float(r["distance"]) == 0.0 for r in lookups))

    def test_mixed_ram_and_thresholds(self):
        ram = rows(run("--no-timestamp", "eval", "--mode", "ram", "--table", self.table, *self.data, *self.model,
                       check=0).stdout)[0]
        self.assertEqual(float(ram["mbi_fraction"]), 0.0)
        curve = rows(run("--no-timestamp", "sweep-threshold", "--table", self.table, *self.data, *self.model,
                         "--taus", "0,1,5,inf", check=0).stdout)
        self.assertEqual(len(curve), 4)
        fractions = [float(r["mbi_fraction"]) for r in curve]
        self.assertEqual(fractions, sorted(fractions))
        self.assertEqual(fractions[-1], 1.0)
        # mixed mode without a model is a usage error
        self.assertEqual(run("eval", "--mode", "mixed", "--table", self.table, *self.data).returncode, 1)

    def test_csv_is_reproducible_without_timestamp(self):
        args = ["sweep-fraction", "--table", self.table, *self.data, "--fractions", "0.5,1", "--seed", 9]
        a = run("--no-timestamp", *args, check=0).stdout
        b = run("--no-timestamp", "--threads", 3, *args, check=0).stdout
        self.assertEqual(a, b)
        stamped = run(*args, check=0).stdout
        self.assertTrue(stamped.startswith("# generated"))
        self.assertEqual(stamped.split("\n", 1)[1], a)

    def test_gap_histogram_on_synthetic_table(self):
        synth = self.dir / "synth.mbi"
        run("synth-table", "--rows", 3000, "--seed", 2, "-o", synth, check=0)
        out = self.dir / "gap.csv"
        p = run("--no-timestamp", "gap-hist", "--table", synth, "--queries", 100, "--probes", 4, "-o", out, check=0)
        hist = rows(out.read_text())
        self.assertEqual(len(hist), 10)
        self.assertEqual(sum(int(r["count"]) for r in hist), 100)
        self.assertIn("fraction_gap_le_0.10=", p.stderr)

    def test_index_tune_and_inputs_untouched(self):
        before = self.table.read_bytes()
        tree = self.dir / "tree.mbt"
        run("index", "--table", self.table, "--leaf-capacity", 8, "-o", tree, check=0)
        hist = self.dir / "hist.csv"
        # tune rebuilds the tree for each weight trial, so it takes build options, not a tree file
        p = run("--no-timestamp", "tune", "--table", self.table, "--leaf-capacity", 8, *self.data, "--init-points", 3,
                "--iterations", 2, "--candidates", 50, "--history", hist, check=0)
        history = rows(hist.read_text())
        self.assertEqual(len(history), 5)
        for r in history:
            for k in "abc":
                self.assertTrue(1.0 <= float(r[k]) <= 100.0)
        self.assertIn("best a=", p.stderr)
        self.assertTrue(tree.stat().st_size > 0)
        self.assertEqual(self.table.read_bytes(), before)

    def test_config_file_and_flag_precedence(self):
        cfg = self.dir / "run.toml"
        cfg.write_text("no-timestamp = true\n[energy]\nsplits = 4\n")
        p = run("--config", cfg, "energy", check=0)
        self.assertIn("10.53 nJ", p.stdout)
        self.assertFalse(p.stdout.split("\n", 1)[1].startswith("#"))
        p = run("--config", cfg, "energy", "--splits", 5, check=0)
        self.assertIn("13.16 nJ", p.stdout)


if __name__ == "__main__":
    MBI = pathlib.Path(sys.argv[1])
    FIXTURE = pathlib.Path(sys.argv[2])
    unittest.main(argv=sys.argv[:1], verbosity=2)
