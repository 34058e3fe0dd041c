#!/usr/bin/env python3

import contextlib
import io
import json
import math
import os
import tempfile
import unittest
from unittest import mock

import minamilab as ml
from minamilab.cli import main, RunManifest

CONFIGS = os.path.join(os.path.dirname(os.path.realpath(__file__)), "..", "configs")


def run(argv):
    out = io.StringIO()
    err = io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(argv)
    return code, out.getvalue(), err.getvalue()


def write_matrix(directory, entries):
    path = os.path.join(directory, "matrix.json")
    ml.ComplexSquareMatrix(entries).save(path)
    return path


class ChecksIdentities(unittest.TestCase):
    def test_pass(self):
        code, out, _ = run(["identities", "--seed", "42", "--count", "5"])
        self.assertEqual(code, 0)
        self.assertIn("feshbach", out)

    def test_count_zero(self):
        code, _, err = run(["identities", "--count", "0"])
        self.assertEqual(code, 2)

    def test_same_seed_same_report(self):
        a = run(["identities", "--seed", "3", "--count", "4"])
        b = run(["identities", "--seed", "3", "--count", "4"])
        self.assertEqual(a, b)


class ChecksLemma1(unittest.TestCase):
    def test_identity_matrix(self):
        with tempfile.TemporaryDirectory() as d:
            code, out, _ = run(["lemma1", "--matrix", write_matrix(d, [[1j, 0], [0, 1j]])])
        self.assertEqual(code, 0)
        self.assertIn("ratio=1", out)

    def test_upper_triangular(self):
        with tempfile.TemporaryDirectory() as d:
            out_path = os.path.join(d, "lemma1.json")
            code, _, _ = run(["lemma1", "--matrix", write_matrix(d, [[1j, 1], [0, 1j]]), "--out", out_path])
            with open(out_path) as f:
                data = json.load(f)
        self.assertEqual(code, 0)
        self.assertAlmostEqual(data["closed_form"]["value"], 7.4022, places=4)
        self.assertEqual(data["manifest"]["command"], "lemma1")

    def test_not_herglotz(self):
        with tempfile.TemporaryDirectory() as d:
            code, _, err = run(["lemma1", "--matrix", write_matrix(d, [[1, 0], [0, 1]])])
        self.assertEqual(code, 2)
        self.assertIn("Im A not positive definite", err)

    def test_ragged(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "bad.json")
            with open(path, "w") as f:
                json.dump({"n": 2, "re": [[1, 0], [0]], "im": [[1, 0], [0, 1]]}, f)
            code, _, _ = run(["lemma1", "--matrix", path])
        self.assertEqual(code, 2)

    def test_random(self):
        code, _, _ = run(["lemma1", "--seed", "5"])
        self.assertEqual(code, 0)


class ChecksLemma2(unittest.TestCase):
    def test_one_dimension(self):
        code, out, _ = run(["lemma2", "--n", "1", "--count", "5"])
        self.assertEqual(code, 0)

    def test_two_dimensions(self):
        code, _, _ = run(["lemma2", "--n", "2", "--count", "2", "--rel-tol", "1e-6"])
        self.assertEqual(code, 0)

    def test_bad_dimension(self):
        self.assertEqual(run(["lemma2", "--n", "5"])[0], 2)
        self.assertEqual(run(["lemma2", "--n", "0"])[0], 2)
        self.assertEqual(run(["lemma2"])[0], 2)

    def test_wrong_values_fail(self):
        real = ml.integrate_minami_nd

        def halved(A, cfg=None):
            r = real(A, cfg)
            return ml.IntegralResult(r.value / 2, r.est_error, r.panels_used, r.converged)

        with mock.patch("minamilab.cli.integrate_minami_nd", halved):
            code, out, err = run(["lemma2", "--n", "1", "--count", "3"])
            self.assertEqual(code, 1)
            self.assertIn("mismatches=3", out)
            self.assertIn("expected", err)

            code, out, _ = run(["lemma2", "--n", "2", "--count", "2", "--rel-tol", "1e-6"])
            self.assertEqual(code, 1)
            self.assertIn("violations=0 mismatches=2", out)

    def test_expected_values_written(self):
        with tempfile.TemporaryDirectory() as d:
            out_path = os.path.join(d, "lemma2.json")
            code, _, _ = run(["lemma2", "--n", "2", "--count", "3", "--seed", "4", "--out", out_path])
            with open(out_path) as f:
                data = json.load(f)
        self.assertEqual(code, 0)
        self.assertEqual(data["mismatches"], 0)
        for row in data["results"]:
            self.assertLess(row["relative_difference"], 5e-7)
            self.assertLess(row["expected"], math.pi ** 2)


class ChecksMinami(unittest.TestCase):
    def test_bundled(self):
        config = os.path.join(CONFIGS, "d2_flux.json")
        with tempfile.TemporaryDirectory() as d:
            out_path = os.path.join(d, "minami.json")
            argv = ["minami", "--config", config, "--count", "60", "--seed", "1", "--out", out_path]

            code, stdout_a, _ = run(argv)
            self.assertEqual(code, 0)
            with open(out_path) as f:
                first = json.load(f)
            with open(os.path.join(d, "minami.csv")) as f:
                csv_a = f.read()

            code, stdout_b, _ = run(argv)
            with open(out_path) as f:
                second = json.load(f)
            with open(os.path.join(d, "minami.csv")) as f:
                csv_b = f.read()

        self.assertEqual(stdout_a, stdout_b)
        del first["manifest"]["timestamp"]
        del second["manifest"]["timestamp"]
        self.assertEqual(first, second)

        strip = lambda text: [l for l in text.splitlines() if not l.startswith("# timestamp")]
        self.assertEqual(strip(csv_a), strip(csv_b))
        rows = [l for l in csv_a.splitlines() if not l.startswith("#")]
        self.assertEqual(rows[0], "flux,n,W,im_z,sampler,N,mean,std_error,bound,verdict")
        self.assertEqual(len(rows), 2)
        self.assertTrue(rows[1].endswith("within_bound"))
        self.assertEqual(first["results"][0]["config"]["sites"], [14, 21])

    def test_compare(self):
        config = os.path.join(CONFIGS, "d2_flux.json")
        code, out, _ = run(["minami", "--config", config, "--count", "20", "--compare"])
        self.assertEqual(code, 0)
        self.assertIn("variance_ratio", out)
        self.assertIn("rao_blackwell", out)

    def test_bad_sampler(self):
        config = os.path.join(CONFIGS, "d2_flux.json")
        self.assertEqual(run(["minami", "--config", config, "--sampler", "bogus"])[0], 2)

    def test_bad_config(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "config.json")
            with open(path, "w") as f:
                json.dump({"dim": 2, "sides": [3, 3], "boundary": "periodic", "flux": 0.25, "t": 1,
                           "potential": {"kind": "uniform", "param": 1}, "z": {"re": 0, "im": 1},
                           "sites": [0, 1]}, f)
            self.assertEqual(run(["minami", "--config", path, "--count", "10"])[0], 2)
        self.assertEqual(run(["minami", "--config", "/nonexistent.json"])[0], 2)


class ChecksRunManifest(unittest.TestCase):
    def test_comparable(self):
        a = RunManifest("identities", 1, timestamp="2020-01-01T00:00:00+00:00")
        b = RunManifest("identities", 1)
        self.assertEqual(a.comparable(), b.comparable())
        self.assertNotIn("timestamp", a.comparable())
        self.assertEqual(a.version, ml.__version__)
        self.assertIn("# command=identities", a.csv_comments())


if __name__ == '__main__':
    unittest.main()
