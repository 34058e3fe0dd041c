#!/usr/bin/env python3

import math
import os
import unittest

import minamilab as ml
from minamilab import mlg
import numpy as np
import scipy.integrate

BUNDLED = os.path.join(os.path.dirname(os.path.realpath(__file__)), "..", "configs", "d2_flux.json")


def single_site(W=3.0, z=(0.4, 0.6), kind="uniform"):
    return ml.ExperimentConfig({"dim": 1, "sides": [1], "t": 1.0, "flux": 0.0, "diagonal_shift": False,
                                "potential": {"kind": kind, "param": W}, "z": {"re": z[0], "im": z[1]},
                                "sites": [0]})


class ChecksSamplers(unittest.TestCase):
    def test_substream_counter(self):
        a = np.random.default_rng(ml.substream(5, 3)).random(4)
        b = np.random.default_rng(ml.substream(5, 3)).random(4)
        c = np.random.default_rng(ml.substream(5, 4)).random(4)
        self.assertTrue(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_scalar_resolvent(self):
        config = single_site()
        seed = np.random.SeedSequence(9)
        v = np.random.default_rng(seed).uniform(-1.5, 1.5, size=1)[0]
        z = 0.4 + 0.6j
        expected = z.imag / ((v - z.real) ** 2 + z.imag ** 2)
        self.assertAlmostEqual(ml.sample_det_im_block(config, seed), expected, places=12)

    def test_deterministic_potential(self):
        config = single_site(W=0.0)
        values = [ml.sample_det_im_block(config, np.random.SeedSequence(s)) for s in range(3)]
        self.assertEqual(values[0], values[1])
        self.assertEqual(values[1], values[2])
        with self.assertRaises(ml.InvalidConfigError):
            ml.rao_blackwell_sample(config, 0)

    def test_rao_blackwell_one_site(self):
        for kind, W in (("uniform", 3.0), ("gaussian", 0.8)):
            config = single_site(W=W, kind=kind)
            law = config.potential
            lo, hi = law.support()
            expected, _ = scipy.integrate.quad(lambda v: law.pdf(v) * 0.6 / ((v - 0.4) ** 2 + 0.36), lo, hi,
                                               points=[0.4], epsabs=0, epsrel=1e-12, limit=200)
            found = ml.rao_blackwell_sample(config, np.random.SeedSequence(1))
            self.assertLess(ml.relative_difference(found, expected), 1e-9)
            # nothing left to draw outside the one site
            self.assertEqual(found, ml.rao_blackwell_sample(config, np.random.SeedSequence(2)))

    def test_rao_blackwell_pointwise_bound(self):
        config = ml.ExperimentConfig(BUNDLED)
        bound = (math.pi * config.potential.density_sup) ** 2
        for i in range(10):
            value = ml.rao_blackwell_sample(config, ml.substream(3, i))
            self.assertGreater(value, 0)
            self.assertLessEqual(value, bound * (1 + 1e-6))

    def test_rao_blackwell_three_sites(self):
        config = ml.ExperimentConfig(BUNDLED).with_overrides(sites=[14, 15, 21])
        bound = (math.pi * config.potential.density_sup) ** 3
        value = ml.rao_blackwell_sample(config, ml.substream(0, 0), ml.QuadratureConfig(rel_tol=1e-5))
        self.assertGreater(value, 0)
        self.assertLessEqual(value, bound * (1 + 1e-4))

    def test_conditional_expectation_matches_quadrature(self):
        A = ml.HerglotzMatrix([[1j, 0.3], [0.1, 0.5 + 2j]])
        law = ml.PotentialDistribution("uniform", 20.0)
        found = ml.conditional_expectation(A, law)
        expected, _ = scipy.integrate.dblquad(lambda y, x: ml.minami_integrand(A, [x, y]), -10, 10, -10, 10,
                                              epsabs=0, epsrel=1e-9)
        expected *= law.density_sup ** 2
        self.assertLess(ml.relative_difference(found, expected), 1e-6)
        # bounded by the unweighted integral
        self.assertLessEqual(found, ml.lemma1_value(A).value * law.density_sup ** 2)


class ChecksEstimator(unittest.TestCase):
    def test_verdict(self):
        r = ml.EstimatorResult(1.0, 0.1, 100, 0.6, 0, ml.Sampler.CRUDE, 2)
        self.assertEqual(r.verdict, ml.Verdict.VIOLATES_AT_3SIGMA)
        r = ml.EstimatorResult(1.0, 0.1, 100, 0.8, 0, ml.Sampler.CRUDE, 2)
        self.assertEqual(r.verdict, ml.Verdict.WITHIN_BOUND)
        with self.assertRaises(ml.InvalidInputError):
            ml.EstimatorResult(1.0, -0.1, 100, 0.8, 0, ml.Sampler.CRUDE, 2)

    def test_minimum_samples(self):
        with self.assertRaises(ml.InvalidInputError):
            ml.estimate_expectation(single_site(), N=1)
        with self.assertRaises(ml.InvalidConfigError):
            ml.estimate_expectation(single_site(), "bogus", 10)

    def test_wegner(self):
        config = ml.ExperimentConfig(BUNDLED).with_overrides(sites=[14])
        result = ml.estimate_expectation(config, ml.Sampler.CRUDE, 400, 1)
        self.assertAlmostEqual(result.bound, math.pi / 4)
        self.assertEqual(result.verdict, ml.Verdict.WITHIN_BOUND)
        self.assertEqual(result.samples, 400)
        self.assertEqual(result.flagged, 0)

    def test_bundled_bound(self):
        config = ml.ExperimentConfig(BUNDLED)
        result = ml.estimate_expectation(config, ml.Sampler.CRUDE, 500, 2)
        self.assertAlmostEqual(result.bound, math.pi ** 2 / 16)
        self.assertTrue(result.within_bound(), str(result))
        self.assertGreater(result.mean, 0)

    def test_reproducible(self):
        config = ml.ExperimentConfig(BUNDLED)
        a = ml.estimate_expectation(config, ml.Sampler.CRUDE, 40, 11)
        b = ml.estimate_expectation(config, ml.Sampler.CRUDE, 40, 11)
        self.assertEqual(a.to_dict(), b.to_dict())
        self.assertEqual(a.csv_row(), b.csv_row())

    def test_parallel_matches_serial(self):
        config = ml.ExperimentConfig(BUNDLED)
        serial = ml.estimate_expectation(config, ml.Sampler.CRUDE, 40, 11)
        previous = mlg.max_workers
        try:
            ml.set_max_workers(2)
            parallel = ml.estimate_expectation(config, ml.Sampler.CRUDE, 40, 11)
        finally:
            ml.set_max_workers(previous)
        self.assertEqual(serial.to_dict(), parallel.to_dict())

    def test_samplers_agree(self):
        config = ml.ExperimentConfig(BUNDLED)
        comparison = ml.compare_samplers(config, 200, 4)
        combined = math.sqrt(comparison.crude.std_error ** 2 + comparison.rao_blackwell.std_error ** 2)
        self.assertLessEqual(abs(comparison.crude.mean - comparison.rao_blackwell.mean), 3 * combined)
        self.assertTrue(comparison.consistent)
        self.assertLess(comparison.variance_ratio, 1.0)
        self.assertTrue(comparison.rao_blackwell.within_bound())

    def test_crude_three_sites(self):
        config = ml.ExperimentConfig(BUNDLED).with_overrides(sites=[14, 15, 21])
        result = ml.estimate_expectation(config, ml.Sampler.CRUDE, 300, 5)
        self.assertEqual(result.n, 3)
        self.assertAlmostEqual(result.bound, (math.pi / 4) ** 3)
        self.assertGreater(result.mean, 0)
        self.assertTrue(result.within_bound(), str(result))

    def test_csv_row(self):
        config = single_site()
        result = ml.estimate_expectation(config, ml.Sampler.RAO_BLACKWELL, 3, 0)
        fields = result.csv_row().split(",")
        self.assertEqual(len(fields), len(ml.EstimatorResult.csv_header.split(",")))
        self.assertEqual(fields[1], "1")
        self.assertEqual(fields[4], "rao_blackwell")
        self.assertEqual(fields[9], "within_bound")

    def test_sweep(self):
        config = ml.ExperimentConfig(os.path.join(os.path.dirname(BUNDLED), "d2_sweep.json"))
        results = ml.run_sweep(config, ml.Sampler.CRUDE, 100, 0)
        self.assertEqual(len(results), 6)
        self.assertEqual([r.config.potential.param for r in results[:2]], [2.0, 4.0])
        self.assertEqual(sorted(set(r.config.hopping.flux for r in results)), [0.0, 0.125, 0.25])
        for r in results:
            self.assertTrue(r.within_bound(), str(r))
            self.assertAlmostEqual(r.bound, (math.pi / r.config.potential.param) ** 2)


if __name__ == '__main__':
    unittest.main()
