import logging
import math
from multiprocessing import Pool

import numpy as np

from minamilab import mlg
from minamilab.common import *
from minamilab.anderson import build_hamiltonian, green_block, krein_matrix
from minamilab.quadrature import MAX_DIMENSION, QuadratureConfig, _Tally, _quad, _last_axis_coefficients, \
    det_imag_part

logger = logging.getLogger(__name__)

# A run is rejected if more than this fraction of its samples had to be flagged
MAX_FLAGGED_FRACTION = 1e-3
DEFAULT_SAMPLES = 10000


class Sampler:
    CRUDE = "crude"
    RAO_BLACKWELL = "rao_blackwell"
    values = (CRUDE, RAO_BLACKWELL)


class Verdict:
    WITHIN_BOUND = "within_bound"
    VIOLATES_AT_3SIGMA = "violates_at_3sigma"


class EstimatorResult:
    """
    Monte Carlo estimate of E[det Im G_SS(z)] together with the bound (pi * density_sup)^n it is compared
    against. The verdict is violates_at_3sigma exactly when mean - 3 std_error > bound.
    """

    def __init__(self, mean, std_error, samples, bound, seed, sampler, n, flagged=0, config=None):
        if samples < 1:
            raise InvalidInputError("An estimate needs at least one sample")
        if std_error < 0:
            raise InvalidInputError("std_error can't be negative")
        self.mean = float(mean)
        self.std_error = float(std_error)
        self.samples = int(samples)
        self.bound = float(bound)
        self.seed = int(seed)
        self.sampler = sampler
        self.n = int(n)
        self.flagged = int(flagged)
        self.config = config
        if self.mean - 3.0 * self.std_error > self.bound:
            self.verdict = Verdict.VIOLATES_AT_3SIGMA
        else:
            self.verdict = Verdict.WITHIN_BOUND

    def within_bound(self):
        return self.verdict == Verdict.WITHIN_BOUND

    def to_dict(self):
        out = {"mean": self.mean, "std_error": self.std_error, "samples": self.samples,
               "bound": self.bound if math.isfinite(self.bound) else None, "verdict": self.verdict,
               "seed": self.seed, "sampler": self.sampler, "n": self.n, "flagged": self.flagged}
        if self.config is not None:
            out["config"] = self.config.to_dict()
        return out

    csv_header = "flux,n,W,im_z,sampler,N,mean,std_error,bound,verdict"

    def csv_row(self):
        """One line of the sweep table, see csv_header"""
        if self.config is None:
            raise InvalidInputError("The CSV row needs the config the estimate was made with")
        c = self.config
        return "{!r},{:d},{!r},{!r},{},{:d},{!r},{!r},{!r},{}".format(
            c.hopping.flux, self.n, c.potential.param, c.z.z.imag, self.sampler, self.samples, self.mean,
            self.std_error, self.bound, self.verdict)

    def __str__(self):
        return "EstimatorResult{{ sampler={} n={:d} N={:d} mean={:.6e} std_error={:.3e} bound={:.6e} " \
               "verdict={} flagged={:d} }}".format(self.sampler, self.n, self.samples, self.mean, self.std_error,
                                                  self.bound, self.verdict, self.flagged)


def substream(base_seed, index):
    """
    Seed of sample 'index'. Derived from a counter so the sample set doesn't depend on how the work is split
    between processes.

    :rtype: numpy.random.SeedSequence
    """
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))


def draw_potential(config, rng):
    """One value of the potential per site of the box, drawn in site order"""
    return config.potential.sample(rng, config.box.site_count)


def sample_det_im_block(config, rng_seed):
    """
    Draws a potential and returns det Im G_SS(z), which is always positive.

    :type config: ExperimentConfig
    :param rng_seed: seed or numpy SeedSequence
    :rtype: float
    """
    rng = np.random.default_rng(rng_seed)
    v = draw_potential(config, rng)
    H = build_hamiltonian(config.box, config.hopping, v)
    block = green_block(H, config.z, config.sites)
    value = det_imag_part(block)
    if not value > 0:
        raise InternalInconsistencyError("det Im G_SS = {} is not positive".format(value))
    return value


def _weighted_axis(f, potential, center, tol, limit, tally):
    lo, hi = potential.support()
    value, _ = _quad(lambda x: potential.pdf(x) * f(x), lo, hi, [center, 0.0], tol, limit, tally)
    return value


def conditional_expectation(A, potential, cfg=None):
    """
    The integral of rho(v_1)...rho(v_n) det(Im[diag(v) - A]^-1) over v. The last variable is done in closed
    form with potential.lorentzian_average, the others with adaptive quadrature weighted by the density.

    :raises QuadratureFailure: if one of the adaptive rules did not converge
    """
    if cfg is None:
        cfg = QuadratureConfig()
    n = A.n
    if n > MAX_DIMENSION:
        raise UnsupportedDimensionError("Conditional expectation supports n <= {}, got {}".format(MAX_DIMENSION, n))
    a = A.entries
    det_im = det_imag_part(A)
    tally = _Tally()
    inner_tol = max(cfg.rel_tol / 10.0, 1e-13)

    def level(prefix):
        k = len(prefix)
        if k == n - 1:
            d0, d1 = _last_axis_coefficients(a, prefix)
            w = d0 / d1
            if not w.imag > 0:
                raise InternalInconsistencyError("Pole {} of the last axis is not in the upper half plane".format(w))
            return det_im / (abs(d1) ** 2 * w.imag) * potential.lorentzian_average(w.real, w.imag)
        tol = cfg.rel_tol if k == 0 else inner_tol
        return _weighted_axis(lambda x: level(prefix + [x]), potential, float(a[k, k].real), tol,
                              cfg.max_panels_per_axis, tally)

    value = level([])
    if not tally.converged:
        raise QuadratureFailure("Conditional expectation for n={} did not converge".format(n))
    return value


def rao_blackwell_sample(config, rng_seed, cfg=None):
    """
    Draws the potential away from the sites S and returns E[det Im G_SS | V outside S], integrating the
    potentials on S out through the Krein matrix A. Never exceeds (pi * density_sup)^n.

    The same seed draws the same exterior potential as sample_det_im_block.

    :raises QuadratureFailure: flagged sample
    """
    if config.potential.is_point_mass():
        raise InvalidConfigError("The Rao-Blackwell sampler needs a potential with a density")
    rng = np.random.default_rng(rng_seed)
    v = draw_potential(config, rng)
    A = krein_matrix(config.box, config.hopping, v, config.z, config.sites)
    return conditional_expectation(A, config.potential, cfg)


def _evaluate(task):
    # top level so multiprocessing can pickle it
    config, sampler, base_seed, index = task
    ss = substream(base_seed, index)
    try:
        if sampler == Sampler.CRUDE:
            return sample_det_im_block(config, ss)
        return rao_blackwell_sample(config, ss)
    except QuadratureFailure as e:
        logger.warning("Flagged sample %d of seed %d: %s", index, base_seed, e)
        return math.nan


def _check_sampler(config, sampler):
    if sampler not in Sampler.values:
        raise InvalidConfigError("Unknown sampler '{}'".format(sampler))
    if sampler == Sampler.RAO_BLACKWELL and config.potential.is_point_mass():
        raise InvalidConfigError("The Rao-Blackwell sampler needs a potential with a density")


def collect_samples(config, sampler, N, base_seed):
    """
    Evaluates samples 0..N-1, in parallel if mlg.max_workers > 1. Results are in sample order and flagged
    samples are NaN.

    :rtype: numpy.ndarray
    """
    _check_sampler(config, sampler)
    tasks = [(config, sampler, base_seed, i) for i in range(N)]
    workers = min(mlg.max_workers, N)
    if workers > 1:
        with Pool(processes=workers) as pool:
            values = pool.map(_evaluate, tasks, chunksize=max(1, N // (4 * workers)))
    else:
        values = [_evaluate(task) for task in tasks]
    return np.asarray(values, dtype=np.float64)


def estimate_expectation(config, sampler=Sampler.CRUDE, N=DEFAULT_SAMPLES, base_seed=0):
    """
    Estimates E[det Im G_SS(z)] from N independent samples and compares it with (pi * density_sup)^n.

    The result only depends on the arguments. Sample i always uses substream(base_seed, i) and the mean is
    reduced over the samples in index order, no matter how many worker processes are used.

    :type config: ExperimentConfig
    :param sampler: Sampler.CRUDE or Sampler.RAO_BLACKWELL
    :param N: Number of samples, at least 2
    :param base_seed: non-negative integer
    :rtype: EstimatorResult
    """
    if int(N) < 2:
        raise InvalidInputError("N must be at least 2, got {}".format(N))
    if int(base_seed) < 0:
        raise InvalidInputError("base_seed must be non-negative")
    N = int(N)
    values = collect_samples(config, sampler, N, base_seed)

    good = values[~np.isnan(values)]
    flagged = N - len(good)
    if len(good) < 2:
        raise EstimationFailedError("{} of {} samples were flagged".format(flagged, N))
    if flagged > MAX_FLAGGED_FRACTION * N:
        raise EstimationFailedError("{} of {} samples were flagged, at most {:g}% are tolerated".format(
            flagged, N, 100 * MAX_FLAGGED_FRACTION))
    if flagged:
        logger.warning("%d of %d samples flagged and excluded", flagged, N)

    mean = float(np.mean(good))
    std_error = float(np.std(good, ddof=1) / math.sqrt(len(good)))
    n = config.n
    bound = (math.pi * config.potential.density_sup) ** n
    result = EstimatorResult(mean, std_error, len(good), bound, base_seed, sampler, n, flagged, config)
    logger.debug("%s", result)
    return result


class SamplerComparison:
    """Both estimators run on the same seeds. variance_ratio is (std_error RB / std_error crude)^2"""

    def __init__(self, crude, rao_blackwell):
        self.crude = crude
        self.rao_blackwell = rao_blackwell
        if crude.std_error > 0:
            self.variance_ratio = (rao_blackwell.std_error / crude.std_error) ** 2
        else:
            self.variance_ratio = math.nan
        combined = math.sqrt(crude.std_error ** 2 + rao_blackwell.std_error ** 2)
        self.consistent = abs(crude.mean - rao_blackwell.mean) <= 3.0 * combined

    def to_dict(self):
        return {"crude": self.crude.to_dict(), "rao_blackwell": self.rao_blackwell.to_dict(),
                "variance_ratio": self.variance_ratio if math.isfinite(self.variance_ratio) else None,
                "consistent": self.consistent}

    def __str__(self):
        return "SamplerComparison{{ crude={:.6e}+-{:.3e} rao_blackwell={:.6e}+-{:.3e} variance_ratio={:.3g} }}"\
            .format(self.crude.mean, self.crude.std_error, self.rao_blackwell.mean, self.rao_blackwell.std_error,
                    self.variance_ratio)


def compare_samplers(config, N=DEFAULT_SAMPLES, base_seed=0):
    """
    :rtype: SamplerComparison
    """
    crude = estimate_expectation(config, Sampler.CRUDE, N, base_seed)
    rb = estimate_expectation(config, Sampler.RAO_BLACKWELL, N, base_seed)
    return SamplerComparison(crude, rb)


def run_sweep(config, sampler=Sampler.CRUDE, N=DEFAULT_SAMPLES, base_seed=0):
    """
    estimate_expectation at every point of the config's sweep grid, all with the same base seed

    :rtype: list of EstimatorResult
    """
    results = []
    for point in config.sweep_points():
        logger.debug("Sweep point %s", point)
        results.append(estimate_expectation(point, sampler, N, base_seed))
    return results
