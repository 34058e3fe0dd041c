import cmath
import logging
import math

import numpy as np
import scipy.linalg

from minamilab.common import *

logger = logging.getLogger(__name__)


class ComplexSquareMatrix:
    """
    Dense n x n complex matrix in double precision. Entries are copied on construction and the copy is made
    read only, so instances can be shared freely.
    """

    def __init__(self, entries):
        """
        :param entries: Anything numpy can turn into a 2D array. Another ComplexSquareMatrix is also accepted.
        """
        if isinstance(entries, ComplexSquareMatrix):
            array = entries.entries
        else:
            try:
                array = np.array(entries, dtype=np.complex128)
            except ValueError:
                raise InvalidInputError("Matrix entries are ragged or not numeric")
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.shape[0] < 1:
            raise InvalidInputError("Matrix must be square and non-empty, got shape {}".format(array.shape))
        check_finite(array, "matrix")
        array = array.copy()
        array.setflags(write=False)
        self.entries = array
        self.n = array.shape[0]

    def ndarray(self):
        """
        Returns a writable copy of the entries
        :rtype: numpy.ndarray
        """
        return self.entries.copy()

    def conj_transpose(self):
        return ComplexSquareMatrix(self.entries.conj().T)

    def __getitem__(self, key):
        return self.entries[key]

    def to_dict(self):
        return {"n": self.n,
                "re": self.entries.real.tolist(),
                "im": self.entries.imag.tolist()}

    @staticmethod
    def from_dict(data):
        """
        Parses the matrix JSON layout {"n": int, "re": [[...]], "im": [[...]]}. Ragged arrays are rejected.
        """
        try:
            n = int(data["n"])
            re = data["re"]
            im = data["im"]
        except (KeyError, TypeError, ValueError):
            raise InvalidInputError("Matrix JSON needs the keys 'n', 're' and 'im'")
        for name, rows in (("re", re), ("im", im)):
            if not isinstance(rows, list) or len(rows) != n:
                raise InvalidInputError("'{}' must have {} rows".format(name, n))
            for row in rows:
                if not isinstance(row, list) or len(row) != n:
                    raise InvalidInputError("'{}' is ragged, every row needs {} entries".format(name, n))
        try:
            array = np.array(re, dtype=np.float64) + 1j * np.array(im, dtype=np.float64)
        except (TypeError, ValueError):
            raise InvalidInputError("Matrix JSON entries must be numbers")
        return ComplexSquareMatrix(array)

    @staticmethod
    def load(file_name: str):
        """
        Loads a matrix stored in the JSON layout. Matrices are read only, so this builds a new one.

        :param file_name: Path to the JSON file
        :return: the loaded matrix
        """
        return ComplexSquareMatrix.from_dict(load_json(file_name))

    def save(self, file_name: str):
        dump_json(self.to_dict(), file_name)

    def __eq__(self, other):
        if not isinstance(other, ComplexSquareMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __str__(self):
        return "ComplexSquareMatrix(n={:d})\n{}".format(self.n, np.array2string(self.entries, precision=6))


class HerglotzMatrix:
    """
    A ComplexSquareMatrix whose imaginary part (C - C*)/2i is positive definite. The smallest eigenvalue of the
    imaginary part is cached as certified_min_eig. Construction fails if the matrix is not Herglotz.
    """

    def __init__(self, matrix, tol=None):
        """
        :param matrix: The candidate matrix
        :type matrix: ComplexSquareMatrix or array like
        :param tol: Strictness tolerance. See default_tolerance()
        """
        matrix = as_matrix(matrix)
        min_eig = smallest_imag_eigenvalue(matrix)
        if tol is None:
            tol = default_tolerance(matrix)
        if not min_eig > tol:
            raise InvalidInputError("Im A not positive definite, smallest eigenvalue {:.6e}".format(min_eig),
                                    min_eig=min_eig)
        self.matrix = matrix
        self.certified_min_eig = min_eig

    @property
    def n(self):
        return self.matrix.n

    @property
    def entries(self):
        return self.matrix.entries

    def __getitem__(self, key):
        return self.matrix.entries[key]

    def __str__(self):
        return "HerglotzMatrix(n={:d} min_eig={:.6e})\n{}".format(
            self.n, self.certified_min_eig, np.array2string(self.entries, precision=6))


def as_matrix(obj):
    """
    Converts arrays, nested lists and HerglotzMatrix into a ComplexSquareMatrix
    :rtype: ComplexSquareMatrix
    """
    if isinstance(obj, ComplexSquareMatrix):
        return obj
    elif isinstance(obj, HerglotzMatrix):
        return obj.matrix
    else:
        return ComplexSquareMatrix(obj)


def as_herglotz(obj, tol=None):
    """
    Returns obj if it's already a HerglotzMatrix, otherwise certifies it
    :rtype: HerglotzMatrix
    """
    if isinstance(obj, HerglotzMatrix):
        return obj
    return HerglotzMatrix(obj, tol)


def imag_part(C):
    """
    Operator imaginary part (C - C*)/2i. The result is symmetrized so that it is exactly Hermitian.

    :param C: square matrix
    :rtype: ComplexSquareMatrix
    """
    a = as_matrix(C).entries
    im = (a - a.conj().T) / 2j
    im = (im + im.conj().T) / 2
    return ComplexSquareMatrix(im)


def default_tolerance(C):
    """1e-12 * (1 + max |Im C|)"""
    im = imag_part(C).entries
    return STRICTNESS_FACTOR * (1.0 + float(np.max(np.abs(im))))


def smallest_imag_eigenvalue(C):
    im = imag_part(C).entries
    return float(scipy.linalg.eigvalsh(im)[0])


def is_herglotz(C, tol=None):
    """
    True if the smallest eigenvalue of Im C is strictly larger than tol. Degenerate input returns False.

    :param C: square matrix
    :param tol: Strictness tolerance. If None then default_tolerance(C)
    :rtype: bool
    """
    try:
        C = as_matrix(C)
        if tol is None:
            tol = default_tolerance(C)
        return smallest_imag_eigenvalue(C) > tol
    except (MinamiLabError, np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return False


def condition_number(C):
    return float(np.linalg.cond(as_matrix(C).entries))


def inverse(C):
    """
    Inverse with a conditioning gate. Raises ConditioningError when the condition number exceeds 1e12.
    :rtype: ComplexSquareMatrix
    """
    C = as_matrix(C)
    cond = condition_number(C)
    if not cond <= CONDITION_LIMIT:
        raise ConditioningError("Refusing to invert, condition number {:.3e} exceeds {:.0e}".format(
            cond, CONDITION_LIMIT))
    return ComplexSquareMatrix(scipy.linalg.inv(C.entries))


def log_det(C):
    """
    Log magnitude and phase of the determinant from an LU factorization with partial pivoting. Avoids the
    overflow of multiplying out the pivots.

    :return: (log|det C|, det C / |det C|). For a singular matrix (-inf, 0)
    """
    lu, piv = scipy.linalg.lu_factor(as_matrix(C).entries, check_finite=False)
    diag = np.diag(lu)
    if np.any(diag == 0):
        return -math.inf, 0j
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    phase = complex(np.prod(diag / np.abs(diag))) * (-1.0 if swaps % 2 else 1.0)
    return float(np.sum(np.log(np.abs(diag)))), phase


def _from_log(logabs, phase):
    with np.errstate(over='ignore'):
        magnitude = float(np.exp(logabs))
    if math.isinf(magnitude):
        return cmath.rect(magnitude, cmath.phase(phase))
    return phase * magnitude


def determinant(C):
    """det C, or inf times its phase when |det C| is beyond the floating point range"""
    return _from_log(*log_det(C))


def neg_inverse(C):
    """
    -C^-1 of a Herglotz matrix, which is again Herglotz.

    :type C: HerglotzMatrix
    :rtype: HerglotzMatrix
    """
    C = as_herglotz(C)
    result = -inverse(C.matrix).entries
    try:
        return HerglotzMatrix(result)
    except InvalidInputError as e:
        raise ConditioningError("-C^-1 lost positivity numerically (min eig {:.3e}), the Herglotz certificate "
                                "{:.3e} is too weak".format(e.min_eig, C.certified_min_eig))


def neg_inverse_identity(C):
    """
    Both sides of Im(-C^-1) = C^-1* (Im C) C^-1

    :return: (lhs, rhs) as numpy arrays
    """
    C = as_herglotz(C)
    inv = inverse(C.matrix).entries
    lhs = imag_part(-inv).entries
    rhs = inv.conj().T @ imag_part(C).entries @ inv
    return lhs, rhs


def restrict(C, indices):
    """
    Principal submatrix on an ordered subset of 0-based indices

    :param C: square matrix
    :param indices: distinct indices in 0..n-1, order is kept
    :rtype: ComplexSquareMatrix
    """
    C = as_matrix(C)
    indices = [int(i) for i in indices]
    if len(indices) == 0:
        raise InvalidInputError("Restriction needs at least one index")
    if len(set(indices)) != len(indices):
        raise InvalidInputError("Duplicate indices in {}".format(indices))
    for i in indices:
        if i < 0 or i >= C.n:
            raise InvalidInputError("Index {} out of range for n={}".format(i, C.n))
    return ComplexSquareMatrix(C.entries[np.ix_(indices, indices)])


def schur_complement_last(C):
    """
    Schur complement of the last diagonal entry, B = C_hat - c_nn^-1 (c_V x c_H), where C_hat is the leading
    (n-1) block, c_V the last column and c_H the last row without c_nn.

    :rtype: ComplexSquareMatrix
    """
    C = as_matrix(C)
    if C.n < 2:
        raise InvalidInputError("Schur complement needs n >= 2")
    a = C.entries
    c_nn = a[-1, -1]
    scale = float(np.max(np.abs(a)))
    if abs(c_nn) <= scale / CONDITION_LIMIT:
        raise SingularPivotError("Pivot c_nn = {} is numerically zero".format(c_nn))
    return ComplexSquareMatrix(a[:-1, :-1] - np.outer(a[:-1, -1], a[-1, :-1]) / c_nn)


def feshbach_pair(A):
    """
    Both sides of the Schur/Feshbach formula inverse(B) = leading block of inverse(A)

    :return: (inverse of the Schur complement, restricted inverse) as numpy arrays
    """
    A = as_matrix(A)
    lhs = inverse(schur_complement_last(A)).entries
    rhs = restrict(inverse(A), range(A.n - 1)).entries
    return lhs, rhs


def cofactor_ratio_identity(C):
    """
    Both sides of (C^-1)_nn * det C = det C_hat. For n = 1 the empty determinant is 1.

    The product on the left is formed from logarithms, so it only saturates when det C_hat does.

    :return: (lhs, rhs) complex numbers
    """
    C = as_matrix(C)
    logabs_c, phase_c = log_det(C)
    if phase_c == 0 or condition_number(C) > CONDITION_LIMIT:
        raise SingularMatrixError("Matrix is singular, the cofactor identity needs an inverse")
    inv_nn = complex(scipy.linalg.inv(C.entries)[-1, -1])
    if inv_nn == 0:
        lhs = 0j
    else:
        lhs = complex(_from_log(logabs_c + math.log(abs(inv_nn)), phase_c * inv_nn / abs(inv_nn)))
    rhs = 1.0 + 0j if C.n == 1 else complex(determinant(restrict(C, range(C.n - 1))))
    return lhs, rhs


def cauchy_step_pair(C):
    """
    For Hermitian positive definite C returns (det C, c_nn * det C_hat). The first never exceeds the second.
    """
    C = as_matrix(C)
    a = C.entries
    det_c = float(np.real(determinant(C)))
    det_hat = 1.0 if C.n == 1 else float(np.real(determinant(restrict(C, range(C.n - 1)))))
    return det_c, float(np.real(a[-1, -1])) * det_hat


def sample_random_herglotz(n, rng_seed, spread=1.0):
    """
    Test case generator A = R + i(L L* + eps I). R is real symmetric with entries in [-spread, spread], L has
    complex entries in the box of half width spread and eps = 0.05 * spread. Since R is symmetric, Im A equals
    L L* + eps I.

    :param n: dimension
    :param rng_seed: seed or numpy SeedSequence
    :param spread: scale of the entries
    :rtype: HerglotzMatrix
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    if not spread > 0:
        raise InvalidInputError("spread must be positive")
    rng = np.random.default_rng(rng_seed)
    r = rng.uniform(-spread, spread, size=(n, n))
    r = np.triu(r) + np.triu(r, 1).T
    ell = rng.uniform(-spread, spread, size=(n, n)) + 1j * rng.uniform(-spread, spread, size=(n, n))
    eps = 0.05 * spread
    im = ell @ ell.conj().T + eps * np.eye(n)
    return HerglotzMatrix(r + 1j * im, tol=eps / 2)


def sample_positive_definite(n, rng_seed, spread=1.0):
    """Hermitian positive definite L L* + eps I with the same L and eps as sample_random_herglotz"""
    rng = np.random.default_rng(rng_seed)
    ell = rng.uniform(-spread, spread, size=(n, n)) + 1j * rng.uniform(-spread, spread, size=(n, n))
    return ComplexSquareMatrix(ell @ ell.conj().T + 0.05 * spread * np.eye(n))


class PropertyOutcome:
    """Result of checking one matrix property over many random instances"""

    def __init__(self, name, tolerance):
        self.name = name
        self.tolerance = tolerance
        self.checked = 0
        self.failures = 0
        self.worst = 0.0
        self.first_failure = None

    def record(self, value, passed, where):
        self.checked += 1
        self.worst = max(self.worst, value)
        if not passed:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = where

    def passed(self):
        return self.failures == 0

    def to_dict(self):
        return {"property": self.name, "checked": self.checked, "failures": self.failures,
                "worst": self.worst, "tolerance": self.tolerance, "first_failure": self.first_failure}

    def __str__(self):
        status = "PASS" if self.passed() else "FAIL"
        out = "{:<22s} {:>7d} {:>6d} {:>11.3e}  {}".format(self.name, self.checked, self.failures,
                                                          self.worst, status)
        if self.first_failure is not None:
            out += "  first failure: " + self.first_failure
        return out


def _pair_error(pair, C, where):
    """Relative difference of the two sides returned by pair(C), inf when the check itself raises"""
    try:
        lhs, rhs = pair(C)
    except MinamiLabError as e:
        logger.warning("Check %s raised at %s: %s", getattr(pair, "__name__", "pair"), where, e)
        return math.inf
    return relative_difference(lhs, rhs)


def run_property_suite(seed, count, dims=range(1, 9), rel_tol=1e-9):
    """
    Checks the Herglotz matrix facts on count random matrices per dimension: -C^-1 stays Herglotz, the
    identity for its imaginary part, the involution, restriction, the Feshbach formula, the cofactor identity,
    det C <= c_nn det C_hat for positive definite C, and exact hermiticity of imag_part.

    Instance k of dimension n uses the seed SeedSequence(seed, spawn_key=(n, k)), which is what gets reported
    for a failure.

    :return: list of PropertyOutcome
    """
    names = ["neg_inverse_herglotz", "neg_inverse_identity", "involution", "restriction", "feshbach",
             "cofactor", "cauchy_step", "imag_part_hermitian"]
    outcomes = dict((name, PropertyOutcome(name, 0.0 if name in ("neg_inverse_herglotz", "restriction",
                                                                  "imag_part_hermitian") else rel_tol))
                    for name in names)

    for n in dims:
        for k in range(count):
            ss = np.random.SeedSequence(seed, spawn_key=(n, k))
            where = "seed={} dim={} index={}".format(seed, n, k)
            C = sample_random_herglotz(n, ss)
            sub_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, k, 1)))

            try:
                N = neg_inverse(C)
                ok = is_herglotz(N)
            except MinamiLabError:
                N, ok = None, False
            outcomes["neg_inverse_herglotz"].record(0.0 if ok else 1.0, ok, where)

            err = _pair_error(neg_inverse_identity, C, where)
            outcomes["neg_inverse_identity"].record(err, err <= rel_tol, where)

            if N is not None:
                err = _pair_error(lambda m: (neg_inverse(m).entries, C.entries), N, where)
            else:
                err = math.inf
            outcomes["involution"].record(err, err <= rel_tol, where)

            size = int(sub_rng.integers(1, n + 1))
            subset = sorted(sub_rng.choice(n, size=size, replace=False).tolist())
            ok = is_herglotz(restrict(C, subset))
            outcomes["restriction"].record(0.0 if ok else 1.0, ok, where)

            if n >= 2:
                err = _pair_error(feshbach_pair, C, where)
                outcomes["feshbach"].record(err, err <= rel_tol, where)

            err = _pair_error(cofactor_ratio_identity, C, where)
            outcomes["cofactor"].record(err, err <= rel_tol, where)

            P = sample_positive_definite(n, np.random.SeedSequence(seed, spawn_key=(n, k, 2)))
            det_c, bound = cauchy_step_pair(P)
            excess = max(0.0, (det_c - bound) / bound)
            outcomes["cauchy_step"].record(excess, excess <= rel_tol, where)

            im = imag_part(C).entries
            ok = np.array_equal(im, im.conj().T)
            outcomes["imag_part_hermitian"].record(0.0 if ok else 1.0, ok, where)

    results = [outcomes[name] for name in names]
    for outcome in results:
        if not outcome.passed():
            logger.warning("Property %s failed %d of %d times, first at %s", outcome.name, outcome.failures,
                           outcome.checked, outcome.first_failure)
    return results
