import math

import numpy as np

from minamilab.common import *
from minamilab.herglotz import as_herglotz, HerglotzMatrix

# Agreement required between the discriminant route and the nested radical route
FORM_AGREEMENT = 1e-10


class Lemma1Report:
    """
    Closed form evaluation of the integral over v1, v2 of det(Im[diag(v1, v2) - A]^-1) for a 2x2 Herglotz A.

    value = 2 pi^2 det_im_a / sqrt(delta), which never exceeds bound = pi^2. ratio = value / bound.
    """

    def __init__(self, det_im_a, delta, value):
        self.det_im_a = float(det_im_a)
        self.delta = float(delta)
        self.value = float(value)
        self.bound = math.pi ** 2
        self.ratio = self.value / self.bound

    def to_dict(self):
        return {"det_im_a": self.det_im_a, "delta": self.delta, "value": self.value,
                "bound": self.bound, "ratio": self.ratio}

    def __str__(self):
        return "Lemma1Report{{ det_im_a={:.12g} delta={:.12g} value={:.12g} bound={:.12g} ratio={:.12g} }}".format(
            self.det_im_a, self.delta, self.value, self.bound, self.ratio)


def _herglotz_2x2(A):
    A = as_herglotz(A)
    if A.n != 2:
        raise InvalidInputError("Expected a 2x2 matrix, got {}x{}".format(A.n, A.n))
    return A


def _entries(A):
    a = A.entries
    return a[0, 0], a[0, 1], a[1, 0], a[1, 1]


def det_im_2x2(A):
    """
    det Im A = (Im a11)(Im a22) - |a12 - conj(a21)|^2 / 4. Doesn't depend on Re a11 or Re a22.

    :type A: HerglotzMatrix
    :rtype: float
    """
    a11, a12, a21, a22 = _entries(_herglotz_2x2(A))
    return float(a11.imag * a22.imag - 0.25 * abs(a12 - np.conj(a21)) ** 2)


def discriminant_2x2(A):
    """
    Discriminant of the quadratic left after the first integration,
    (2 Im a11 Im a22 + Re(a12 a21))^2 - |a12 a21|^2. The real parts of the diagonal play no role, so they are
    treated as zero. Raises InternalInconsistencyError if the result isn't positive or disagrees with four
    times lemma1_delta_expansion(A).

    :rtype: float
    """
    A = _herglotz_2x2(A)
    a11, a12, a21, a22 = _entries(A)
    # Re a_ii = 0 without loss of generality
    a11 = 1j * a11.imag
    a22 = 1j * a22.imag
    p = a12 * a21
    first = 2.0 * a11.imag * a22.imag + p.real
    delta = first * first - abs(p) ** 2
    if not delta > 0:
        raise InternalInconsistencyError("Discriminant {:.6e} is not positive, the Herglotz certificate "
                                         "{:.3e} is numerically invalid".format(delta, A.certified_min_eig))

    expansion = 4.0 * lemma1_delta_expansion(A)
    scale = first * first + abs(p) ** 2
    if abs(delta - expansion) > FORM_AGREEMENT * scale:
        raise InternalInconsistencyError("Discriminant {:.15e} disagrees with its expansion {:.15e}".format(
            delta, expansion))
    return float(delta)


def lemma1_delta_expansion(A):
    """
    The expression under the root of the closed form:
    det^2 + det (|a12|^2 + |a21|^2) / 2 + (|a12|^2 - |a21|^2)^2 / 16 with det = det Im A.
    """
    a11, a12, a21, a22 = _entries(_herglotz_2x2(A))
    d = det_im_2x2(A)
    s12 = abs(a12) ** 2
    s21 = abs(a21) ** 2
    return float(d * d + 0.5 * d * (s12 + s21) + (s12 - s21) ** 2 / 16.0)


def radical_form_value(A):
    """pi^2 det Im A / sqrt(lemma1_delta_expansion(A)), the nested radical form of the closed form"""
    return math.pi ** 2 * det_im_2x2(A) / math.sqrt(lemma1_delta_expansion(A))


def lemma1_value(A):
    """
    Exact value of the integral of det(Im[diag(v1, v2) - A]^-1) over the plane.

    The value is computed through the discriminant and checked against the nested radical form.

    :param A: 2x2 Herglotz matrix
    :rtype: Lemma1Report
    """
    A = _herglotz_2x2(A)
    det_im = det_im_2x2(A)
    delta = discriminant_2x2(A)
    value = 2.0 * math.pi ** 2 * det_im / math.sqrt(delta)

    other = radical_form_value(A)
    if abs(value - other) > FORM_AGREEMENT * max(abs(value), abs(other)):
        raise InternalInconsistencyError("Discriminant form {:.15e} and radical form {:.15e} disagree".format(
            value, other))
    return Lemma1Report(det_im, delta, value)


def shift_real_diagonal(A, r1, r2):
    """A + diag(r1, r2) for real r1, r2. The result is Herglotz whenever A is."""
    A = _herglotz_2x2(A)
    return HerglotzMatrix(A.entries + np.diag([float(r1), float(r2)]))
