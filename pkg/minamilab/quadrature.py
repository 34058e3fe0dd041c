import logging
import math

import numpy as np
import scipy.integrate

from minamilab import mlg
from minamilab.common import *
from minamilab.herglotz import as_herglotz, as_matrix, determinant, imag_part, log_det, schur_complement_last, \
    inverse

logger = logging.getLogger(__name__)

MAX_DIMENSION = 4
# Agreement between the two ways of evaluating the integrand
ROUTE_AGREEMENT = 1e-8
# Seeded panel boundaries, in units of the peak width, around the center of each axis
PEAK_OFFSETS = (1.0, 10.0)


class Transform:
    TANGENT = "tangent"
    values = (TANGENT,)


class QuadratureConfig:
    """
    Settings for the nested adaptive quadrature.

    rel_tol: target relative error, in (1e-12, 1e-2)
    max_panels_per_axis: subdivision limit handed to each 1D adaptive rule, at least 8
    transform: how R is compactified. Only the tangent map v = c + s tan(theta) is available
    """

    def __init__(self, rel_tol=1e-7, max_panels_per_axis=2048, transform=Transform.TANGENT):
        if not 1e-12 < rel_tol < 1e-2:
            raise InvalidInputError("rel_tol must be in (1e-12, 1e-2), got {}".format(rel_tol))
        if int(max_panels_per_axis) < 8:
            raise InvalidInputError("max_panels_per_axis must be at least 8")
        if transform not in Transform.values:
            raise InvalidInputError("Unknown transform {}".format(transform))
        self.rel_tol = float(rel_tol)
        self.max_panels_per_axis = int(max_panels_per_axis)
        self.transform = transform

    def __str__(self):
        return "QuadratureConfig{{ rel_tol={:g} max_panels_per_axis={:d} transform={} }}".format(
            self.rel_tol, self.max_panels_per_axis, self.transform)


class IntegralResult:
    def __init__(self, value, est_error, panels_used, converged):
        self.value = float(value)
        self.est_error = float(est_error)
        self.panels_used = int(panels_used)
        self.converged = bool(converged)

    def to_dict(self):
        return {"value": self.value, "est_error": self.est_error, "panels_used": self.panels_used,
                "converged": self.converged}

    def __str__(self):
        return "IntegralResult{{ value={:.15g} est_error={:.3e} panels_used={:d} converged={} }}".format(
            self.value, self.est_error, self.panels_used, self.converged)


class _Tally:
    """Accumulates convergence information over every 1D rule used in a nested integral"""

    def __init__(self):
        self.converged = True
        self.panels = 0

    def add(self, info, converged):
        self.panels = max(self.panels, int(info.get("last", 0)))
        if not converged:
            self.converged = False


def _quad(g, a, b, points, epsrel, limit, tally):
    inside = sorted(set(p for p in points if a < p < b))
    out = scipy.integrate.quad(g, a, b, points=inside if inside else None, epsabs=0.0, epsrel=epsrel,
                               limit=limit, full_output=1)
    # a fourth element is only present when QUADPACK reports a problem
    converged = len(out) == 3
    tally.add(out[2], converged)
    return out[0], out[1]


def tangent_breakpoints(scale, width):
    """
    Panel boundaries in theta for v = c + scale * tan(theta), placed at v = c and c +- {1, 10} * width
    """
    points = [0.0]
    for k in PEAK_OFFSETS:
        t = math.atan(k * width / scale)
        points.extend((-t, t))
    return points


def integrate_line(f, center, scale, width, rel_tol, max_panels, tally=None):
    """
    Integrates f over the real line after the substitution v = center + scale * tan(theta), with the adaptive
    Gauss-Kronrod rule seeded with breakpoints around the center.

    :return: (value, estimated absolute error)
    """
    if tally is None:
        tally = _Tally()

    def g(theta):
        c = math.cos(theta)
        if c < 1e-300:
            return 0.0
        return f(center + scale * math.tan(theta)) * scale / (c * c)

    half = math.pi / 2
    return _quad(g, -half, half, tangent_breakpoints(scale, width), rel_tol, max_panels, tally)


def cauchy_integral_closed(a, b):
    """
    Integral over the real line of 1/|a x + b|^2, which is pi / Im(conj(b) a)

    :raises DomainError: when Im(conj(b) a) <= 0
    """
    a = complex(a)
    b = complex(b)
    im = (b.conjugate() * a).imag
    if not im > 0:
        raise DomainError("Im(conj(b) a) = {} must be positive".format(im))
    return math.pi / im


def quadratic_integral_closed(a, b, c):
    """
    Integral over the real line of 1/(a x^2 + b x + c), which is 2 pi / sqrt(4ac - b^2)

    :raises DomainError: unless a > 0 and 4ac - b^2 > 0
    """
    disc = 4.0 * a * c - b * b
    if not a > 0 or not disc > 0:
        raise DomainError("Need a > 0 and 4ac - b^2 > 0, got a={} discriminant={}".format(a, disc))
    return 2.0 * math.pi / math.sqrt(disc)


def integrate_cauchy(a, b, cfg=None):
    """Numerical counterpart of cauchy_integral_closed"""
    if cfg is None:
        cfg = QuadratureConfig()
    a = complex(a)
    b = complex(b)
    if a == 0:
        raise DomainError("a must be non-zero")
    root = -b / a
    if root.imag == 0:
        raise DomainError("a x + b vanishes on the real line at x={}".format(root.real))
    width = abs(root.imag)
    tally = _Tally()
    value, err = integrate_line(lambda x: 1.0 / abs(a * x + b) ** 2, root.real, width, width, cfg.rel_tol,
                                cfg.max_panels_per_axis, tally)
    return IntegralResult(value, err, tally.panels, tally.converged and err <= cfg.rel_tol * abs(value))


def integrate_quadratic(a, b, c, cfg=None):
    """Numerical counterpart of quadratic_integral_closed"""
    if cfg is None:
        cfg = QuadratureConfig()
    disc = 4.0 * a * c - b * b
    if not a > 0 or not disc > 0:
        raise DomainError("Need a > 0 and 4ac - b^2 > 0, got a={} discriminant={}".format(a, disc))
    center = -b / (2.0 * a)
    width = math.sqrt(disc) / (2.0 * a)
    tally = _Tally()
    value, err = integrate_line(lambda x: 1.0 / (a * x * x + b * x + c), center, width, width, cfg.rel_tol,
                                cfg.max_panels_per_axis, tally)
    return IntegralResult(value, err, tally.panels, tally.converged and err <= cfg.rel_tol * abs(value))


def _log_det_imag_part(A):
    logabs, phase = log_det(imag_part(A))
    if not phase.real > 0:
        raise InvalidInputError("Im A is not positive definite, det Im A has phase {}".format(phase))
    return logabs


def det_imag_part(A):
    """det Im A, positive whenever A is Herglotz"""
    logabs, phase = log_det(imag_part(A))
    with np.errstate(over='ignore'):
        return float(np.exp(logabs)) * phase.real


def minami_integrand(A, v, check=None):
    """
    det(Im[diag(v) - A]^-1), evaluated as det Im A * |det(A - diag(v))|^-2. Both determinants are combined
    as logarithms, so the result only saturates when it is itself out of the floating point range.

    :param A: Herglotz matrix of dimension n
    :param v: real vector of length n
    :param check: If True also evaluate the matrix route and raise InternalInconsistencyError when the two
                  disagree by more than 1e-8 relative. Defaults to the global debug setting.
    :rtype: float
    """
    A = as_herglotz(A)
    v = np.asarray(v, dtype=np.float64).ravel()
    if len(v) != A.n:
        raise InvalidInputError("v has length {} but A is {}x{}".format(len(v), A.n, A.n))
    check_finite(v, "v")
    log_shifted, _ = log_det(A.entries - np.diag(v))
    with np.errstate(over='ignore', under='ignore'):
        value = float(np.exp(_log_det_imag_part(A) - 2.0 * log_shifted))

    if check is None:
        check = mlg.debug_checks
    if check:
        other = float(np.real(determinant(imag_part(inverse(np.diag(v) - A.entries)))))
        if abs(value - other) > ROUTE_AGREEMENT * abs(value):
            raise InternalInconsistencyError("Integrand routes disagree at v={}: {:.15e} vs {:.15e}".format(
                v.tolist(), value, other))
    return value


def _axis_scales(A):
    a = A.entries
    centers = [float(a[i, i].real) for i in range(A.n)]
    scales = [float(a[i, i].imag) for i in range(A.n)]
    return centers, scales


def _last_axis_coefficients(a, prefix):
    """
    det(A - diag(prefix, v)) = d0 - v * d1, linear in v because the determinant is linear in the last row
    """
    n = a.shape[0]
    m = a - np.diag(np.append(prefix, 0.0))
    if n == 1:
        return complex(m[0, 0]), 1.0 + 0j
    return complex(determinant(m)), complex(determinant(m[:-1, :-1]))


def _last_axis_peak(d0, d1, center, scale):
    """Center and width of the Lorentzian in the last variable, its pole is d0 / d1"""
    if d1 == 0:
        return center, scale
    w = d0 / d1
    if not w.imag > 0:
        return center, scale
    return w.real, w.imag


def integrate_minami_nd(A, cfg=None):
    """
    Integrates det(Im[diag(v) - A]^-1) over R^n, 1 <= n <= 4, with nested adaptive Gauss-Kronrod rules. Outer
    axes are mapped with v_i = Re a_ii + Im a_ii tan(theta) and seeded with breakpoints at the peak. The
    innermost axis uses that det(A - diag(v)) is affine in v_n, so only the outer axes pay for determinants,
    and its map is centered on the pole of that affine function.

    The result never exceeds pi^n (up to the quadrature error).

    :param A: Herglotz matrix
    :type cfg: QuadratureConfig
    :rtype: IntegralResult
    """
    A = as_herglotz(A)
    if cfg is None:
        cfg = QuadratureConfig()
    n = A.n
    if n > MAX_DIMENSION:
        raise UnsupportedDimensionError("Quadrature supports n <= {}, got {}".format(MAX_DIMENSION, n))

    a = A.entries
    det_im = det_imag_part(A)
    centers, scales = _axis_scales(A)
    width = A.certified_min_eig
    tally = _Tally()
    # inner rules need to be tighter than the outer one or their noise dominates
    inner_tol = max(cfg.rel_tol / 10.0, 1e-13)

    def level(prefix):
        k = len(prefix)
        tol = cfg.rel_tol if k == 0 else inner_tol
        if k == n - 1:
            d0, d1 = _last_axis_coefficients(a, prefix)
            center, scale = _last_axis_peak(d0, d1, centers[k], scales[k])

            def f(x):
                return det_im / abs(d0 - x * d1) ** 2
            return integrate_line(f, center, scale, min(width, scale), tol, cfg.max_panels_per_axis, tally)

        def f(x):
            return level(prefix + [x])[0]
        return integrate_line(f, centers[k], scales[k], width, tol, cfg.max_panels_per_axis, tally)

    value, err = level([])
    converged = tally.converged and err <= cfg.rel_tol * abs(value)
    if not converged:
        logger.warning("Quadrature for n=%d did not converge: value=%.12g est_error=%.3e", n, value, err)
    logger.debug("n=%d value=%.15g est_error=%.3e panels=%d", n, value, err, tally.panels)
    return IntegralResult(value, err, tally.panels, converged)


def verify_induction_step(A, v_fixed, cfg=None):
    """
    Both sides of the induction step behind the order n bound: integrating the last variable out of
    det(Im[diag(v_fixed, v) - A]^-1) gives at most pi det Im(-B^-1), where B is the Schur complement of the last
    entry of A - diag(v_fixed, 0).

    :param v_fixed: real vector of length n - 1
    :return: (lhs, rhs) with lhs computed by quadrature
    """
    A = as_herglotz(A)
    if cfg is None:
        cfg = QuadratureConfig()
    n = A.n
    if n < 2:
        raise InvalidInputError("The induction step needs n >= 2")
    v_fixed = [float(x) for x in np.asarray(v_fixed, dtype=np.float64).ravel()]
    if len(v_fixed) != n - 1:
        raise InvalidInputError("v_fixed needs {} entries, got {}".format(n - 1, len(v_fixed)))

    a = A.entries
    det_im = det_imag_part(A)
    d0, d1 = _last_axis_coefficients(a, v_fixed)
    centers, scales = _axis_scales(A)
    center, scale = _last_axis_peak(d0, d1, centers[-1], scales[-1])
    tally = _Tally()
    lhs, err = integrate_line(lambda x: det_im / abs(d0 - x * d1) ** 2, center, scale,
                              min(A.certified_min_eig, scale), cfg.rel_tol, cfg.max_panels_per_axis, tally)
    if not tally.converged:
        logger.warning("Induction step quadrature did not converge, est_error=%.3e", err)

    shifted = as_matrix(a - np.diag(np.append(v_fixed, 0.0)))
    b = schur_complement_last(shifted)
    rhs = math.pi * det_imag_part(-inverse(b).entries)
    return lhs, rhs
