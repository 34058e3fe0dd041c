import copy
import itertools
import math
import numbers
import os

import numpy as np
import scipy.linalg
import scipy.special
from six import string_types

from minamilab.common import *
from minamilab.herglotz import ComplexSquareMatrix, HerglotzMatrix, as_matrix, imag_part, inverse, neg_inverse

# Largest box handled by the dense solver
MAX_SITES = 4096
# Gaussian laws are integrated over +- this many standard deviations
GAUSSIAN_CUTOFF = 10.0


class Boundary:
    OPEN = "open"
    PERIODIC = "periodic"
    values = (OPEN, PERIODIC)


class Gauge:
    LANDAU = "landau"
    values = (LANDAU,)


class PotentialKind:
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    values = (UNIFORM, GAUSSIAN)


class LatticeBox:
    """
    Finite box of Z^d with the given side lengths. Sites are numbered row-major, so in d = 2 the site
    (row, col) has index row * sides[1] + col.
    """

    def __init__(self, dim, sides, boundary=Boundary.OPEN):
        dim = int(dim)
        sides = [int(s) for s in sides]
        if dim < 1:
            raise InvalidConfigError("dim must be at least 1")
        if len(sides) != dim:
            raise InvalidConfigError("sides needs {} entries, got {}".format(dim, len(sides)))
        if any(s < 1 for s in sides):
            raise InvalidConfigError("All sides must be positive, got {}".format(sides))
        if boundary not in Boundary.values:
            raise InvalidConfigError("Unknown boundary '{}'".format(boundary))
        self.dim = dim
        self.sides = sides
        self.boundary = boundary
        self.site_count = int(np.prod(sides))
        if self.site_count > MAX_SITES:
            raise InvalidConfigError("Box has {} sites, at most {} are supported".format(self.site_count, MAX_SITES))

    def index(self, coords):
        coords = [int(c) for c in coords]
        if len(coords) != self.dim or any(c < 0 or c >= s for c, s in zip(coords, self.sides)):
            raise InvalidInputError("Coordinates {} outside of box {}".format(coords, self.sides))
        return int(np.ravel_multi_index(coords, self.sides))

    def coords(self, index):
        if index < 0 or index >= self.site_count:
            raise InvalidInputError("Site {} outside of box with {} sites".format(index, self.site_count))
        return tuple(int(c) for c in np.unravel_index(index, self.sides))

    def bonds(self):
        """
        Nearest neighbor bonds in the positive direction of each axis, as (site, neighbor, axis). Periodic wrap
        bonds are included, self bonds of sides of length 1 are not.
        """
        for index in range(self.site_count):
            c = list(self.coords(index))
            for axis in range(self.dim):
                nxt = c[axis] + 1
                if nxt == self.sides[axis]:
                    if self.boundary == Boundary.OPEN or self.sides[axis] == 1:
                        continue
                    nxt = 0
                other = list(c)
                other[axis] = nxt
                yield index, self.index(other), axis

    def __str__(self):
        return "LatticeBox{{ dim={:d} sides={} boundary={} }}".format(self.dim, self.sides, self.boundary)


class HoppingSpec:
    """
    Nearest neighbor hopping -t exp(i theta) with Landau gauge Peierls phases. In d = 2 the bond from
    (row, col) to (row, col + 1) carries the phase 2 pi flux row and vertical bonds carry none, so every unit
    plaquette encloses flux quanta 'flux'. Other dimensions must have flux = 0.

    With diagonal_shift the diagonal gets + 2 d t so that K = -Laplacian at zero flux.
    """

    def __init__(self, amplitude=1.0, flux=0.0, gauge=Gauge.LANDAU, diagonal_shift=True):
        if not amplitude > 0:
            raise InvalidConfigError("Hopping amplitude must be positive, got {}".format(amplitude))
        if not 0.0 <= flux < 1.0:
            raise InvalidConfigError("flux must be in [0, 1), got {}".format(flux))
        if gauge not in Gauge.values:
            raise InvalidConfigError("Unknown gauge '{}'".format(gauge))
        self.amplitude = float(amplitude)
        self.flux = float(flux)
        self.gauge = gauge
        self.diagonal_shift = bool(diagonal_shift)

    def __str__(self):
        return "HoppingSpec{{ t={:g} flux={:g} gauge={} diagonal_shift={} }}".format(
            self.amplitude, self.flux, self.gauge, self.diagonal_shift)


class PotentialDistribution:
    """
    Single site law of the i.i.d. potential, centered at zero. uniform(W) is uniform on [-W/2, W/2],
    gaussian(sigma) is normal with standard deviation sigma. density_sup is the sup-norm of the density.

    uniform with W = 0 is the point mass at zero. It has no density, density_sup is infinite and it can only
    be used with the crude sampler.
    """

    def __init__(self, kind, param):
        param = float(param)
        if kind == PotentialKind.UNIFORM:
            if param < 0:
                raise InvalidConfigError("Uniform width must be non-negative, got {}".format(param))
            self.density_sup = math.inf if param == 0 else 1.0 / param
        elif kind == PotentialKind.GAUSSIAN:
            if not param > 0:
                raise InvalidConfigError("Gaussian sigma must be positive, got {}".format(param))
            self.density_sup = 1.0 / (param * math.sqrt(2.0 * math.pi))
        else:
            raise InvalidConfigError("Unknown potential kind '{}'".format(kind))
        self.kind = kind
        self.param = param

    def is_point_mass(self):
        return self.kind == PotentialKind.UNIFORM and self.param == 0

    def sample(self, rng, size):
        if self.kind == PotentialKind.UNIFORM:
            return rng.uniform(-self.param / 2, self.param / 2, size=size)
        return rng.normal(0.0, self.param, size=size)

    def pdf(self, v):
        if self.kind == PotentialKind.UNIFORM:
            if self.is_point_mass():
                raise InvalidConfigError("The point mass has no density")
            return self.density_sup if abs(v) <= self.param / 2 else 0.0
        return self.density_sup * math.exp(-0.5 * (v / self.param) ** 2)

    def support(self):
        """Interval that carries the mass for quadrature purposes"""
        if self.kind == PotentialKind.UNIFORM:
            return -self.param / 2, self.param / 2
        return -GAUSSIAN_CUTOFF * self.param, GAUSSIAN_CUTOFF * self.param

    def lorentzian_average(self, x, y):
        """
        Closed form of the integral of rho(v) y / ((v - x)^2 + y^2) over v, for y > 0. Uses arctan for the
        uniform law and the Faddeeva function for the Gaussian one.
        """
        if not y > 0:
            raise DomainError("Lorentzian width must be positive, got {}".format(y))
        if self.kind == PotentialKind.UNIFORM:
            if self.is_point_mass():
                return y / (x * x + y * y)
            half = self.param / 2
            return (math.atan((half - x) / y) - math.atan((-half - x) / y)) / self.param
        s = self.param * math.sqrt(2.0)
        return math.pi * scipy.special.wofz(complex(x, y) / s).real / (self.param * math.sqrt(2.0 * math.pi))

    def to_dict(self):
        return {"kind": self.kind, "param": self.param}

    def __str__(self):
        return "PotentialDistribution{{ kind={} param={:g} density_sup={:g} }}".format(
            self.kind, self.param, self.density_sup)


class SpectralParameter:
    def __init__(self, z):
        z = complex(z)
        if not z.imag > 0:
            raise InvalidConfigError("Spectral parameter needs Im z > 0, got {}".format(z))
        self.z = z

    def __str__(self):
        return "z={:g}{:+g}i".format(self.z.real, self.z.imag)


def _as_z(z):
    if isinstance(z, SpectralParameter):
        return z.z
    return SpectralParameter(z).z


def check_flux_quantization(box, hop):
    if hop.flux == 0:
        return
    if box.dim != 2:
        raise InvalidConfigError("Magnetic flux is only supported in d = 2, got d = {}".format(box.dim))
    if box.boundary == Boundary.PERIODIC:
        quanta = hop.flux * box.sides[0]
        if abs(quanta - round(quanta)) > 1e-9:
            raise InvalidConfigError("Periodic box needs flux * rows to be an integer, got {} * {} = {}".format(
                hop.flux, box.sides[0], quanta))


def build_hamiltonian(box, hop, potential_values):
    """
    H = K + V on the box. K has -t exp(i theta) on nearest neighbor bonds and 2 d t on the diagonal if
    hop.diagonal_shift is set. The strict upper triangle is accumulated and mirrored, so H = H* holds exactly.

    :type box: LatticeBox
    :type hop: HoppingSpec
    :param potential_values: real potential, one value per site
    :rtype: ComplexSquareMatrix
    """
    v = np.asarray(potential_values, dtype=np.float64).ravel()
    if len(v) != box.site_count:
        raise InvalidInputError("Need {} potential values, got {}".format(box.site_count, len(v)))
    check_finite(v, "potential")
    check_flux_quantization(box, hop)

    n = box.site_count
    upper = np.zeros((n, n), dtype=np.complex128)
    t = hop.amplitude
    for site, neighbor, axis in box.bonds():
        phase = 0.0
        if box.dim == 2 and axis == 1:
            phase = 2.0 * math.pi * hop.flux * box.coords(site)[0]
        amplitude = -t * complex(math.cos(phase), math.sin(phase)) if phase != 0.0 else complex(-t, 0.0)
        if site < neighbor:
            upper[site, neighbor] += amplitude
        else:
            upper[neighbor, site] += amplitude.conjugate()

    diag = v + (2.0 * box.dim * t if hop.diagonal_shift else 0.0)
    return ComplexSquareMatrix(upper + upper.conj().T + np.diag(diag))


def plaquette_phase(H, box, row, col):
    """
    Product of hopping phases around the unit plaquette with lower left corner (row, col), traversed
    (row, col) -> (row, col+1) -> (row+1, col+1) -> (row+1, col). Equals exp(2 pi i flux).
    """
    if box.dim != 2:
        raise InvalidInputError("Plaquettes need d = 2")
    rows, cols = box.sides
    if box.boundary == Boundary.OPEN and (row + 1 >= rows or col + 1 >= cols):
        raise InvalidInputError("No plaquette at ({}, {}) in an open {}x{} box".format(row, col, rows, cols))
    corners = [(row, col), (row, (col + 1) % cols), ((row + 1) % rows, (col + 1) % cols), ((row + 1) % rows, col)]
    path = [box.index(c) for c in corners]
    a = as_matrix(H).entries
    product = 1.0 + 0j
    for k in range(4):
        hop = a[path[(k + 1) % 4], path[k]]
        if hop == 0:
            raise InvalidInputError("Plaquette at ({}, {}) has a missing bond".format(row, col))
        # -t on all four bonds, so the signs cancel
        product *= hop / abs(hop)
    return product


def green_block(H, z, sites):
    """
    The sites x sites block of the resolvent (H - z)^-1

    :param H: Hermitian matrix
    :param z: spectral parameter with Im z > 0
    :param sites: ordered distinct site indices
    :rtype: ComplexSquareMatrix
    """
    H = as_matrix(H)
    z = _as_z(z)
    sites = _check_sites(sites, H.n)
    rhs = np.zeros((H.n, len(sites)), dtype=np.complex128)
    rhs[sites, range(len(sites))] = 1.0
    columns = scipy.linalg.solve(H.entries - z * np.eye(H.n), rhs)
    return ComplexSquareMatrix(columns[sites, :])


def _check_sites(sites, count):
    sites = [int(s) for s in sites]
    if len(sites) == 0:
        raise InvalidInputError("Need at least one site")
    if len(set(sites)) != len(sites):
        raise InvalidInputError("Duplicate sites in {}".format(sites))
    if any(s < 0 or s >= count for s in sites):
        raise InvalidInputError("Sites {} outside of 0..{}".format(sites, count - 1))
    return sites


def krein_matrix(box, hop, potential_values, z, sites):
    """
    Herglotz matrix A with -A^-1 equal to the sites block of (H_hat - z)^-1, where H_hat is H with the potential
    at the sites set to zero.

    :rtype: HerglotzMatrix
    """
    sites = _check_sites(sites, box.site_count)
    v_hat = np.array(potential_values, dtype=np.float64).ravel()
    if len(v_hat) != box.site_count:
        raise InvalidInputError("Need {} potential values, got {}".format(box.site_count, len(v_hat)))
    v_hat[sites] = 0.0
    h_hat = build_hamiltonian(box, hop, v_hat)
    m = green_block(h_hat, z, sites)
    try:
        block = HerglotzMatrix(m)
    except InvalidInputError as e:
        raise ConditioningError("Resolvent block lost positivity numerically: {}".format(e))
    return neg_inverse(block)


def krein_consistency(box, hop, potential_values, z, sites):
    """
    Both sides of Krein's formula: Im of the Green's function block, and Im[diag(V_S) - A]^-1 with A from
    krein_matrix.

    :return: (lhs, rhs) as ComplexSquareMatrix
    """
    sites = _check_sites(sites, box.site_count)
    v = np.asarray(potential_values, dtype=np.float64).ravel()
    H = build_hamiltonian(box, hop, v)
    lhs = imag_part(green_block(H, z, sites))
    A = krein_matrix(box, hop, v, z, sites)
    rhs = imag_part(inverse(np.diag(v[sites]) - A.entries))
    return lhs, rhs


class ExperimentConfig:
    """
    Everything needed to draw one disorder sample: box, hopping, potential law, spectral parameter and
    sites. Loaded from the JSON layout

        {"dim": d, "sides": [...], "boundary": "open"|"periodic", "t": real, "flux": real,
         "potential": {"kind": "uniform"|"gaussian", "param": real}, "z": {"re": real, "im": real},
         "sites": [...]}

    with optional "diagonal_shift" (default true) and "sweep" keys. Sites are site indices or coordinate
    lists.
    """

    def __init__(self, source):
        """
        :param source: Path to a JSON file or an already parsed dict
        """
        if isinstance(source, string_types):
            self.path = os.path.abspath(source)
            try:
                data = load_json(source)
            except (IOError, InvalidInputError) as e:
                raise InvalidConfigError("Can't read experiment config: {}".format(e))
        else:
            self.path = None
            data = copy.deepcopy(source)
        if not isinstance(data, dict):
            raise InvalidConfigError("Experiment config must be a JSON object")
        self.data = data
        try:
            self.box = LatticeBox(data["dim"], data["sides"], data.get("boundary", Boundary.OPEN))
            self.hopping = HoppingSpec(data.get("t", 1.0), data.get("flux", 0.0),
                                       diagonal_shift=data.get("diagonal_shift", True))
            potential = data["potential"]
            self.potential = PotentialDistribution(potential["kind"], potential["param"])
            self.z = SpectralParameter(complex(float(data["z"]["re"]), float(data["z"]["im"])))
            sites = [int(s) if isinstance(s, numbers.Integral) and not isinstance(s, bool) else self.box.index(s)
                     for s in data["sites"]]
            self.sites = _check_sites(sites, self.box.site_count)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidConfigError("Malformed experiment config, problem with {}".format(e))
        except InvalidInputError as e:
            raise InvalidConfigError(str(e))
        check_flux_quantization(self.box, self.hopping)

    @property
    def n(self):
        return len(self.sites)

    @staticmethod
    def load(file_name: str):
        return ExperimentConfig(file_name)

    def save(self, file_name: str):
        dump_json(self.to_dict(), file_name)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def with_overrides(self, flux=None, W=None, im_z=None, sites=None):
        """Copy with some parameters replaced, used to walk a sweep grid"""
        data = self.to_dict()
        data.pop("sweep", None)
        if flux is not None:
            data["flux"] = flux
        if W is not None:
            data["potential"] = {"kind": data["potential"]["kind"], "param": W}
        if im_z is not None:
            data["z"] = {"re": data["z"]["re"], "im": im_z}
        if sites is not None:
            data["sites"] = list(sites)
        return ExperimentConfig(data)

    def sweep_points(self):
        """
        Every config of the sweep grid, or just this one if there's no "sweep" key. Axes are iterated in the
        order flux, W, im_z, sites.
        """
        sweep = self.data.get("sweep")
        if not sweep:
            return [self]
        unknown = set(sweep) - {"flux", "W", "im_z", "sites"}
        if unknown:
            raise InvalidConfigError("Unknown sweep keys {}".format(sorted(unknown)))
        axes = [sweep.get("flux", [None]), sweep.get("W", [None]), sweep.get("im_z", [None]),
                sweep.get("sites", [None])]
        return [self.with_overrides(flux, W, im_z, sites) for flux, W, im_z, sites in itertools.product(*axes)]

    def __str__(self):
        return "ExperimentConfig{{ {} {} {} {} sites={} }}".format(self.box, self.hopping, self.potential, self.z,
                                                                   self.sites)
