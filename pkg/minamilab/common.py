import json
import math
import numbers

import numpy as np


class MinamiLabError(RuntimeError):
    """Base class for every error raised by minamilab"""
    pass


class InvalidInputError(MinamiLabError):
    """
    Input which violates an operation's preconditions: non-finite or ragged matrices, bad index sets, wrong
    shapes. When raised by the Herglotz gate, min_eig holds the smallest eigenvalue of the imaginary part.
    """
    def __init__(self, message, min_eig=None):
        MinamiLabError.__init__(self, message)
        self.min_eig = min_eig


class ConditioningError(MinamiLabError):
    pass


class SingularPivotError(MinamiLabError):
    pass


class SingularMatrixError(MinamiLabError):
    pass


class DomainError(MinamiLabError):
    """A closed form integral was requested outside of the region where it converges"""
    pass


class InternalInconsistencyError(MinamiLabError):
    """Two mathematically equal quantities disagreed numerically, or a quantity had the impossible sign"""
    pass


class UnsupportedDimensionError(MinamiLabError):
    pass


class InvalidConfigError(MinamiLabError):
    pass


class QuadratureFailure(MinamiLabError):
    pass


class EstimationFailedError(MinamiLabError):
    pass


# Relative tolerances used across modules
CONDITION_LIMIT = 1e12
STRICTNESS_FACTOR = 1e-12


def relative_difference(found, expected):
    """
    |found - expected| / max(|expected|, tiny). Works for scalars and arrays, arrays use the Frobenius norm.
    """
    if isinstance(found, numbers.Number) and isinstance(expected, numbers.Number):
        scale = abs(expected)
        diff = abs(found - expected)
    else:
        scale = float(np.linalg.norm(np.asarray(expected)))
        diff = float(np.linalg.norm(np.asarray(found) - np.asarray(expected)))
    if scale == 0.0:
        return diff
    return diff / scale


def check_finite(value, name="value"):
    if isinstance(value, numbers.Number):
        if not math.isfinite(abs(value)):
            raise InvalidInputError("{} must be finite, got {}".format(name, value))
    elif not np.all(np.isfinite(np.asarray(value))):
        raise InvalidInputError("{} has non-finite entries".format(name))
    return value


def dump_json(data, path):
    """Writes JSON with sorted keys so identical data produces identical bytes"""
    with open(path, "w") as f:
        f.write(to_json_text(data))


def to_json_text(data):
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def load_json(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except ValueError as e:
        raise InvalidInputError("Can't parse JSON in {}: {}".format(path, e))
