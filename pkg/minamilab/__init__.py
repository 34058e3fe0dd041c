import os
import sys

# Read the version from a file so that the build script can get the version without importing this file
with open(os.path.join(os.path.dirname(os.path.realpath(__file__)), "version.txt"), "r") as myfile:
    __version__ = myfile.read().strip()


# Class which stores all global variables. This is done because if you import a global the reference is copied.
# As a result if it ever gets modified you're referencing the old object
class MLGlobal:
    max_workers = 1
    debug_checks = False


mlg = MLGlobal()


def init_minamilab(max_workers: int = 1, debug_checks: bool = False):
    """
    Initializes the process wide settings. Called once at import time from the environment and can be called
    again to change them.

    :param max_workers: Upper limit on the number of worker processes used for Monte Carlo sampling
    :type max_workers: int
    :param debug_checks: If True, integrand evaluations cross check both evaluation routes
    :type debug_checks: bool
    """
    global mlg
    set_max_workers(max_workers)
    mlg.debug_checks = bool(debug_checks)


# Used to change the number of worker processes the sampler can use
def set_max_workers(max_workers):
    if int(max_workers) < 1:
        print("max_workers must be at least 1, got {}. Using 1".format(max_workers), file=sys.stderr)
        max_workers = 1
    mlg.max_workers = int(max_workers)


def _env_int(name, default):
    value = os.environ.get(name)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        print("Ignoring {}={!r}, not an integer".format(name, value), file=sys.stderr)
        return default


init_minamilab(max_workers=_env_int('MINAMI_LAB_THREADS', 1),
               debug_checks=os.environ.get('MINAMI_LAB_DEBUG', '0') == '1')

from minamilab.common import *
from minamilab.herglotz import *
from minamilab.lemma import *
from minamilab.quadrature import *
from minamilab.anderson import *
from minamilab.montecarlo import *
