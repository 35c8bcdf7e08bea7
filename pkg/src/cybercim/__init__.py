"""Software coherent Ising machine: open- and closed-loop CIM, Jacobi SOR,
alternating L0 compressed sensing, problem generators and a cycle model."""

from .core import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .kernel import *  # noqa: F401,F403
from .problems import *  # noqa: F401,F403
from .schedules import *  # noqa: F401,F403
from .solvers import *  # noqa: F401,F403
from . import core, errors, formats, kernel, presets, problems, rng, schedules, solvers

__version__ = "0.1.0"
