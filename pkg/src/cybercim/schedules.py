"""Pump-rate and threshold schedules.

Times are in units of the photon lifetime.  Step ``l`` (1-based) of a run
with time step ``dt`` is evaluated at ``t = l * dt``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "PumpScheduleOpen",
    "PumpScheduleClosed",
    "ThresholdSchedule",
    "pump_open",
    "pump_closed",
    "threshold",
    "pump_sequence",
]


@dataclass(frozen=True)
class PumpScheduleOpen:
    """Quadratic ramp from 0 to ``p_max`` over ``n_step`` steps of ``dt``."""

    p_max: float = 2.0
    n_step: int = 101
    dt: float = 0.1

    def __post_init__(self):
        if self.n_step < 1:
            raise ValidationError(f"must be >= 1, got {self.n_step}", "n_step")
        if not self.dt > 0:
            raise ValidationError(f"must be > 0, got {self.dt}", "dt")


@dataclass(frozen=True)
class PumpScheduleClosed:
    """Sigmoid from ``p_tr - dp`` to ``p_tr + dp`` centred at ``t = 4``."""

    p_tr: float = 1.0
    dp: float = 0.6


@dataclass(frozen=True)
class ThresholdSchedule:
    """Thresholds for the outer iterations of the alternating minimiser.

    :func:`threshold` evaluates the max-ramp formula for iteration ``n``.
    ``order`` decides how the alternating loop consumes those values:
    ``"descending"`` runs them from the last to the first, so the loop starts
    at ``eta_init`` and settles at ``eta_end``; ``"printed"`` runs them in
    formula order (starting at ``eta_end``, ending at ``eta_init``).
    """

    eta_init: float = 0.8
    eta_end: float = 0.18
    n_outer: int = 51
    order: str = "descending"

    def __post_init__(self):
        if self.n_outer < 1:
            raise ValidationError(f"must be >= 1, got {self.n_outer}", "n_outer")
        if self.order not in ("descending", "printed"):
            raise ValidationError(f"must be 'descending' or 'printed', got {self.order!r}", "order")

    @classmethod
    def constant(cls, eta, n_outer):
        return cls(eta, eta, n_outer)

    def values(self):
        """Formula values ``eta(1) .. eta(n_outer)``."""
        return [threshold(n, self) for n in range(1, self.n_outer + 1)]

    def sequence(self):
        """Thresholds ``H_1 .. H_{n_outer}`` in the order the loop uses them."""
        vals = self.values()
        return vals[::-1] if self.order == "descending" else vals


def pump_open(t, sched):
    return sched.p_max * (t / (sched.n_step * sched.dt)) ** 2


def pump_closed(t, sched):
    return sched.p_tr - sched.dp + 2.0 * sched.dp / (1.0 + math.exp(-(t - 4.0) / 2.0))


def threshold(n, sched):
    """``max(eta_init (n-1)/(n_outer-1), eta_end)`` for outer iteration ``n``.

    The ramp term rises from 0 at ``n = 1`` to ``eta_init`` at the last
    iteration.  A single-iteration schedule uses ``eta_init`` as the ramp.
    """
    if not 1 <= n <= sched.n_outer:
        raise ValidationError(f"must lie in [1, {sched.n_outer}], got {n}", "n")
    if sched.n_outer == 1:
        ramp = sched.eta_init
    else:
        ramp = sched.eta_init * (n - 1) / (sched.n_outer - 1)
    return max(ramp, sched.eta_end)


def pump_sequence(fn, sched, n_step, dt):
    """Pump values for steps ``1..n_step`` as a float64 array."""
    return np.array([fn(l * dt, sched) for l in range(1, n_step + 1)], dtype=np.float64)
