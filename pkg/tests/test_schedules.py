import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cybercim import (
    PumpScheduleClosed,
    PumpScheduleOpen,
    ThresholdSchedule,
    ValidationError,
    pump_closed,
    pump_open,
    pump_sequence,
    threshold,
)


def test_pump_open_points():
    s = PumpScheduleOpen(p_max=2.0, n_step=101, dt=0.1)
    assert pump_open(0.0, s) == 0.0
    assert pump_open(101 * 0.1, s) == pytest.approx(2.0, rel=1e-15)
    assert pump_open(101 * 0.1 / 2, s) == pytest.approx(0.5, rel=1e-15)


def test_pump_closed_points():
    s = PumpScheduleClosed(1.0, 0.6)
    assert pump_closed(4.0, s) == 1.0
    assert pump_closed(100.0, s) == pytest.approx(1.6, abs=1e-6)
    assert pump_closed(0.0, s) == pytest.approx(1 - 0.6 + 1.2 / (1 + math.e**2), rel=1e-15)
    assert pump_closed(0.0, s) == pytest.approx(0.5430, abs=1e-4)


@given(st.floats(0, 50), st.floats(0, 50))
def test_pump_open_monotone(t1, t2):
    s = PumpScheduleOpen(1.5, 51, 0.1)
    lo, hi = sorted((t1, t2))
    assert 0 <= pump_open(lo, s) <= pump_open(hi, s)


@given(st.floats(0, 30), st.floats(0, 30), st.floats(0.01, 2))
def test_pump_closed_bounded_monotone(t1, t2, dp):
    s = PumpScheduleClosed(1.0, dp)
    lo, hi = sorted((t1, t2))
    a, b = pump_closed(lo, s), pump_closed(hi, s)
    assert a <= b
    assert 1 - dp <= a and b <= 1 + dp


def test_threshold_formula():
    s = ThresholdSchedule(0.8, 0.18, 51)
    assert threshold(1, s) == 0.18
    assert threshold(51, s) == 0.8
    assert threshold(26, s) == pytest.approx(0.4)
    # the ramp sits below eta_end for the first few iterations
    assert threshold(12, s) == 0.18
    assert threshold(13, s) == pytest.approx(0.8 * 12 / 50)


def test_threshold_constant_and_single():
    s = ThresholdSchedule.constant(0.3, 11)
    assert s.values() == [0.3] * 11
    assert threshold(1, ThresholdSchedule(0.5, 0.1, 1)) == 0.5


def test_threshold_range_and_order():
    s = ThresholdSchedule(0.8, 0.18, 5)
    with pytest.raises(ValidationError):
        threshold(0, s)
    with pytest.raises(ValidationError):
        threshold(6, s)
    with pytest.raises(ValidationError):
        ThresholdSchedule(0.8, 0.18, 0)
    with pytest.raises(ValidationError):
        ThresholdSchedule(order="sideways")
    assert s.sequence() == s.values()[::-1]
    assert ThresholdSchedule(0.8, 0.18, 5, order="printed").sequence() == s.values()


def test_pump_sequence_uses_step_times():
    s = PumpScheduleOpen(2.0, 10, 0.5)
    seq = pump_sequence(pump_open, s, 10, 0.5)
    assert seq.dtype == np.float64
    assert seq[0] == pump_open(0.5, s)
    assert seq[-1] == 2.0
