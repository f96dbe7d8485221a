"""Bit-line MAC and charge-to-pulse converters."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcattn.crossbar import (BitlineCharge, ConverterSpec, bitline_mac,
                             counter_decode, floor_to_grid,
                             relu_charge_to_pulse, relu_transfer,
                             signed_charge_to_pulse, signed_transfer)
from gcattn.device import DeviceModel, GainCellState
from gcattn.signal import PwmPulse

SPEC = ConverterSpec(s_sat=4.0, t_max=15.0, counter_clock_ghz=1.0)


def _cells(volts, now=0):
    return [GainCellState(w=w, written_at=now) for w in volts]


def test_bitline_mac_known_values():
    model = DeviceModel(kind="linear", beta=1.0, tau=float("inf"))
    # frozen: dot of pulse widths with negated stored voltages
    got = bitline_mac([PwmPulse(15.0), PwmPulse(0.0)],
                      _cells([-0.45, 0.3]), model, now=0)
    assert got.s == pytest.approx(6.75)
    got = bitline_mac([PwmPulse(5.0), PwmPulse(10.0), PwmPulse(15.0)],
                      _cells([0.1, -0.2, 0.3]), model, now=0)
    assert got.s == pytest.approx(-3.0)


def test_bitline_mac_length_mismatch():
    model = DeviceModel()
    with pytest.raises(ValueError):
        bitline_mac([PwmPulse(1.0)], _cells([0.1, 0.2]), model, now=0)


def test_bitline_mac_applies_decay():
    model = DeviceModel(kind="linear", beta=1.0, tau=1.0, dt=65e-9)
    charge_now = bitline_mac([PwmPulse(10.0)], _cells([0.4], now=0), model, now=0)
    charge_old = bitline_mac([PwmPulse(10.0)], _cells([0.4], now=0), model, now=1024)
    assert charge_old.s == pytest.approx(charge_now.s * np.exp(-1024 * 65e-9))


def test_relu_transfer_three_regions():
    assert relu_transfer(-3.0, SPEC) == 0.0
    assert relu_transfer(0.0, SPEC) == 0.0
    assert relu_transfer(2.0, SPEC) == pytest.approx(7.5)
    assert relu_transfer(4.0, SPEC) == 15.0
    assert relu_transfer(8.0, SPEC) == 15.0     # exactly t_max, never above


def test_relu_transfer_array():
    s = np.array([-1.0, 1.0, 4.0, 100.0])
    np.testing.assert_allclose(relu_transfer(s, SPEC), [0.0, 3.75, 15.0, 15.0])


def test_signed_transfer_even_magnitude_and_sign():
    width_pos, sign_pos = signed_transfer(2.0, SPEC)
    width_neg, sign_neg = signed_transfer(-2.0, SPEC)
    assert width_pos == width_neg == pytest.approx(7.5)
    assert (sign_pos, sign_neg) == (1, -1)
    _, sign_zero = signed_transfer(0.0, SPEC)
    assert sign_zero == 1


def test_floor_to_grid():
    assert floor_to_grid(7.5, SPEC) == 7.0
    assert floor_to_grid(7.0, SPEC) == 7.0
    half = ConverterSpec(s_sat=4.0, t_max=15.0, counter_clock_ghz=2.0)
    assert floor_to_grid(7.75, half) == 7.5


def test_relu_charge_to_pulse():
    pulse = relu_charge_to_pulse(BitlineCharge(s=2.0), SPEC)
    assert pulse.width == 7.0
    assert relu_charge_to_pulse(100.0, SPEC).width == 15.0


def test_signed_charge_to_pulse_and_decode():
    pulse = signed_charge_to_pulse(-2.0, SPEC)
    assert (pulse.width, pulse.sign) == (7.0, -1)
    assert counter_decode(pulse.width, pulse.sign, SPEC) == -7.0
    with pytest.raises(ValueError):
        counter_decode(7.0, 0, SPEC)
    with pytest.raises(ValueError):
        counter_decode(16.0, 1, SPEC)


@given(st.floats(min_value=-50.0, max_value=50.0),
       st.floats(min_value=-50.0, max_value=50.0))
def test_relu_transfer_monotone(a, b):
    lo, hi = sorted((a, b))
    assert relu_transfer(lo, SPEC) <= relu_transfer(hi, SPEC)


@given(st.floats(min_value=-50.0, max_value=50.0))
def test_signed_decode_antisymmetric(s):
    pos = signed_charge_to_pulse(s, SPEC)
    neg = signed_charge_to_pulse(-s, SPEC)
    d_pos = counter_decode(pos.width, pos.sign, SPEC)
    d_neg = counter_decode(neg.width, neg.sign, SPEC)
    assert d_pos == -d_neg


def test_converter_spec_validation():
    with pytest.raises(ValueError):
        ConverterSpec(s_sat=0.0)
    with pytest.raises(ValueError):
        ConverterSpec(s_sat=1.0, t_max=-1.0)
    with pytest.raises(ValueError):
        ConverterSpec(s_sat=1.0, counter_clock_ghz=0.0)
