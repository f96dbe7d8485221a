"""Gain-cell device model: currents, retention, writes."""

import math

import numpy as np
import pytest

from gcattn.device import (V_SWING, DeviceModel, GainCellState, apply_decay,
                           cell_current, decay_factor, level_voltage,
                           write_cell)
from gcattn.signal import QuantizerSpec

STORED8 = QuantizerSpec(levels=8, lo=-V_SWING, hi=V_SWING)


def test_linear_current_is_negated_voltage():
    model = DeviceModel(kind="linear", beta=1.0)
    assert cell_current(model, 0.3) == -0.3
    assert cell_current(model, -0.45) == 0.45
    np.testing.assert_allclose(cell_current(model, np.array([0.1, -0.2])),
                               [-0.1, 0.2])


def test_linear_current_scales_with_beta():
    model = DeviceModel(kind="linear", beta=2.0)
    assert cell_current(model, 0.2) == pytest.approx(-0.4)


def test_cubic_current_known_value():
    # -(1.0 * w - 0.5 * w^3) at w = 0.3, frozen by hand
    model = DeviceModel(kind="cubic", cubic_coeffs=(1.0, 0.0, -0.5))
    assert cell_current(model, 0.3) == pytest.approx(-0.2865)


def test_closed_gate_draws_nothing():
    model = DeviceModel()
    assert cell_current(model, 0.4, gate_open=False) == 0.0


def test_gain_jitter_multiplies():
    model = DeviceModel(kind="linear", beta=1.0)
    assert cell_current(model, 0.2, gain_jitter=1.5) == pytest.approx(-0.3)
    with pytest.raises(ValueError):
        cell_current(model, 0.2, gain_jitter=-0.1)


def test_device_model_validation():
    with pytest.raises(ValueError):
        DeviceModel(kind="quartic")
    with pytest.raises(ValueError):
        DeviceModel(tau=0.0)
    with pytest.raises(ValueError):
        DeviceModel(dt=-1.0)
    with pytest.raises(ValueError):
        DeviceModel(variability_sigma=-0.5)


def test_decay_factor_closed_form():
    model = DeviceModel(tau=1.0, dt=65e-9)
    # frozen: 1 - exp(-1024 * 65e-9) over a full default window
    assert 1.0 - decay_factor(1024, model) == pytest.approx(6.655778493236397e-05)
    assert decay_factor(0, model) == 1.0
    np.testing.assert_allclose(decay_factor(np.array([0, 1024]), model),
                               [1.0, math.exp(-1024 * 65e-9)])


def test_infinite_tau_never_decays():
    model = DeviceModel(tau=math.inf)
    assert decay_factor(10**9, model) == 1.0


def test_apply_decay_ages_written_cell():
    model = DeviceModel(tau=1.0, dt=65e-9)
    cell = GainCellState(w=0.4, written_at=10)
    aged = apply_decay(cell, now=1034, model=model)
    assert aged.w == pytest.approx(0.4 * math.exp(-1024 * 65e-9))
    assert aged.written_at == 10
    # same instant: no loss
    assert apply_decay(cell, now=10, model=model).w == 0.4


def test_apply_decay_rejects_time_travel():
    model = DeviceModel()
    cell = GainCellState(w=0.1, written_at=5)
    with pytest.raises(ValueError):
        apply_decay(cell, now=4, model=model)


def test_unwritten_cell_passes_through():
    model = DeviceModel()
    blank = GainCellState(w=0.0, written_at=None)
    assert apply_decay(blank, now=100, model=model) is blank


def test_level_voltage_endpoints_and_interior():
    assert level_voltage(0, 8) == -V_SWING
    assert level_voltage(7, 8) == V_SWING     # exactly, top level is pinned
    assert level_voltage(3, 8) == pytest.approx(-0.06428571428571428)
    np.testing.assert_allclose(level_voltage(np.arange(8), 8)[[0, 7]],
                               [-V_SWING, V_SWING])


def test_write_cell_stamps_time_and_level_voltage():
    cell = GainCellState(w=0.0, written_at=None)
    written = write_cell(cell, level=7, spec=STORED8, now=42)
    assert written.w == V_SWING
    assert written.written_at == 42
    with pytest.raises(ValueError):
        write_cell(cell, level=2.5, spec=STORED8, now=0)


def test_state_bounds_enforced():
    with pytest.raises(ValueError):
        GainCellState(w=0.46, written_at=0)
    with pytest.raises(ValueError):
        GainCellState(w=0.1, written_at=None)   # unwritten must hold zero
