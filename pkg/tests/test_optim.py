import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dualvd.optim import LrSchedule, OptimizerState, adam_step, cosine_lr, lr_at
from dualvd.tensor import DimensionError


def test_zero_gradient_leaves_params_unchanged():
    p = {"w": np.array([1.0, -2.0])}
    adam_step(p, {"w": np.zeros(2)}, OptimizerState(), 0.1)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_one_bias_corrected_step_by_hand():
    # m = 0.1, v = 0.001; corrected both to 1, so the step is lr / (1 + eps)
    p = {"p": np.array(1.0)}
    state = OptimizerState()
    adam_step(p, {"p": np.array(1.0)}, state, 0.1)
    assert abs(float(p["p"]) - (1.0 - 0.1 / (1.0 + 1e-8))) < 1e-15
    assert abs(float(p["p"]) - 0.9) < 1e-8
    assert state.step == 1


def test_state_shapes_and_step_counter():
    p = {"a": np.zeros((2, 3)), "b": np.zeros(4)}
    state = OptimizerState()
    for k in range(3):
        adam_step(p, {"a": np.ones((2, 3))}, state, 1e-3)
        assert state.step == k + 1
    assert state.m["a"].shape == (2, 3) and state.v["b"].shape == (4,)


def test_shape_mismatch_is_dimension_error():
    with pytest.raises(DimensionError):
        adam_step({"a": np.zeros(2)}, {"a": np.zeros(3)}, OptimizerState(), 0.1)


def test_schedule_reference_values():
    s = LrSchedule()
    assert abs(lr_at(0, s) - 2e-4) <= 1e-12
    assert abs(lr_at(1, s) - 6e-4) <= 1e-12
    assert abs(lr_at(2, s) - 1e-3) <= 1e-12
    assert abs(cosine_lr(s.cosine_epochs / 2, s) - 6.7e-4) <= 1e-12
    assert abs(cosine_lr(s.cosine_epochs, s) - 3.4e-4) <= 1e-12


@pytest.mark.parametrize("epoch", [-1, 16, 100])
def test_epoch_out_of_range(epoch):
    with pytest.raises(ValueError):
        lr_at(epoch, LrSchedule())


@given(st.floats(0, 15.999), st.floats(1e-5, 1e-2), st.floats(0.05, 0.9))
def test_schedule_stays_in_its_band(epoch, eta_max, ratio):
    s = LrSchedule(eta_max=eta_max, eta_min=eta_max * ratio)
    lr = lr_at(epoch, s)
    if epoch < s.warmup_epochs:
        assert s.warmup_factor * eta_max - 1e-18 <= lr <= eta_max + 1e-18
    else:
        assert s.eta_min - 1e-18 <= lr <= eta_max + 1e-18
    assert math.isfinite(lr)
