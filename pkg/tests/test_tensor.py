import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from dualvd.gradcheck import grad_check
from dualvd.tensor import (
    DimensionError, Tape, Tensor, concat, embedding, linear, log_softmax, lstm, reshape,
    sigmoid, softmax, softmax_np, tanh,
)

finite = st.floats(-30, 30, allow_nan=False, allow_infinity=False)


def test_softmax_uniform_for_equal_logits():
    np.testing.assert_allclose(softmax_np(np.zeros(3)), [1 / 3] * 3, rtol=0, atol=1e-15)


@given(finite)
def test_softmax_singleton(x):
    assert softmax_np(np.array([x]))[0] == 1.0


def test_softmax_known_values_against_extended_precision():
    expected = oracles.softmax_mp([1, 2, 3])
    np.testing.assert_allclose(expected, [0.09003057, 0.24472847, 0.66524096], atol=5e-9)
    np.testing.assert_allclose(softmax_np(np.array([1.0, 2.0, 3.0])), expected, rtol=0, atol=1e-15)


def test_softmax_empty_is_dimension_error():
    with pytest.raises(DimensionError):
        softmax_np(np.array([]))


@given(hnp.arrays(np.float64, st.integers(1, 12), elements=finite), finite)
def test_softmax_sums_to_one_and_is_shift_invariant(x, c):
    p = softmax_np(x)
    assert abs(p.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(softmax_np(x + c), p, rtol=0, atol=1e-12)


@given(hnp.arrays(np.float64, st.integers(1, 20), elements=st.floats(-700, 700)))
def test_sigmoid_strictly_inside_unit_interval(x):
    s = sigmoid(Tensor(x)).data
    assert np.all(s > 0) and np.all(s < 1)


def test_sigmoid_zero_is_half():
    assert sigmoid(Tensor(np.zeros(1))).data[0] == 0.5


def test_backward_populates_grad_with_matching_shapes():
    with Tape():
        a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        b = Tensor(np.ones(3), requires_grad=True)
        unused = Tensor(np.ones((4, 1)), requires_grad=True)
        out = ((a * b) + b).sum()
        out.backward()
    assert a.grad.shape == a.shape and b.grad.shape == b.shape
    np.testing.assert_array_equal(a.grad, np.ones((2, 3)))
    np.testing.assert_array_equal(b.grad, a.data.sum(0) + 2)
    np.testing.assert_array_equal(unused.grad, np.zeros((4, 1)))


def test_no_tape_means_no_tracking():
    a = Tensor(np.ones(2), requires_grad=True)
    out = (a * a).sum()
    with pytest.raises(RuntimeError):
        out.backward()


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_embedding_pad_row_gets_no_gradient():
    table = np.arange(12.0).reshape(4, 3)
    with Tape():
        T = Tensor(table, requires_grad=True)
        out = embedding(T, np.array([[0, 2, 2, 1]]))
        (out * Tensor(np.ones((1, 4, 3)))).sum().backward()
    np.testing.assert_array_equal(T.grad[0], 0.0)
    np.testing.assert_array_equal(T.grad[2], 2.0)


def _lstm_scalar_params():
    w = {"i": (0.5, -0.3), "f": (0.8, 0.2), "g": (-1.1, 0.7), "o": (0.4, 0.9)}
    b = {"i": 0.1, "f": 1.0, "g": -0.2, "o": 0.3}
    W = np.array([w[g] for g in "ifgo"])
    B = np.array([b[g] for g in "ifgo"])
    return w, b, W, B


def test_lstm_one_step_hand_oracle():
    w, b, W, B = _lstm_scalar_params()
    x = 0.5
    # pencil: i = s(0.35), g = tanh(-0.75), o = s(0.5); c = i g; h = o tanh(c)
    i = 1 / (1 + np.exp(-0.35))
    g = np.tanh(-0.75)
    o = 1 / (1 + np.exp(-0.5))
    hand = o * np.tanh(i * g)
    out = lstm(Tensor(np.array([[[x]]])), np.array([[True]]), Tensor(W), Tensor(B)).data
    assert out.shape == (1, 1)
    assert abs(out[0, 0] - hand) < 1e-15
    assert abs(hand - oracles.lstm_scalar([x], w, b)) < 1e-15


def test_lstm_masked_steps_keep_state():
    w, b, W, B = _lstm_scalar_params()
    xs = np.array([[[0.5], [-1.0], [9.0]], [[0.5], [-1.0], [0.0]]])
    mask = np.array([[True, True, False], [True, True, False]])
    out = lstm(Tensor(xs), mask, Tensor(W), Tensor(B)).data
    ref = oracles.lstm_scalar([0.5, -1.0], w, b)
    np.testing.assert_allclose(out[:, 0], [ref, ref], rtol=0, atol=1e-14)


def test_lstm_all_zero_weights_give_zero():
    out = lstm(Tensor(np.ones((2, 3, 4))), np.ones((2, 3), bool), Tensor(np.zeros((20, 9))), Tensor(np.zeros(20)))
    np.testing.assert_array_equal(out.data, 0.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_primitive_gradients(seed):
    rng = np.random.default_rng(seed)
    point = {
        "x": rng.standard_normal((2, 3, 4)), "W": rng.standard_normal((5, 4)), "b": rng.standard_normal(5),
        "y": rng.standard_normal((2, 3, 5)),
        "Wl": rng.standard_normal((8, 4)), "bl": rng.standard_normal(8), "E": rng.standard_normal((6, 4)),
    }
    ids = np.array([[1, 2, 0], [3, 5, 4]])
    mask = ids != 0

    def f(T):
        h = linear(T["x"], T["W"], T["b"])
        a = softmax(h, axis=-1) * T["y"] + tanh(h) * sigmoid(T["y"])
        z = log_softmax(reshape(a, (2, 15)), axis=-1)
        c = concat([T["x"], a], axis=-1)[:, 1:, ::2]
        e = embedding(T["E"], ids)[..., :2]
        r = lstm(e, mask, T["Wl"], T["bl"])
        return z.sum() + (c * c).mean() + (r * r).sum() + (T["x"].swapaxes(0, 1) @ T["W"].swapaxes(0, 1)).sum()

    assert grad_check(f, point) < 1e-7


@given(st.integers(0, 2**32 - 1))
def test_tape_replay_is_bit_identical(seed):
    rng = np.random.default_rng(seed)
    x, W = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))

    def run():
        with Tape():
            tw = Tensor(W, requires_grad=True)
            (softmax(linear(Tensor(x), tw), axis=-1) * Tensor(x[:, :2])).sum().backward()
        return tw.grad

    assert run().tobytes() == run().tobytes()
