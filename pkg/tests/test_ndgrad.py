import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from djscc.ndgrad import (AdamState, ShapeError, Tape, Tensor, adam_step, avg_pool2d, backward,
                          channel_norm, concat, conv2d, conv2d_transpose, layer_norm, matmul,
                          ops, relu, softmax)
from oracles import numerical_grad, rel_error


def param(arr):
    return Tensor(np.array(arr, dtype=np.float64), requires_grad=True)


def grad_of(build, *params):
    with Tape() as tape:
        loss = build()
    backward(loss, tape, list(params))
    return [p.grad for p in params]


def check_gradients(build, params, tol):
    analytic = grad_of(build, *params)
    for p, g in zip(params, analytic):
        fd = numerical_grad(lambda: build().item(), p.data)
        assert rel_error(g, fd) < tol


# ------------------------------------------------------------------ matmul

def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), a).data, a)


def test_matmul_hand_value():
    assert matmul([[1.0, 2.0]], [[3.0], [4.0]]).data.tolist() == [[11.0]]


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_gradient(rng):
    a, b = param(rng.standard_normal((3, 3))), param(rng.standard_normal((3, 3)))
    check_gradients(lambda: ops.sum(matmul(a, b)), [a, b], 1e-6)


def test_batched_matmul_broadcast_gradient(rng):
    a, w = param(rng.standard_normal((2, 4, 3))), param(rng.standard_normal((3, 5)))
    check_gradients(lambda: ops.sum(ops.mul(matmul(a, w), matmul(a, w))), [a, w], 1e-6)


# ------------------------------------------------------------------ conv

def test_conv_identity_kernel(rng):
    x = rng.standard_normal((3, 5, 6))
    k = np.zeros((3, 3, 1, 1))
    k[np.arange(3), np.arange(3)] = 1.0
    np.testing.assert_array_equal(conv2d(x, k).data, x)


def test_conv_all_ones_overlap_counts():
    out = conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)), stride=1, padding=1).data[0]
    assert out[1, 1] == 9
    assert out[0, 0] == out[0, 2] == out[2, 0] == out[2, 2] == 4


def test_conv_stride_two_halves_extent(rng):
    assert conv2d(rng.random((2, 8, 12)), rng.random((4, 2, 5, 5)), stride=2).shape == (4, 4, 6)


def test_conv_rejects_odd_extent_at_stride_two(rng):
    with pytest.raises(ShapeError):
        conv2d(rng.random((2, 7, 8)), rng.random((4, 2, 3, 3)), stride=2)


def test_conv_rejects_channel_mismatch(rng):
    with pytest.raises(ShapeError):
        conv2d(rng.random((3, 8, 8)), rng.random((4, 2, 3, 3)))


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_gradient(rng, stride):
    x, k = param(rng.standard_normal((2, 4, 4))), param(rng.standard_normal((3, 2, 3, 3)))
    bias = param(rng.standard_normal(3))
    check_gradients(lambda: ops.sum(ops.power(conv2d(x, k, stride, bias=bias), 2.0)), [x, k, bias], 1e-5)


def test_conv_transpose_identity_and_shape(rng):
    x = rng.standard_normal((2, 3, 4))
    k = np.zeros((2, 2, 1, 1))
    k[0, 0] = k[1, 1] = 1.0
    np.testing.assert_array_equal(conv2d_transpose(x, k, 1).data, x)
    down = conv2d(rng.random((3, 8, 8)), rng.random((4, 3, 5, 5)), stride=2)
    assert conv2d_transpose(down, rng.random((4, 3, 5, 5)), stride=2).shape == (3, 8, 8)


@pytest.mark.parametrize("stride,k", [(1, 3), (2, 3), (2, 5), (2, 1)])
def test_conv_transpose_is_adjoint(rng, stride, k):
    x = rng.standard_normal((2, 3, 8, 6))
    w = rng.standard_normal((4, 3, k, k))
    y = rng.standard_normal((2, 4, 8 // stride, 6 // stride))
    lhs = np.sum(conv2d(x, w, stride).data * y)
    rhs = np.sum(x * conv2d_transpose(y, w, stride).data)
    assert abs(lhs - rhs) / abs(lhs) < 1e-10


def test_conv_transpose_gradient(rng):
    x, k = param(rng.standard_normal((1, 2, 3, 3))), param(rng.standard_normal((2, 3, 3, 3)))
    bias = param(rng.standard_normal(3))
    check_gradients(lambda: ops.sum(ops.power(conv2d_transpose(x, k, 2, bias=bias), 2.0)),
                    [x, k, bias], 1e-5)


def test_avg_pool_gradient(rng):
    x = param(rng.standard_normal((1, 2, 5, 6)))
    assert avg_pool2d(x).shape == (1, 2, 2, 3)
    check_gradients(lambda: ops.sum(ops.power(avg_pool2d(x), 2.0)), [x], 1e-6)


# ------------------------------------------------------------------ softmax

def test_softmax_uniform():
    np.testing.assert_allclose(softmax(np.zeros(3)).data, [1 / 3] * 3, atol=1e-15)


def test_softmax_log_values():
    np.testing.assert_allclose(softmax(np.log([1.0, 2.0, 3.0])).data, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)


def test_softmax_shift_invariant_and_large_inputs(rng):
    a = rng.standard_normal((4, 5))
    assert np.max(np.abs(softmax(a + 7.5).data - softmax(a).data)) < 1e-12
    big = softmax(np.array([1000.0, 1001.0, 999.0])).data
    assert np.all(np.isfinite(big)) and abs(big.sum() - 1) < 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(-50, 50)), st.integers(0, 1))
def test_softmax_is_probability_vector(a, axis):
    out = softmax(a, axis=axis).data
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=axis), 1.0, atol=1e-6)


def test_softmax_gradient(rng):
    a = param(rng.standard_normal((3, 4)))
    w = rng.standard_normal((3, 4))
    check_gradients(lambda: ops.sum(ops.mul(softmax(a, axis=0), w)), [a], 1e-6)


# ------------------------------------------------------------------ norms

def unit(c):
    return np.ones(c), np.zeros(c)


def test_layer_norm_constant_row():
    np.testing.assert_array_equal(layer_norm(np.full((1, 4), 5.0), *unit(4)).data, np.zeros((1, 4)))


def test_layer_norm_two_values():
    np.testing.assert_allclose(layer_norm(np.array([[1.0, 3.0]]), *unit(2)).data, [[-1, 1]], atol=1e-4)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 8)),
              elements=st.floats(-100, 100)))
def test_layer_norm_moments(a):
    spread = a.max(axis=-1) - a.min(axis=-1)
    out = layer_norm(a, *unit(a.shape[-1])).data
    assert np.all(np.abs(out.mean(axis=-1)) < 1e-6)
    ok = spread > 1.0  # variance >> eps
    np.testing.assert_allclose(out.var(axis=-1)[ok], 1.0, atol=1e-4)


def test_layer_norm_gradient(rng):
    a = param(rng.standard_normal((3, 5)))
    g, b = param(rng.standard_normal(5)), param(rng.standard_normal(5))
    w = rng.standard_normal((3, 5))
    check_gradients(lambda: ops.sum(ops.mul(layer_norm(a, g, b), w)), [a, g, b], 1e-5)


def test_channel_norm_single_channel_is_zero(rng):
    np.testing.assert_array_equal(channel_norm(rng.random((1, 3, 3)), *unit(1)).data, np.zeros((1, 3, 3)))


def test_channel_norm_two_channels():
    x = np.array([[[2.0]], [[4.0]]])
    out = channel_norm(x, *unit(2)).data
    np.testing.assert_allclose(out[:, 0, 0], [-1, 1], atol=1e-4)
    assert out.shape == x.shape


def test_channel_norm_moments_per_position(rng):
    x = rng.standard_normal((2, 6, 4, 5)) * 3 + 1
    out = channel_norm(x, *unit(6)).data
    assert np.all(np.abs(out.mean(axis=1)) < 1e-6)
    np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)


def test_channel_norm_gradient(rng):
    a = param(rng.standard_normal((2, 3, 2, 2)))
    g, b = param(rng.standard_normal(3)), param(rng.standard_normal(3))
    w = rng.standard_normal((2, 3, 2, 2))
    check_gradients(lambda: ops.sum(ops.mul(channel_norm(a, g, b), w)), [a, g, b], 1e-5)


# ------------------------------------------------------------------ elementwise

def test_relu_values():
    assert relu(np.array([-1.0, 0.0, 2.0])).data.tolist() == [0, 0, 2]


def test_relu_subgradient_at_zero_is_zero():
    p = param([0.0, 1.0])
    (g,) = grad_of(lambda: ops.sum(relu(p)), p)
    assert g.tolist() == [0.0, 1.0]


def test_concat_token_shape(rng):
    assert concat([rng.random((1, 4)), rng.random((6, 4))], axis=0).shape == (7, 4)
    with pytest.raises(ShapeError):
        concat([rng.random((1, 3)), rng.random((6, 4))], axis=0)


def test_add_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.add(np.ones((2, 3)), np.ones((3, 2)))


def test_mean_relu_gradient(rng):
    x = rng.standard_normal(20)
    x[np.abs(x) < 1e-3] = 0.5
    p = param(x)
    check_gradients(lambda: ops.mean(relu(p)), [p], 1e-5)


def test_elementwise_family_gradients(rng):
    a = param(rng.uniform(0.5, 2.0, (3, 4)))
    b = param(rng.uniform(0.5, 2.0, (1, 4)))

    def build():
        t = ops.add(ops.div(a, b), ops.sigmoid(ops.sub(a, b)))
        t = ops.mul(t, ops.sqrt(a))
        t = ops.concat([t, ops.exp(ops.scale(b, 0.3))], axis=0)
        t = ops.transpose(ops.reshape(t, (2, 2, 4)), (2, 0, 1))
        return ops.sum(ops.log(ops.getitem(t, (slice(1, 3), slice(None), 0))))

    check_gradients(build, [a, b], 1e-6)


def test_take_gradient_accumulates_repeats(rng):
    table = param(rng.standard_normal((4, 3)))
    (g,) = grad_of(lambda: ops.sum(ops.take(table, [0, 2, 0])), table)
    np.testing.assert_array_equal(g, [[2] * 3, [0] * 3, [1] * 3, [0] * 3])


# ------------------------------------------------------------------ backward

def test_backward_sum_gives_ones(rng):
    p = param(rng.standard_normal((2, 3)))
    (g,) = grad_of(lambda: ops.sum(p), p)
    np.testing.assert_array_equal(g, np.ones((2, 3)))


def test_backward_square():
    p = param([1.0, 2.0, 3.0])
    (g,) = grad_of(lambda: ops.sum(ops.mul(p, p)), p)
    np.testing.assert_array_equal(g, [2.0, 4.0, 6.0])


def test_backward_unreachable_gets_zero():
    p, q = param([1.0, 2.0]), param([[5.0]])
    with Tape() as tape:
        loss = ops.sum(p)
    backward(loss, tape, [p, q])
    np.testing.assert_array_equal(q.grad, [[0.0]])


def test_backward_rejects_non_scalar():
    p = param([1.0, 2.0])
    with Tape() as tape:
        out = ops.scale(p, 2.0)
    with pytest.raises(ShapeError):
        backward(out, tape)


def test_tape_records_in_order_and_clears():
    p = param([1.0])
    with Tape() as tape:
        ops.sum(ops.relu(ops.scale(p, 2.0)))
    assert [n.label for n in tape.nodes] == ["scale", "relu", "sum"]
    tape.clear()
    assert len(tape) == 0


def test_no_tape_records_nothing():
    p = param([1.0])
    out = ops.scale(p, 2.0)
    assert not out.requires_grad


def test_backward_is_deterministic(rng):
    x, k = param(rng.standard_normal((2, 3, 4, 4))), param(rng.standard_normal((5, 3, 3, 3)))
    g1 = grad_of(lambda: ops.sum(ops.relu(conv2d(x, k))), x, k)
    g2 = grad_of(lambda: ops.sum(ops.relu(conv2d(x, k))), x, k)
    for a, b in zip(g1, g2):
        np.testing.assert_array_equal(a, b)


# ------------------------------------------------------------------ adam

def test_adam_zero_gradient_keeps_params():
    p = {"w": param([1.0, -2.0])}
    st_ = AdamState()
    adam_step(p, {"w": np.zeros(2)}, st_, lr=0.1)
    np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
    assert st_.step == 1


def test_adam_first_step_is_signed_lr():
    p = {"w": param([0.0, 0.0, 0.0])}
    g = np.array([3.0, -0.5, 1e-2])
    adam_step(p, {"w": g}, AdamState(), lr=1e-3)
    np.testing.assert_allclose(p["w"].data, -1e-3 * np.sign(g), rtol=1e-5)


def test_adam_two_step_hand_trace():
    lr, b1, b2, eps, g, p0 = 0.01, 0.9, 0.999, 1e-8, 0.25, 1.5
    # step 1
    m = (1 - b1) * g
    v = (1 - b2) * g * g
    p1 = p0 - lr * (m / (1 - b1)) / ((v / (1 - b2)) ** 0.5 + eps)
    # step 2
    m = b1 * m + (1 - b1) * g
    v = b2 * v + (1 - b2) * g * g
    p2 = p1 - lr * (m / (1 - b1 ** 2)) / ((v / (1 - b2 ** 2)) ** 0.5 + eps)
    p = {"w": param([p0])}
    state = AdamState()
    adam_step(p, {"w": np.array([g])}, state, lr, b1, b2, eps)
    adam_step(p, {"w": np.array([g])}, state, lr, b1, b2, eps)
    assert abs(p["w"].data[0] - p2) < 1e-12
    assert state.step == 2


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        adam_step({"w": param([1.0, 2.0])}, {"w": np.zeros(3)}, AdamState(), lr=0.1)
