"""Elementwise, reduction, shape, and activation primitives."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import ucodec.kernels as K
from gradcheck import assert_grads_match
from ucodec.errors import NumericError, ShapeError


def rand_t(rng, *shape, scale=1.0):
    return K.tensor(rng.standard_normal(shape) * scale, requires_grad=True, dtype=np.float64)


def test_sum_of_squares_grad_closed_form():
    x = K.tensor([1.0, -2.0, 3.0], requires_grad=True, dtype=np.float64)
    with K.Tape() as tape:
        loss = K.sum_(K.square(x))
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, 2.0 * x.data)


def test_backward_rejects_non_scalar():
    x = K.tensor([1.0, 2.0], requires_grad=True)
    with K.Tape() as tape:
        y = K.square(x)
    with pytest.raises(ShapeError):
        tape.backward(y)


def test_taped_forward_equals_untaped_forward():
    rng = np.random.default_rng(0)
    x = K.tensor(rng.standard_normal((4, 5)), requires_grad=True)
    w = K.tensor(rng.standard_normal((5, 3)), requires_grad=True)

    def run():
        return K.tanh(K.matmul(x, w)).data

    untaped = run()
    with K.Tape():
        taped = run()
    np.testing.assert_array_equal(untaped, taped)


def test_tape_visits_ops_in_reverse_execution_order():
    x = K.tensor([2.0], requires_grad=True)
    order = []
    with K.Tape() as tape:
        a = K.square(x)
        b = K.exp(a)
        c = K.sum_(b)
    entries = list(tape._entries)
    assert [id(e[0]) for e in entries] == [id(a), id(b), id(c)]
    tape.backward(c)
    assert x.grad is not None


def test_elu_examples():
    assert K.elu(K.tensor(0.0)).item() == 0.0
    assert abs(K.elu(K.tensor(-20.0, dtype=np.float64)).item() - (math.exp(-20) - 1)) < 1e-8
    x = K.tensor(3.5)
    assert K.elu(x).item() == pytest.approx(3.5)


def test_gelu_matches_quadrature_oracle():
    for v in (-2.0, -1.0, 0.0, 1.0, 2.0):
        cdf, _ = quad(lambda u: math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi), -30.0, v)
        expect = v * cdf
        got = K.gelu(K.tensor(v, dtype=np.float64)).item()
        assert abs(got - expect) < 1e-9


def test_softmax_uniform_logits():
    p = K.softmax(K.tensor(np.full(7, 1.3)))
    np.testing.assert_allclose(p.data, np.full(7, 1.0 / 7.0), rtol=1e-6)


def test_cross_entropy_closed_form():
    loss = K.cross_entropy(K.tensor([0.0, 0.0], dtype=np.float64), 0)
    assert loss.item() == pytest.approx(math.log(2.0), abs=1e-12)


def test_cross_entropy_target_out_of_vocab():
    with pytest.raises(IndexError):
        K.cross_entropy(K.tensor([0.0, 0.0]), 2)


def test_layer_norm_moments():
    rng = np.random.default_rng(1)
    x = K.tensor(rng.standard_normal((6, 16)), dtype=np.float64)
    gamma = K.tensor(np.ones(16))
    beta = K.tensor(np.zeros(16))
    y = K.layer_norm(x, gamma, beta).data
    np.testing.assert_allclose(y.mean(axis=-1), 0.0, atol=1e-5)
    np.testing.assert_allclose(y.var(axis=-1), 1.0, atol=1e-4)


def test_weight_norm_properties():
    rng = np.random.default_rng(2)
    v = K.tensor(rng.standard_normal((4, 3, 5)), dtype=np.float64)
    g = K.tensor(rng.standard_normal(4), dtype=np.float64)

    w = K.weight_norm(v, g).data
    norms = np.sqrt((w ** 2).sum(axis=(1, 2)))
    np.testing.assert_allclose(norms, np.abs(g.data), rtol=1e-6)

    # scale invariance per channel
    v2 = K.tensor(v.data * 3.7)
    np.testing.assert_allclose(K.weight_norm(v2, g).data, w, rtol=1e-10)

    # unit-norm rows with g=1 pass through unchanged
    vu = rng.standard_normal((2, 6))
    vu /= np.linalg.norm(vu, axis=1, keepdims=True)
    wu = K.weight_norm(K.tensor(vu), K.tensor(np.ones(2))).data
    np.testing.assert_allclose(wu, vu, rtol=1e-6)

    with pytest.raises(NumericError):
        K.weight_norm(K.tensor(np.zeros((2, 3))), K.tensor(np.ones(2)))


def test_broadcast_binary_grads():
    rng = np.random.default_rng(3)
    a = rand_t(rng, 3, 1, 4)
    b = rand_t(rng, 5, 1)

    assert_grads_match(lambda: K.sum_(K.square(K.mul(a, b))), [a, b], rtol=1e-6)
    assert_grads_match(lambda: K.sum_(K.square(K.add(a, b))), [a, b], rtol=1e-6)


def test_reduction_and_shape_grads():
    rng = np.random.default_rng(4)
    x = rand_t(rng, 4, 6)

    assert_grads_match(lambda: K.mean(K.exp(K.mul(x, 0.3))), [x], rtol=1e-6)
    assert_grads_match(
        lambda: K.sum_(K.square(K.transpose(K.reshape(x, (2, 12))))), [x], rtol=1e-6
    )
    assert_grads_match(
        lambda: K.sum_(K.square(K.narrow(K.pad1d(x, 2, 1), 1, 1, 5))), [x], rtol=1e-6
    )


def test_concat_and_rows_grads():
    rng = np.random.default_rng(5)
    a = rand_t(rng, 3, 4)
    b = rand_t(rng, 2, 4)
    table = rand_t(rng, 6, 4)
    idx = np.array([0, 3, 3, 5])

    assert_grads_match(lambda: K.sum_(K.square(K.concat([a, b], axis=0))), [a, b], rtol=1e-6)
    assert_grads_match(lambda: K.sum_(K.square(K.rows(table, idx))), [table], rtol=1e-6)
    with pytest.raises(IndexError):
        K.rows(table, np.array([6]))


def test_straight_through_value_and_grad():
    x = K.tensor([1.0, 2.0], requires_grad=True, dtype=np.float64)
    target = np.array([5.0, -1.0])
    with K.Tape() as tape:
        y = K.straight_through(x, target)
        loss = K.sum_(K.mul(y, np.array([2.0, 3.0])))
    np.testing.assert_array_equal(y.data, target)
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, [2.0, 3.0])


def test_stop_gradient_blocks():
    x = K.tensor([1.0, 2.0], requires_grad=True)
    with K.Tape() as tape:
        loss = K.sum_(K.mul(K.stop_gradient(x), x))
    tape.backward(loss)
    np.testing.assert_array_equal(x.grad, x.data)  # only the live factor contributes
