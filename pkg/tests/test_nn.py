import numpy as np
import pytest

from featad.errors import DataError, DivergenceError
from featad.nn import AdamState, LinearLayer, adam_step, finite_difference_check


def naive_matmul(weight, bias, x):
    # independent triple-loop oracle
    out = [0.0] * len(bias)
    for i in range(len(bias)):
        acc = 0.0
        for j in range(len(x)):
            acc += weight[i][j] * x[j]
        out[i] = acc + bias[i]
    return np.array(out)


def test_identity_forward():
    layer = LinearLayer(np.eye(2), np.zeros(2))
    np.testing.assert_allclose(layer.forward(np.array([1.0, 2.0])), [1.0, 2.0])


def test_zero_weight_forward_returns_bias():
    layer = LinearLayer(np.zeros((1, 1)), np.array([3.0]))
    np.testing.assert_allclose(layer.forward(np.array([9.0])), [3.0])


def test_forward_matches_matmul_oracle():
    rng = np.random.default_rng(0)
    w, b = rng.normal(size=(4, 4)), rng.normal(size=4)
    x = rng.normal(size=4)
    layer = LinearLayer(w, b)
    np.testing.assert_allclose(layer.forward(x), naive_matmul(w, b, x), atol=1e-6)


def test_forward_dimension_mismatch():
    layer = LinearLayer(np.eye(2), np.zeros(2))
    with pytest.raises(DataError):
        layer.forward(np.zeros(3))


def test_backward_zero_upstream():
    layer = LinearLayer(np.eye(3), np.zeros(3))
    out = layer.backward(np.ones(3), np.zeros(3))
    np.testing.assert_allclose(out, np.zeros(3))
    np.testing.assert_allclose(layer.grad_weight, np.zeros((3, 3)))


def test_backward_scalar_chain_rule():
    layer = LinearLayer(np.array([[2.0]]), np.zeros(1))
    out = layer.backward(np.array([3.0]), np.array([1.0]))
    assert layer.grad_weight[0, 0] == 3.0
    assert layer.grad_bias[0] == 1.0
    assert out[0] == 2.0


def test_backward_accumulates():
    layer = LinearLayer(np.array([[1.0]]), np.zeros(1))
    layer.backward(np.array([2.0]), np.array([1.0]))
    layer.backward(np.array([2.0]), np.array([1.0]))
    assert layer.grad_weight[0, 0] == 4.0
    layer.zero_grad()
    assert layer.grad_weight[0, 0] == 0.0


@pytest.mark.parametrize("seed", range(100))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    layer = LinearLayer(rng.normal(size=(5, 3)), rng.normal(size=5))
    x = rng.normal(size=3)
    target = rng.normal(size=5)

    def loss_and_grad(params):
        layer.zero_grad()
        out = layer.forward(x)
        resid = out - target
        layer.backward(x, 2.0 * resid)
        return float(resid @ resid), [g.copy() for g in layer.gradients()]

    report = finite_difference_check(loss_and_grad, layer.parameters(), h=1e-3)
    assert report.max_rel_error < 1e-4
    assert report.nonfinite_evals == 0


def test_adam_zero_gradient_keeps_params():
    state = AdamState(lr=0.1)
    p = np.array([1.0, -2.0])
    adam_step(state, [p], [np.zeros(2)])
    np.testing.assert_allclose(p, [1.0, -2.0])


def test_adam_descends_against_gradient_sign():
    state = AdamState(lr=0.01)
    p = np.array([0.0])
    g_sign = 1.0
    for _ in range(50):
        adam_step(state, [p], [np.array([g_sign])])
    assert p[0] < 0.0  # moved opposite to sign(g)


def test_adam_single_step_bias_corrected():
    # fresh state, g = 1: m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
    state = AdamState(lr=0.1)
    p = np.array([1.0])
    adam_step(state, [p], [np.array([1.0])])
    expected = 1.0 - 0.1 / (1.0 + 1e-8)
    np.testing.assert_allclose(p[0], expected, rtol=1e-12)


def test_adam_deterministic():
    def run():
        state = AdamState(lr=0.05)
        p = np.array([0.3, -0.7])
        for i in range(10):
            adam_step(state, [p], [np.array([0.1 * i, -0.2])])
        return p

    np.testing.assert_array_equal(run(), run())


def test_adam_rejects_nonfinite_gradient():
    state = AdamState(lr=0.1)
    with pytest.raises(DivergenceError, match="theblock"):
        adam_step(state, [np.zeros(1)], [np.array([np.nan])], name="theblock")


def test_finite_difference_check_quadratic():
    p = np.array([0.5, -1.5, 2.0])

    def loss_and_grad(params):
        (q,) = params
        return float(q @ q), [2.0 * q]

    report = finite_difference_check(loss_and_grad, [p], h=1e-4)
    assert report.max_rel_error < 1e-6


def test_finite_difference_check_rejects_bad_h():
    with pytest.raises(DataError):
        finite_difference_check(lambda p: (0.0, [np.zeros(1)]), [np.zeros(1)], h=0.0)
