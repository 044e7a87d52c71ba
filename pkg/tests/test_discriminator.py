import numpy as np
import pytest

from featad.discriminator import (
    LEAKY_SLOPE,
    Discriminator,
    anomaly_loss,
    bce_loss_and_grad,
    normal_loss,
)
from featad.errors import DataError
from featad.nn import LinearLayer


def zero_disc(c=3):
    return Discriminator(
        [
            LinearLayer(np.zeros((c, c)), np.zeros(c)),
            LinearLayer(np.zeros((c, c)), np.zeros(c)),
            LinearLayer(np.zeros((1, c)), np.zeros(1)),
        ]
    )


def test_zero_network_outputs_half():
    disc = zero_disc()
    assert disc.forward(np.ones(3)) == pytest.approx(0.5)


def test_saturated_bias_drives_output_to_one():
    disc = zero_disc()
    disc.layers[2].bias[0] = 20.0
    assert disc.forward(np.zeros(3)) > 1.0 - 1e-8
    assert disc.forward(np.zeros(3)) < 1.0


def test_forward_matches_composed_oracle():
    rng = np.random.default_rng(0)
    c = 5
    disc = Discriminator.init_normal(c, rng)
    v = rng.normal(size=c)

    def leaky(x):
        return np.where(x > 0, x, LEAKY_SLOPE * x)

    h1 = leaky(disc.layers[0].weight @ v + disc.layers[0].bias)
    h2 = leaky(disc.layers[1].weight @ h1 + disc.layers[1].bias)
    logit = disc.layers[2].weight @ h2 + disc.layers[2].bias
    expected = 1.0 / (1.0 + np.exp(-logit[0]))
    assert disc.forward(v) == pytest.approx(expected, abs=1e-6)


def test_output_in_unit_interval_at_feature_scale():
    rng = np.random.default_rng(1)
    disc = Discriminator.init_normal(4, rng)
    p, _ = disc.forward_batch(rng.normal(size=(200, 4)) * 5)
    assert np.all(p > 0) and np.all(p < 1)


def test_wrong_depth_rejected():
    with pytest.raises(DataError):
        Discriminator([LinearLayer(np.zeros((1, 3)), np.zeros(1))])


def test_normal_loss_at_half_is_ln2():
    disc = zero_disc()
    u = np.random.default_rng(2).normal(size=(7, 3))
    assert normal_loss(disc, u) == pytest.approx(np.log(2.0), abs=1e-12)
    assert anomaly_loss(disc, u) == pytest.approx(np.log(2.0), abs=1e-12)


def test_perfect_confidences_give_clamped_zero_loss():
    # D ~ 0 -> normal loss ~ 0; D ~ 1 -> anomaly loss ~ 0
    loss0, _ = bce_loss_and_grad(np.array([1e-9, 1e-12]), 0)
    assert loss0 == pytest.approx(0.0, abs=1e-6)
    loss1, _ = bce_loss_and_grad(np.array([1.0 - 1e-9]), 1)
    assert loss1 == pytest.approx(0.0, abs=1e-6)


def test_bce_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    p = rng.uniform(0.01, 0.99, size=20)
    loss_n, _ = bce_loss_and_grad(p, 0)
    loss_a, _ = bce_loss_and_grad(p, 1)
    assert loss_n == pytest.approx(np.mean([-np.log(1 - x) for x in p]), rel=1e-12)
    assert loss_a == pytest.approx(np.mean([-np.log(x) for x in p]), rel=1e-12)


def test_saturated_probabilities_have_zero_gradient():
    _, grad = bce_loss_and_grad(np.array([1e-9, 0.5]), 1)
    assert grad[0] == 0.0
    assert grad[1] != 0.0


def test_bce_rejects_other_targets():
    with pytest.raises(DataError):
        bce_loss_and_grad(np.array([0.5]), 2)


def test_shared_parameters_between_invocations():
    # the u-pass and z-pass run through the same layer objects: updating
    # via either path changes both outputs identically
    rng = np.random.default_rng(4)
    disc = Discriminator.init_normal(3, rng)
    v = rng.normal(size=3)
    before_u = disc.forward(v)
    before_z = disc.forward(v)
    assert before_u == before_z
    disc.layers[0].weight += 0.1
    after_u = disc.forward(v)
    after_z = disc.forward(v)
    assert after_u == after_z
    assert after_u != before_u


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(5)
    c = 4
    disc = Discriminator.init_normal(c, rng)
    x = rng.normal(size=(6, c))

    from featad.nn import finite_difference_check

    def loss_and_grad(params):
        disc.zero_grad()
        p, cache = disc.forward_batch(x)
        loss, grad_p = bce_loss_and_grad(p, 1)
        disc.backward_batch(cache, grad_p)
        return loss, [g.copy() for g in disc.gradients()]

    report = finite_difference_check(loss_and_grad, disc.parameters(), h=1e-3)
    assert report.max_rel_error < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    c = 3
    disc = Discriminator.init_normal(c, rng)
    x = rng.normal(size=(2, c))
    p, cache = disc.forward_batch(x)
    loss, grad_p = bce_loss_and_grad(p, 0)
    disc.zero_grad()
    grad_x = disc.backward_batch(cache, grad_p)
    h = 1e-6
    for i in range(x.shape[0]):
        for j in range(c):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            lp, _ = bce_loss_and_grad(disc.forward_batch(xp)[0], 0)
            lm, _ = bce_loss_and_grad(disc.forward_batch(xm)[0], 0)
            assert grad_x[i, j] == pytest.approx((lp - lm) / (2 * h), abs=1e-5)
