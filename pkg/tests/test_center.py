import numpy as np
import pytest

from featad.aggregation import FeatureMap
from featad.center import (
    Projector,
    average_center,
    center_loss,
    center_loss_grad,
    init_center,
    nearest_center,
    nearest_center_vectors,
    project,
)
from featad.errors import DataError
from featad.nn import LinearLayer, finite_difference_check


def fmap(grid, role="dispersed"):
    return FeatureMap(np.asarray(grid, dtype=float), role=role)


def test_average_center_constants():
    a = fmap(np.zeros((2, 2, 3)))
    b = fmap(np.full((2, 2, 3), 2.0))
    np.testing.assert_allclose(average_center([a, b]), 1.0)


def test_average_center_single_map_identity():
    grid = np.random.default_rng(0).normal(size=(3, 3, 2))
    np.testing.assert_array_equal(average_center([fmap(grid)]), grid)


def test_average_center_matches_scalar_oracle():
    rng = np.random.default_rng(1)
    grids = [rng.normal(size=(2, 3, 4)) for _ in range(3)]
    got = average_center([fmap(g) for g in grids])
    for h in range(2):
        for w in range(3):
            for c in range(4):
                expected = (grids[0][h, w, c] + grids[1][h, w, c] + grids[2][h, w, c]) / 3.0
                assert got[h, w, c] == pytest.approx(expected, abs=1e-6)


def test_average_center_shape_mismatch():
    with pytest.raises(DataError):
        average_center([fmap(np.zeros((2, 2, 1))), fmap(np.zeros((2, 3, 1)))])


def test_nearest_center_basic():
    center = np.array([[[1.0, 0.0], [5.0, 5.0]]])  # 1x2 grid of 2-dim vectors
    assign = nearest_center_vectors(np.array([[0.0, 0.0]]), center)
    assert assign.indices[0] == 0
    assert assign.distances[0] == pytest.approx(1.0)


def test_nearest_center_exact_match_distance_zero():
    rng = np.random.default_rng(2)
    center = rng.normal(size=(2, 3, 4))
    q = center[1, 2].copy()
    assign = nearest_center_vectors(q[None, :], center)
    assert assign.indices[0] == 1 * 3 + 2
    assert assign.distances[0] == 0.0


def test_nearest_center_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    center = rng.normal(size=(3, 3, 5))
    queries = rng.normal(size=(16, 5))
    assign = nearest_center_vectors(queries, center)
    flat = center.reshape(-1, 5)
    for qi, q in enumerate(queries):
        best_idx, best_d = None, np.inf
        for ci, c in enumerate(flat):
            d = float(np.sqrt(np.sum((q - c) ** 2)))
            if d < best_d:
                best_idx, best_d = ci, d
        assert assign.indices[qi] == best_idx
        assert assign.distances[qi] == pytest.approx(best_d, rel=1e-9)


def test_nearest_center_tie_breaks_to_smallest_index():
    v = np.array([2.0, -1.0])
    center = np.stack([v, v])[None, :, :]  # duplicate center vectors
    assign = nearest_center_vectors(np.array([[2.5, -1.0]]), center)
    assert assign.indices[0] == 0


def test_nearest_center_via_feature_map():
    grid = np.zeros((2, 2, 3))
    center = np.ones((1, 1, 3))
    assign = nearest_center(fmap(grid, role="projected"), center)
    assert assign.indices.shape == (2, 2)
    assert assign.distances[0, 0] == pytest.approx(np.sqrt(3.0))


def frozen_projector(c, seed=0):
    return Projector.init_normal(c, np.random.default_rng(seed))


def test_init_center_single_batch_is_projected_mean():
    rng = np.random.default_rng(4)
    batch = rng.normal(size=(5, 2, 2, 3))
    proj = frozen_projector(3)
    center = init_center([batch], proj, beta=0.1)
    np.testing.assert_allclose(center, proj.apply(batch).mean(axis=0))


def test_init_center_beta_one_jumps_to_query():
    # identity projector, far-apart center vectors so matching is 1:1
    proj = Projector(LinearLayer(np.eye(1), np.zeros(1)), frozen=True)
    first = np.array([[[[0.0]], [[100.0]]]])  # 1 image, 2x1 grid, 1 channel
    second = np.array([[[[3.0]], [[103.0]]]])
    center = init_center([first, second], proj, beta=1.0)
    np.testing.assert_allclose(center[:, :, 0], [[3.0], [103.0]])


def test_init_center_ema_arithmetic():
    # c = 1.0, matched query mean 2.0, beta = 0.1 -> 1.1
    proj = Projector(LinearLayer(np.eye(1), np.zeros(1)), frozen=True)
    first = np.array([[[[1.0]]]])
    second = np.array([[[[2.0]]]])
    center = init_center([first, second], proj, beta=0.1)
    assert center[0, 0, 0] == pytest.approx(1.1)


def test_init_center_multiple_queries_averaged_before_ema():
    # both queries of the second batch match center vector 0; their mean (6)
    # drives a single EMA step: 0.5 * 0 + 0.5 * 6 = 3
    proj = Projector(LinearLayer(np.eye(1), np.zeros(1)), frozen=True)
    first = np.array([0.0, 100.0]).reshape(1, 2, 1, 1)
    second = np.array([4.0, 8.0]).reshape(1, 2, 1, 1)
    center = init_center([first, second], proj, beta=0.5)
    np.testing.assert_allclose(center.reshape(-1), [3.0, 100.0])


def test_init_center_batch_order_invariance():
    rng = np.random.default_rng(5)
    batch1 = rng.normal(size=(6, 3, 3, 4))
    batch2 = rng.normal(size=(6, 3, 3, 4))
    proj = frozen_projector(4, seed=6)
    c_a = init_center([batch1, batch2], proj, beta=0.3)
    c_b = init_center([batch1, batch2[::-1].copy()], proj, beta=0.3)
    np.testing.assert_allclose(c_a, c_b)


def test_init_center_requires_frozen():
    proj = frozen_projector(2).unfreeze()
    with pytest.raises(DataError):
        init_center([np.zeros((1, 1, 1, 2))], proj, beta=0.1)


def test_init_center_unmatched_vectors_unchanged():
    proj = Projector(LinearLayer(np.eye(1), np.zeros(1)), frozen=True)
    # second batch sits exactly on the first center vector; the far vector
    # at 100 is never matched and must stay put
    first = np.array([[0.0], [100.0]]).reshape(1, 2, 1, 1)
    second = np.array([[1.0], [1.0]]).reshape(1, 2, 1, 1)
    center = init_center([first, second], proj, beta=0.5)
    assert center.reshape(-1)[1] == pytest.approx(100.0)
    assert center.reshape(-1)[0] == pytest.approx(0.5)


def test_project_identity_and_bias():
    grid = np.random.default_rng(7).normal(size=(2, 2, 3))
    ident = Projector(LinearLayer(np.eye(3), np.zeros(3)), frozen=True)
    out = project(fmap(grid), ident)
    assert out.role == "projected"
    np.testing.assert_allclose(out.grid, grid)
    biased = Projector(LinearLayer(np.zeros((3, 3)), np.array([1.0, 2.0, 3.0])),
                       frozen=True)
    out = project(fmap(grid), biased)
    np.testing.assert_allclose(out.grid[1, 1], [1.0, 2.0, 3.0])


def test_project_matches_matmul_oracle():
    rng = np.random.default_rng(8)
    grid = rng.normal(size=(2, 2, 3))
    w, b = rng.normal(size=(3, 3)), rng.normal(size=3)
    out = project(fmap(grid), Projector(LinearLayer(w, b), frozen=True))
    for h in range(2):
        for wi in range(2):
            expected = w @ grid[h, wi] + b
            np.testing.assert_allclose(out.grid[h, wi], expected, atol=1e-9)


def test_center_loss_zero_when_on_centers():
    center = np.random.default_rng(9).normal(size=(2, 2, 3))
    batch = np.stack([center, center])
    loss, assign = center_loss(batch, center)
    assert loss == 0.0
    assert np.all(assign.distances == 0.0)


def test_center_loss_three_four_five():
    center = np.zeros((1, 1, 2))
    batch = np.array([[[[3.0, 4.0]]]])
    loss, _ = center_loss(batch, center)
    assert loss == pytest.approx(5.0)


def test_center_loss_matches_bruteforce_oracle():
    rng = np.random.default_rng(10)
    center = rng.normal(size=(2, 3, 4))
    batch = rng.normal(size=(2, 2, 2, 4))
    loss, _ = center_loss(batch, center)
    flat_c = center.reshape(-1, 4)
    dists = []
    for v in batch.reshape(-1, 4):
        dists.append(min(np.sqrt(np.sum((v - c) ** 2)) for c in flat_c))
    assert loss == pytest.approx(np.mean(dists), abs=1e-5)


def test_center_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    c = 5
    center = rng.normal(size=(2, 2, c))
    t = rng.normal(size=(2, 2, 2, c))
    layer = LinearLayer(rng.normal(size=(c, c)) / np.sqrt(c), rng.normal(size=c))
    proj = Projector(layer, frozen=False)

    def loss_and_grad(params):
        layer.zero_grad()
        u = proj.apply(t)
        loss, assign = center_loss(u, center)
        grad_u = center_loss_grad(u, center, assign)
        proj.backward(t, grad_u)
        return loss, [g.copy() for g in layer.gradients()]

    report = finite_difference_check(loss_and_grad, layer.parameters(), h=1e-3)
    assert report.max_rel_error < 1e-4


def test_zero_distance_vectors_give_zero_gradient():
    center = np.ones((1, 1, 2))
    batch = np.ones((1, 1, 1, 2))
    loss, assign = center_loss(batch, center)
    grad = center_loss_grad(batch, center, assign)
    assert loss == 0.0
    np.testing.assert_array_equal(grad, 0.0)
