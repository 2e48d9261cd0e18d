import numpy as np
import pytest

from quasilocal_lab.errors import EmbeddingNotConvergedError, WeylConditionError
from quasilocal_lab.sphere_grid import as_grid
from quasilocal_lab.weyl_embedding import (
    EmbeddingOptions,
    embed_convex,
    embedding_gauss_curvature,
    induced_metric_from_positions,
    minkowski_defect,
    reference_mean_curvature,
    weyl_condition,
)


def _ellipsoid_metric(grid, a=1.0, c=2.0):
    return induced_metric_from_positions(grid, grid.unit_sphere_points() * np.array([a, a, c]))


def _peanut_metric(grid):
    R = 1.0 + 0.4 * np.cos(2.0 * grid.theta)
    return induced_metric_from_positions(grid, R[:, None, None] * grid.unit_sphere_points())


def test_pullback_of_unit_sphere_is_round():
    grid = as_grid((16, 32))
    np.testing.assert_allclose(induced_metric_from_positions(grid, grid.unit_sphere_points()), grid.round_metric(), atol=1e-12)


def test_weyl_condition_round_and_ellipsoid():
    grid = as_grid((24, 48))
    np.testing.assert_allclose(weyl_condition(grid.round_metric(2.0), grid).K, 0.25, atol=1e-10)
    theta = grid.theta[:, None]
    expected = 1.0 / (4.0 * (np.sin(theta) ** 2 + np.cos(theta) ** 2 / 4.0) ** 2)
    np.testing.assert_allclose(weyl_condition(_ellipsoid_metric(grid), grid).K, np.broadcast_to(expected, grid.shape), atol=1e-8)


def test_weyl_condition_detects_negative_curvature():
    grid = as_grid((32, 64))
    t = grid.theta
    R, dR, ddR = 1.0 + 0.4 * np.cos(2 * t), -0.8 * np.sin(2 * t), -1.6 * np.cos(2 * t)
    rho_1 = dR * np.sin(t) + R * np.cos(t)
    rho_2 = ddR * np.sin(t) + 2 * dR * np.cos(t) - R * np.sin(t)
    z_1 = dR * np.cos(t) - R * np.sin(t)
    z_2 = ddR * np.cos(t) - 2 * dR * np.sin(t) - R * np.cos(t)
    oracle = z_1 * (rho_1 * z_2 - rho_2 * z_1) / (R * np.sin(t) * (rho_1**2 + z_1**2) ** 2)

    weyl = weyl_condition(_peanut_metric(grid), grid)
    np.testing.assert_allclose(weyl.K, np.broadcast_to(oracle[:, None], grid.shape), atol=1e-6)
    assert weyl.min_K < 0.0
    with pytest.raises(WeylConditionError):
        embed_convex(_peanut_metric(grid), EmbeddingOptions(degree=4), grid)


def test_round_metric_embeds_immediately():
    grid = as_grid((16, 32))
    emb = embed_convex(grid.round_metric(2.0), EmbeddingOptions(degree=4), grid)
    assert emb.converged
    assert emb.residual_max < 1e-7
    np.testing.assert_allclose(reference_mean_curvature(emb), 1.0, atol=1e-9)
    np.testing.assert_allclose(embedding_gauss_curvature(emb), 0.25, atol=1e-9)
    assert emb.to_record()["min_gauss_curvature"] == pytest.approx(0.25, abs=1e-9)


def test_ellipsoid_embedding_matches_closed_form():
    grid = as_grid((24, 48))
    gamma = _ellipsoid_metric(grid)
    emb = embed_convex(gamma, EmbeddingOptions(degree=4, max_iter=100), grid)
    assert emb.converged
    assert emb.residual_max < 1e-7

    theta = grid.theta[:, None]
    D = np.cos(theta) ** 2 + 4.0 * np.sin(theta) ** 2
    H0 = 2.0 / D**1.5 + 2.0 / np.sqrt(D)
    np.testing.assert_allclose(emb.H0, np.broadcast_to(H0, grid.shape), atol=1e-4)
    np.testing.assert_allclose(emb.embedded_gauss_curvature, emb.gauss_curvature, atol=1e-4)
    assert np.min(emb.embedded_gauss_curvature) > 0.0
    assert minkowski_defect(emb, gamma) <= 1e-3
    # damped steps are only accepted when they lower the residual
    assert all(b <= a for a, b in zip(emb.history, emb.history[1:]))


def test_unconverged_embedding_is_refused():
    grid = as_grid((16, 32))
    emb = embed_convex(_ellipsoid_metric(grid), EmbeddingOptions(degree=3, max_iter=0), grid)
    assert not emb.converged
    with pytest.raises(EmbeddingNotConvergedError):
        reference_mean_curvature(emb)


def test_seeded_jitter_is_deterministic():
    grid = as_grid((12, 24))
    opts = EmbeddingOptions(degree=3, jitter=1e-3, seed=7)
    first = embed_convex(grid.round_metric(), opts, grid)
    second = embed_convex(grid.round_metric(), opts, grid)
    np.testing.assert_array_equal(first.coefficients, second.coefficients)
    assert first.converged
