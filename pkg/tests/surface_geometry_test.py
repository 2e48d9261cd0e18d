import math

import numpy as np
import pytest

from quasilocal_lab import constants
from quasilocal_lab.errors import ChartError, DegenerateGeometryError, GridMismatchError
from quasilocal_lab.sphere_grid import as_grid
from quasilocal_lab.surface_geometry import (
    ExtrinsicData,
    area,
    area_radius,
    classify_expansions,
    coordinate_sphere,
    extrinsic_data,
    integrate,
    null_expansions,
    sampled_surface,
)

GRID = (16, 32)


def _ellipsoid_points(grid, a=1.0, c=2.0):
    unit = grid.unit_sphere_points()
    return unit * np.array([a, a, c])


def test_round_sphere_in_flat_space(flat):
    mesh = coordinate_sphere(flat, (0.3, -0.2, 0.1), 2.0, GRID)
    ext = extrinsic_data(mesh)
    np.testing.assert_allclose(ext.H, 1.0, atol=1e-10)
    np.testing.assert_allclose(ext.trk, 0.0, atol=1e-14)
    assert area(ext) == pytest.approx(16.0 * math.pi, rel=1e-12)
    assert area_radius(mesh) == pytest.approx(2.0, rel=1e-12)
    outward = np.einsum("...i,...i->...", ext.nu, mesh.points - mesh.center)
    assert np.all(outward > 0.0)


def test_schwarzschild_sphere(schwarzschild):
    ext = extrinsic_data(coordinate_sphere(schwarzschild, (0, 0, 0), 4.0, GRID))
    np.testing.assert_allclose(ext.H, 0.5 * math.sqrt(0.5), atol=1e-10)
    assert area(ext) == pytest.approx(64.0 * math.pi, rel=1e-12)


def test_hyperboloid_geodesic_sphere(hyperboloid):
    rho = 2.0 / math.sqrt(5.0)
    ext = extrinsic_data(coordinate_sphere(hyperboloid, (0, 0, 0), rho, GRID))
    np.testing.assert_allclose(ext.H, 3.0, atol=1e-9)
    np.testing.assert_allclose(ext.trk, 2.0, atol=1e-12)
    np.testing.assert_allclose(ext.pi_nu_norm, 2.0, atol=1e-12)
    np.testing.assert_allclose(ext.pi_nu_tangential_norm, 0.0, atol=1e-12)
    np.testing.assert_allclose(ext.gamma, as_grid(GRID).round_metric(rho), atol=1e-12)


def test_perturbed_flat_sphere_traces(perturbed):
    r, eps, length = 1.5, 0.1, 2.0
    ext = extrinsic_data(coordinate_sphere(perturbed, (0, 0, 0), r, GRID))
    q = 1.0 + r**2 / length**2
    np.testing.assert_allclose(ext.trk, 2.0 * eps / q, atol=1e-12)
    np.testing.assert_allclose(ext.pinn, -2.0 * eps / q, atol=1e-12)
    np.testing.assert_allclose(ext.omega_t, 0.0, atol=1e-12)


def test_ellipsoid_mean_curvature(flat):
    grid = as_grid((48, 96))
    ext = extrinsic_data(sampled_surface(flat, grid, _ellipsoid_points(grid), label="ellipsoid"))
    theta = grid.theta[:, None]
    D = np.cos(theta) ** 2 + 4.0 * np.sin(theta) ** 2
    H = 2.0 / D**1.5 + 2.0 / np.sqrt(D)
    np.testing.assert_allclose(ext.H, np.broadcast_to(H, grid.shape), atol=1e-8)


def test_surface_errors(flat, schwarzschild):
    grid = as_grid(GRID)
    with pytest.raises(ChartError):
        coordinate_sphere(schwarzschild, (0, 0, 0), 1.5, GRID)
    with pytest.raises(ValueError):
        coordinate_sphere(flat, (0, 0, 0), 0.0, GRID)
    with pytest.raises(GridMismatchError):
        sampled_surface(flat, grid, np.zeros((16, 30, 3)))
    with pytest.raises(DegenerateGeometryError):
        sampled_surface(flat, grid, np.ones(grid.shape + (3,)))
    ext = ExtrinsicData.from_fields(grid, H=1.0)
    with pytest.raises(GridMismatchError):
        integrate(ext, np.ones((4, 4)))


def test_expansion_classification():
    grid = as_grid((8, 16))
    assert null_expansions(ExtrinsicData.from_fields(grid, H=1.0, trk=-1.0)).classification == constants.EXPANSION_MOTS
    assert null_expansions(ExtrinsicData.from_fields(grid, H=1.0, trk=1.0)).classification == constants.EXPANSION_MITS
    assert null_expansions(ExtrinsicData.from_fields(grid, H=1.0, trk=0.5)).classification == constants.EXPANSION_UNTRAPPED
    assert null_expansions(ExtrinsicData.from_fields(grid, H=-1.0, trk=0.5)).classification == constants.EXPANSION_WEAK_OUTER
    assert null_expansions(ExtrinsicData.from_fields(grid, H=0.0, trk=0.0)).classification == constants.EXPANSION_BOTH
    plus = np.full(grid.shape, 2.0)
    minus = np.full(grid.shape, -1.0)
    assert classify_expansions(plus, minus, 1e-6) == constants.EXPANSION_WEAK_INNER


def test_hyperboloid_sphere_is_untrapped(hyperboloid):
    ext = extrinsic_data(coordinate_sphere(hyperboloid, (0, 0, 0), 2.0 / math.sqrt(5.0), GRID))
    data = null_expansions(ext)
    assert data.classification == constants.EXPANSION_UNTRAPPED
    np.testing.assert_allclose(data.theta_plus, 5.0, atol=1e-9)
    np.testing.assert_allclose(data.theta_minus, 1.0, atol=1e-9)


def test_near_horizon_band(schwarzschild):
    ext = extrinsic_data(coordinate_sphere(schwarzschild, (0, 0, 0), 2.0 + 1e-4, GRID))
    expected = (2.0 / (2.0 + 1e-4)) * math.sqrt(1.0 - 2.0 / (2.0 + 1e-4))
    np.testing.assert_allclose(ext.H, expected, rtol=1e-5)
    assert null_expansions(ext, eps_mots=1e-2).classification == constants.EXPANSION_BOTH
    default = null_expansions(ext)
    assert default.band == pytest.approx(constants.EPS_MOTS / (2.0 + 1e-4))
    assert default.classification == constants.EXPANSION_UNTRAPPED
