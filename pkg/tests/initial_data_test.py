import math

import numpy as np
import pytest

from quasilocal_lab.errors import CatalogError, ChartError, NotAsymptoticallyFlatError
from quasilocal_lab.initial_data import (
    Chart,
    RegionSpec,
    adm_energy_momentum,
    build_catalog_data,
    constraint_fields,
    custom_data,
    dec_check,
    decay_check,
    scalar_curvature,
)


def _eye(x):
    return np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()


def test_catalog_rejects_unknown_and_bad_parameters():
    with pytest.raises(CatalogError, match="Unknown catalog"):
        build_catalog_data("kerr")
    with pytest.raises(CatalogError):
        build_catalog_data("schwarzschild_slice", {"m": -1.0})
    with pytest.raises(CatalogError):
        build_catalog_data("cmc_hyperboloid", {})


def test_flat_constraints_vanish(flat):
    cf = constraint_fields(flat, RegionSpec(kind="ball", r_outer=1.0))
    assert np.max(np.abs(cf.mu)) < 1e-12
    assert np.max(cf.j_norm) < 1e-12
    margin, violations = dec_check(cf)
    assert margin == pytest.approx(0.0, abs=1e-12)
    assert violations == []


@pytest.mark.parametrize("name, params, region", [
    ("schwarzschild_slice", {"m": 1.0}, RegionSpec(kind="shell", r_inner=3.0, r_outer=6.0)),
    ("cmc_hyperboloid", {"a": 1.0}, RegionSpec(kind="ball", r_outer=1.5)),
])
def test_vacuum_slices_satisfy_constraints(name, params, region):
    cf = constraint_fields(build_catalog_data(name, params), region)
    assert np.max(np.abs(cf.mu)) < 1e-6
    assert np.max(cf.j_norm) < 1e-6


def test_finite_difference_constraints_converge_at_fourth_order(hyperboloid):
    # every derivative by differences; the exact data has mu = 0
    shell = RegionSpec(kind="shell", r_inner=0.5, r_outer=1.0, n_radial=3)
    errors = [np.max(np.abs(constraint_fields(hyperboloid.with_finite_differences(h), shell).mu)) for h in (0.1, 0.05)]
    assert errors[1] > 0.0
    assert errors[0] / errors[1] >= 8.0


def test_hyperboloid_scalar_curvature_is_constant(hyperboloid):
    points = RegionSpec(kind="ball", r_outer=1.0).points()
    np.testing.assert_allclose(scalar_curvature(hyperboloid, points), -6.0, atol=1e-6)


def test_perturbed_flat_has_positive_energy_density(perturbed):
    cf = constraint_fields(perturbed, RegionSpec(kind="ball", r_outer=1.0))
    assert np.all(np.abs(cf.trace_k) > 0.0)
    assert np.max(np.abs(cf.scalar_curvature)) < 1e-10


def test_dec_violation_is_reported():
    def second_form(x):
        k = np.zeros(x.shape[:-1] + (3, 3))
        k[..., 0, 0] = x[..., 1]
        return k

    ids = custom_data(_eye, second_form, name="k=diag(y,0,0)")
    cf = constraint_fields(ids, RegionSpec(kind="ball", r_outer=1.0))
    np.testing.assert_allclose(cf.mu, 0.0, atol=1e-12)
    np.testing.assert_allclose(cf.j, np.broadcast_to([0.0, -1.0, 0.0], cf.j.shape), atol=1e-8)
    margin, violations = dec_check(cf)
    assert margin == pytest.approx(-1.0, abs=1e-8)
    assert len(violations) == cf.points.shape[0]


def test_chart_rejects_regions_inside_horizon(schwarzschild):
    with pytest.raises(ChartError):
        constraint_fields(schwarzschild, RegionSpec(kind="ball", r_outer=3.0))


def test_custom_chart_margin():
    ids = custom_data(_eye, lambda x: np.zeros(x.shape[:-1] + (3, 3)), chart=Chart(lower=(-1, -1, -1), upper=(1, 1, 1)))
    # finite-difference stencils need room beyond the sample points
    with pytest.raises(ChartError):
        constraint_fields(ids, RegionSpec(kind="box", lower=(-1, -1, -1), upper=(1, 1, 1), n_box=3))
    constraint_fields(ids, RegionSpec(kind="box", lower=(-0.5, -0.5, -0.5), upper=(0.5, 0.5, 0.5), n_box=3))


def test_region_points():
    ball = RegionSpec(kind="ball", center=(1.0, 0.0, 0.0), r_outer=0.5, n_radial=3, grid=(4, 8))
    pts = ball.points()
    np.testing.assert_allclose(pts[0], [1.0, 0.0, 0.0])
    assert pts.shape == (1 + 2 * 32, 3)
    assert RegionSpec(kind="box", n_box=4).points().shape == (64, 3)
    with pytest.raises(ValueError):
        RegionSpec(kind="shell", r_inner=2.0, r_outer=1.0)
    with pytest.raises(ValueError):
        RegionSpec(kind="cylinder")


def test_adm_energy_of_schwarzschild(schwarzschild):
    result = adm_energy_momentum(schwarzschild, [20.0, 40.0, 80.0])
    assert result.energy == pytest.approx(1.0, abs=2e-2)
    assert max(abs(p) for p in result.momentum) <= 1e-3
    assert result.valid
    assert result.mass == pytest.approx(result.energy, abs=1e-3)
    assert len(result.shell_energy) == 3
    record = result.to_record()
    assert record["extrapolation_order"] == 2


def test_adm_energy_of_flat_is_zero(flat):
    result = adm_energy_momentum(flat, [5.0, 10.0, 20.0], grid=(12, 24))
    assert abs(result.energy) < 1e-12
    assert result.mass == 0.0


def test_adm_errors(hyperboloid, schwarzschild):
    with pytest.raises(NotAsymptoticallyFlatError):
        adm_energy_momentum(hyperboloid, [5.0, 10.0, 20.0])
    with pytest.raises(ValueError, match="at least 3"):
        adm_energy_momentum(schwarzschild, [20.0, 40.0])


def test_decay_check(schwarzschild):
    decay = decay_check(schwarzschild, [20.0, 40.0, 80.0])
    # |g - delta| * r -> 2m along the radial direction
    assert decay[80.0] == pytest.approx(2.0, rel=5e-2)
    assert decay[20.0] > decay[80.0]


def test_scaling_preserves_vacuum(schwarzschild):
    scaled = schwarzschild.scaled(2.0)
    assert scaled.chart.inner_radius == pytest.approx(4.0)
    x = np.array([[10.0, 0.0, 0.0]])
    np.testing.assert_allclose(scaled.metric(x), schwarzschild.metric(x / 2.0))
    cf = constraint_fields(scaled, RegionSpec(kind="shell", r_inner=6.0, r_outer=10.0))
    assert np.max(np.abs(cf.mu)) < 1e-6
    with pytest.raises(CatalogError):
        schwarzschild.scaled(0.0)


def test_finite_difference_derivatives_match_analytic(hyperboloid):
    fd = hyperboloid.with_finite_differences(1e-3)
    points = RegionSpec(kind="ball", r_outer=1.0, n_radial=3, grid=(4, 8)).points()
    np.testing.assert_allclose(fd.metric_jacobian(points), hyperboloid.metric_jacobian(points), atol=1e-9)
    assert fd.derivative_margin(2) > 0.0
    assert hyperboloid.derivative_margin(1) == 0.0
    assert math.isfinite(fd.derivative_margin(1))
