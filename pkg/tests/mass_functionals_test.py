import math

import numpy as np
import pytest

from quasilocal_lab.errors import GridMismatchError, HypothesisError
from quasilocal_lab.initial_data import RegionSpec
from quasilocal_lab.mass_functionals import (
    GaugeField,
    VectorFieldData,
    brown_york,
    generalized_mean_curvature,
    kijowski_liu_yau,
    mean_curvature_vector_norm,
    vector_field_hypotheses,
    w_mass,
    wang_yau_energy,
    x_modified_energy,
)
from quasilocal_lab.sphere_grid import as_grid
from quasilocal_lab.surface_geometry import ExtrinsicData, coordinate_sphere, extrinsic_data
from quasilocal_lab.weyl_embedding import EmbeddingOptions, embed_convex, reference_mean_curvature

GRID = (16, 32)
OPTS = EmbeddingOptions(degree=6)


def _surface(ids, center, r, grid=GRID):
    mesh = coordinate_sphere(ids, center, r, grid)
    ext = extrinsic_data(mesh)
    H0 = reference_mean_curvature(embed_convex(ext.gamma, OPTS, ext.grid))
    return mesh, ext, H0


@pytest.mark.parametrize("r, expected", [(3.0, 1.267949), (4.0, 1.171573), (10.0, 1.055728)])
def test_brown_york_schwarzschild_oracle(schwarzschild, r, expected):
    _, ext, H0 = _surface(schwarzschild, (0, 0, 0), r)
    report = brown_york(H0, ext)
    assert report.admissible
    assert report.normalized == pytest.approx(expected, abs=1e-3)
    assert report.normalized == pytest.approx(r * (1.0 - math.sqrt(1.0 - 2.0 / r)), abs=1e-8)
    record = report.to_record()
    assert record["raw"] == pytest.approx(8.0 * math.pi * report.normalized)
    assert record["margin_H"] > 0.0


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_flat_space_masses_vanish(flat, r):
    mesh, ext, H0 = _surface(flat, (0, 0, 0), r)
    for fn in (brown_york, kijowski_liu_yau, w_mass):
        assert abs(fn(H0, ext).normalized) <= 1e-6
    energy, report = wang_yau_energy(mesh, ext, np.zeros(ext.grid.shape), embedding_options=OPTS)
    assert abs(report.normalized) <= 1e-6


def test_inadmissible_surfaces_are_flagged_not_raised():
    grid = as_grid((8, 16))
    ext = ExtrinsicData.from_fields(grid, H=np.where(grid.theta[:, None] < 1.0, -0.5, 2.0) * np.ones(grid.shape), trk=0.0)
    H0 = np.full(grid.shape, 2.0)
    report = brown_york(H0, ext)
    assert not report.admissible
    assert report.admissibility["H"] == pytest.approx(-0.5)
    assert math.isfinite(report.raw)

    ext = ExtrinsicData.from_fields(grid, H=1.0, trk=2.0)
    assert not kijowski_liu_yau(H0, ext).admissible
    assert not w_mass(H0, ext).admissible
    with pytest.raises(HypothesisError):
        wang_yau_energy(None, ext, np.zeros(grid.shape))
    with pytest.raises(GridMismatchError):
        brown_york(np.ones((4, 4)), ext)


def test_hyperboloid_sphere_values(hyperboloid):
    mesh, ext, H0 = _surface(hyperboloid, (0, 0, 0), 2.0 / math.sqrt(5.0))
    np.testing.assert_allclose(mean_curvature_vector_norm(ext), math.sqrt(5.0), atol=1e-9)
    np.testing.assert_allclose(H0, math.sqrt(5.0), atol=1e-9)
    # a slice of Minkowski space: the Minkowski-reference mass vanishes
    assert abs(kijowski_liu_yau(H0, ext).normalized) < 1e-8
    assert brown_york(H0, ext).normalized < 0.0
    assert w_mass(H0, ext).normalized > 0.0


def _random_surfaces(perturbed, hyperboloid, rng, count=10):
    for _ in range(count):
        yield _surface(perturbed, rng.uniform(-0.5, 0.5, 3), rng.uniform(0.5, 2.0), (12, 24))
    for _ in range(count):
        yield _surface(hyperboloid, (0, 0, 0), rng.uniform(0.3, 2.0), (12, 24))


def test_ordering_chain_and_wang_yau_reduction(perturbed, hyperboloid, rng):
    checked = 0
    for mesh, ext, H0 in _random_surfaces(perturbed, hyperboloid, rng):
        by, kly, w = brown_york(H0, ext), kijowski_liu_yau(H0, ext), w_mass(H0, ext)
        assert by.admissible and kly.admissible and w.admissible
        assert w.raw - kly.raw >= -1e-8
        assert kly.raw - by.raw >= -1e-8

        _, wy = wang_yau_energy(mesh, ext, np.zeros(ext.grid.shape), embedding_options=OPTS)
        assert wy.normalized == pytest.approx(kly.normalized, abs=1e-6)
        assert wy.physical_h <= wy.physical_h_at_zero + 1e-12
        assert wy.ibp_defect < 1e-8
        checked += 1
    assert checked == 20


def test_generalized_mean_curvature_at_zero_gauge():
    grid = as_grid((8, 16))
    ext = ExtrinsicData.from_fields(grid, H=3.0, trk=1.0)
    h = generalized_mean_curvature(ext, GaugeField.zero(grid))
    np.testing.assert_allclose(h, 3.0)
    assert GaugeField.zero(grid).tail_norm(grid) == 0.0


def test_masses_scale_linearly(schwarzschild):
    _, ext, H0 = _surface(schwarzschild, (0, 0, 0), 4.0)
    _, ext2, H02 = _surface(schwarzschild.scaled(2.0), (0, 0, 0), 8.0)
    assert brown_york(H02, ext2).raw == pytest.approx(2.0 * brown_york(H0, ext).raw, rel=1e-8)


def test_x_modified_energy_and_hypotheses(flat):
    mesh, ext, H0 = _surface(flat, (0, 0, 0), 1.0)
    ball = RegionSpec(kind="ball", r_outer=1.0, n_radial=5)

    zero = x_modified_energy(H0, ext)
    assert zero.raw == pytest.approx(brown_york(H0, ext).raw, abs=1e-12)

    X = VectorFieldData.position()
    margins = vector_field_hypotheses(flat, ball, X, grid=GRID)
    assert margins.interior == pytest.approx(4.0, abs=1e-8)
    assert margins.boundary == pytest.approx(1.0, abs=1e-10)
    report = x_modified_energy(H0, ext, X)
    assert report.admissible
    np.testing.assert_allclose(report.fields["u"], 2.0, atol=1e-9)
    assert report.normalized == pytest.approx(0.5, abs=1e-9)

    doubled = VectorFieldData.position(scale=2.0)
    assert vector_field_hypotheses(flat, ball, doubled, grid=GRID).boundary == pytest.approx(0.0, abs=1e-10)
    assert not x_modified_energy(H0, ext, doubled).admissible

    c = 0.7
    constant = VectorFieldData.constant((c, 0.0, 0.0))
    assert vector_field_hypotheses(flat, ball, constant, grid=GRID).interior == pytest.approx(-2.0 * c * c, abs=1e-8)


def test_wang_yau_small_tau_stays_near_zero_gauge(schwarzschild):
    mesh, ext, H0 = _surface(schwarzschild, (0, 0, 0), 4.0)
    _, at_zero = wang_yau_energy(mesh, ext, np.zeros(ext.grid.shape), embedding_options=OPTS)
    tau = 0.05 * ext.grid.cos_theta[:, None] * np.ones(ext.grid.shape)
    energy, report = wang_yau_energy(mesh, ext, tau, embedding_options=OPTS)
    assert energy >= 0.0
    assert abs(energy - at_zero.energy) <= 0.1 * at_zero.energy
    assert report.physical_h <= report.physical_h_at_zero + 1e-12
