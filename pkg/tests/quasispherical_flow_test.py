import csv
import math

import numpy as np
import pytest

from quasilocal_lab.errors import FlowError, HypothesisError
from quasilocal_lab.mass_functionals import VectorFieldData, brown_york
from quasilocal_lab.quasispherical_flow import (
    dq_dr_formula,
    export_trajectory_csv,
    extension_energy,
    q_derivative_check,
    seed_from_boundary,
    shi_tam_boundary_u,
    solve_rotsym_extension,
)
from quasilocal_lab.surface_geometry import ExtrinsicData, coordinate_sphere, extrinsic_data


@pytest.mark.parametrize("r0, u0, energy", [(1.0, 2.0, 0.375), (4.0, math.sqrt(2.0), 1.0)])
def test_round_flow_energy(r0, u0, energy):
    traj = solve_rotsym_extension(r0, u0, 1000.0 * r0)
    assert traj.mass_parameter / 2.0 == pytest.approx(energy, abs=1e-12)
    assert extension_energy(traj) == pytest.approx(energy, abs=1e-6)
    assert traj.energy == pytest.approx(energy, abs=1e-6)

    q = traj.column("Q")
    assert q[0] == pytest.approx(r0 * (1.0 - 1.0 / u0), abs=1e-12)
    assert np.all(np.diff(q) <= 1e-14)
    assert traj.states[0].Q_scaled == pytest.approx(8.0 * math.pi * q[0])


def test_q_derivative_matches_formula():
    assert q_derivative_check(solve_rotsym_extension(4.0, math.sqrt(2.0), 4000.0)) <= 1e-6
    assert q_derivative_check(solve_rotsym_extension(1.0, 2.0, 1000.0)) <= 1e-6
    np.testing.assert_allclose(dq_dr_formula(np.array([1.0, 2.0])), [0.0, -0.25])


def test_flow_errors():
    with pytest.raises(FlowError):
        solve_rotsym_extension(1.0, 0.0, 100.0)
    with pytest.raises(FlowError):
        solve_rotsym_extension(1.0, 2.0, 0.5)
    with pytest.raises(FlowError):
        solve_rotsym_extension(1.0, 2.0, math.inf)
    with pytest.raises(FlowError, match="insufficient range"):
        extension_energy(solve_rotsym_extension(1.0, 2.0, 10.0))


def test_boundary_seed_matches_schwarzschild(schwarzschild):
    ext = extrinsic_data(coordinate_sphere(schwarzschild, (0, 0, 0), 4.0, (16, 32)))
    H0 = np.full(ext.grid.shape, 0.5)
    ufield = shi_tam_boundary_u(H0, ext)
    assert ufield.relative_deviation < 1e-10
    r0, u0 = seed_from_boundary(ufield)
    assert r0 == pytest.approx(4.0, rel=1e-10)
    assert u0 == pytest.approx(math.sqrt(2.0), rel=1e-10)

    traj = solve_rotsym_extension(r0, u0, 1000.0 * r0)
    assert traj.states[0].Q == pytest.approx(4.0 * (1.0 - 1.0 / math.sqrt(2.0)), rel=1e-9)
    assert traj.states[0].Q == pytest.approx(brown_york(H0, ext).normalized, rel=1e-9)
    assert extension_energy(traj) == pytest.approx(1.0, abs=1e-6)


def test_non_round_boundary_is_refused():
    grid = (8, 16)
    probe = ExtrinsicData.from_fields(grid, H=2.0)
    H = 2.0 + 0.1 * np.cos(probe.grid.theta)[:, None] * np.ones(probe.grid.shape)
    ext = ExtrinsicData.from_fields(grid, H=H)
    ufield = shi_tam_boundary_u(np.full(ext.grid.shape, 2.0), ext)
    with pytest.raises(FlowError, match="non-round"):
        seed_from_boundary(ufield)

    with pytest.raises(HypothesisError):
        shi_tam_boundary_u(np.full(ext.grid.shape, 2.0), ExtrinsicData.from_fields(grid, H=-1.0))


def test_boundary_u_with_vector_field(flat):
    ext = extrinsic_data(coordinate_sphere(flat, (0, 0, 0), 1.0, (12, 24)))
    ufield = shi_tam_boundary_u(np.full(ext.grid.shape, 2.0), ext, VectorFieldData.position())
    np.testing.assert_allclose(ufield.values, 2.0, atol=1e-9)


def test_trajectory_export(tmp_path):
    traj = solve_rotsym_extension(1.0, 2.0, 1000.0, steps=50)
    path = export_trajectory_csv(tmp_path / "flow" / "trajectory.csv", traj)
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 50
    assert set(rows[0]) == {"r", "u", "Q", "dQ/dr_numeric", "dQ/dr_formula"}
    assert float(rows[0]["r"]) == pytest.approx(1.0)
    assert float(rows[-1]["r"]) == pytest.approx(1000.0)
