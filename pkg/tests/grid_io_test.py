import numpy as np
import pytest

from quasilocal_lab.errors import SceneError
from quasilocal_lab.grid_io import (
    export_embedding,
    load_bartnik_data,
    load_data_grid,
    load_surface_grid,
    save_bartnik_data,
    save_data_grid,
    save_surface_grid,
)
from quasilocal_lab.shields_fillins import bartnik_data_from_surface
from quasilocal_lab.sphere_grid import as_grid
from quasilocal_lab.surface_geometry import coordinate_sphere, extrinsic_data
from quasilocal_lab.weyl_embedding import EmbeddingOptions, embed_convex


def test_data_grid_roundtrip(tmp_path, hyperboloid):
    path = save_data_grid(tmp_path / "hyp.grid", hyperboloid, origin=(-1, -1, -1), spacing=(0.1, 0.1, 0.1), dims=(21, 21, 21))
    ids = load_data_grid(path)
    assert ids.kind == "sampled"
    assert ids.name == hyperboloid.name
    assert ids.chart.lower == pytest.approx((-0.8, -0.8, -0.8))

    nodes = np.array([[0.0, 0.0, 0.0], [0.5, -0.3, 0.2]])
    np.testing.assert_allclose(ids.metric(nodes), hyperboloid.metric(nodes), atol=1e-12)
    np.testing.assert_allclose(ids.second_form(nodes), hyperboloid.second_form(nodes), atol=1e-12)
    # the cubic interpolant reproduces every sample, boundary nodes included
    axis = -1.0 + 0.1 * np.arange(0, 21, 4)
    lattice = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    np.testing.assert_allclose(ids.metric(lattice), hyperboloid.metric(lattice), atol=1e-12)
    between = np.array([[0.05, -0.25, 0.33]])
    np.testing.assert_allclose(ids.metric(between), hyperboloid.metric(between), atol=1e-4)
    np.testing.assert_allclose(ids.metric_jacobian(nodes), hyperboloid.metric_jacobian(nodes), atol=1e-3)


def test_data_grid_row_count_mismatch(tmp_path, flat):
    path = save_data_grid(tmp_path / "flat.grid", flat, origin=(0, 0, 0), spacing=(1, 1, 1), dims=(5, 5, 5))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(SceneError, match="rows"):
        load_data_grid(path)


def test_surface_grid_roundtrip(tmp_path):
    grid = as_grid((8, 16))
    points = 1.5 * grid.unit_sphere_points()
    path = save_surface_grid(tmp_path / "s.surf", grid, points)
    loaded_grid, loaded = load_surface_grid(path)
    assert loaded_grid.shape == grid.shape
    np.testing.assert_array_equal(loaded, points)


def test_bartnik_roundtrip(tmp_path, perturbed):
    ext = extrinsic_data(coordinate_sphere(perturbed, (0, 0, 0), 1.0, (8, 16)))
    bd = bartnik_data_from_surface(ext)
    loaded = load_bartnik_data(save_bartnik_data(tmp_path / "b.txt", bd))
    for name in ("gamma", "alpha", "H", "beta"):
        np.testing.assert_allclose(getattr(loaded, name), getattr(bd, name), rtol=1e-14, atol=1e-15)


def test_format_mismatch_and_missing(tmp_path):
    grid = as_grid((8, 16))
    path = save_surface_grid(tmp_path / "s.surf", grid, grid.unit_sphere_points())
    with pytest.raises(SceneError, match="expected format"):
        load_bartnik_data(path)
    with pytest.raises(SceneError, match="not found"):
        load_surface_grid(tmp_path / "missing.surf")
    bad = tmp_path / "bad.surf"
    bad.write_text("1 2 3\n")
    with pytest.raises(SceneError, match="header"):
        load_surface_grid(bad)


def test_export_embedding_obj(tmp_path):
    grid = as_grid((8, 16))
    emb = embed_convex(grid.round_metric(), EmbeddingOptions(degree=3), grid)
    path = export_embedding(tmp_path / "emb.obj", emb)
    lines = path.read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == 8 * 16
    faces = [line for line in lines if line.startswith("f ")]
    assert len(faces) == 7 * 16
    assert max(int(i) for line in faces for i in line.split()[1:]) == 8 * 16
