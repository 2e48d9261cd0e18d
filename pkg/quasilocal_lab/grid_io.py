"""Text grid formats: a '# {json header}' line followed by whitespace-separated rows."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from quasilocal_lab import constants
from quasilocal_lab.errors import SceneError
from quasilocal_lab.initial_data import InitialDataSet, sampled_data
from quasilocal_lab.shields_fillins import BartnikData
from quasilocal_lab.sphere_grid import SphereGrid, as_grid
from quasilocal_lab.weyl_embedding import EmbeddingResult

logger = logging.getLogger(__name__)

_UPPER = np.triu_indices(3)


def _write(path: Path, header: dict, rows: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, rows, header=json.dumps(header, sort_keys=True), comments="# ", fmt="%.17g")
    return path


def _read(path: Path, expected_format: str) -> Tuple[dict, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise SceneError(f"grid file not found: {path}")
    with path.open("r", encoding="utf8") as f:
        first = f.readline()
    if not first.startswith("#"):
        raise SceneError(f"{path}: missing '# {{...}}' header line")
    try:
        header = json.loads(first.lstrip("#").strip())
    except json.JSONDecodeError as e:
        raise SceneError(f"{path}: malformed header ({e})") from e
    if header.get("format") != expected_format:
        raise SceneError(f"{path}: expected format '{expected_format}', found '{header.get('format')}'")
    return header, np.loadtxt(path, comments="#", ndmin=2)


def _sym_from_upper(values: np.ndarray) -> np.ndarray:
    out = np.empty(values.shape[:-1] + (3, 3))
    out[..., _UPPER[0], _UPPER[1]] = values
    out[..., _UPPER[1], _UPPER[0]] = values
    return out


def save_data_grid(
    path: Path,
    ids: InitialDataSet,
    origin: Sequence[float],
    spacing: Sequence[float],
    dims: Sequence[int],
    decay_rate: Optional[float] = None,
    asymptotically_flat: Optional[bool] = None,
) -> Path:
    """Sample a data set on a uniform box: rows g_ij (upper triangle) then k_ij, z fastest."""
    axes = [o + h * np.arange(n) for o, h, n in zip(origin, spacing, dims)]
    points = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    g = ids.metric(points)[..., _UPPER[0], _UPPER[1]]
    k = ids.second_form(points)[..., _UPPER[0], _UPPER[1]]
    header = {
        "format": constants.GRID_FORMAT,
        "dims": [int(n) for n in dims],
        "spacing": [float(h) for h in spacing],
        "origin": [float(o) for o in origin],
        "q": decay_rate if decay_rate is not None else ids.decay_rate,
        "asymptotically_flat": ids.chart.asymptotically_flat if asymptotically_flat is None else asymptotically_flat,
        "name": ids.name,
    }
    rows = np.concatenate([g, k], axis=-1).reshape(-1, 12)
    return _write(path, header, rows)


def load_data_grid(path: Path) -> InitialDataSet:
    header, rows = _read(path, constants.GRID_FORMAT)
    dims = tuple(header["dims"])
    if rows.shape != (int(np.prod(dims)), 12):
        raise SceneError(f"{path}: expected {int(np.prod(dims))} rows of 12 values, found {rows.shape}")
    values = rows.reshape(dims + (12,))
    logger.info(f"Loaded sampled data grid {dims} from {path}")
    return sampled_data(
        _sym_from_upper(values[..., :6]),
        _sym_from_upper(values[..., 6:]),
        origin=header["origin"],
        spacing=header["spacing"],
        decay_rate=header.get("q"),
        asymptotically_flat=bool(header.get("asymptotically_flat", False)),
        name=header.get("name", Path(path).stem),
    )


def save_surface_grid(path: Path, grid: SphereGrid, points: np.ndarray) -> Path:
    header = {"format": constants.SURFACE_FORMAT, "n_theta": grid.n_theta, "n_phi": grid.n_phi}
    return _write(path, header, np.asarray(points).reshape(-1, 3))


def load_surface_grid(path: Path) -> Tuple[SphereGrid, np.ndarray]:
    header, rows = _read(path, constants.SURFACE_FORMAT)
    grid = as_grid((header["n_theta"], header["n_phi"]))
    if rows.shape != (grid.n_theta * grid.n_phi, 3):
        raise SceneError(f"{path}: expected {grid.n_theta * grid.n_phi} rows of 3 values, found {rows.shape}")
    return grid, rows.reshape(grid.shape + (3,))


def save_bartnik_data(path: Path, bd: BartnikData) -> Path:
    """Columns: gamma_tt gamma_tp gamma_pp alpha_tt alpha_tp alpha_pp H beta_t beta_p."""
    upper = np.triu_indices(2)
    rows = np.concatenate(
        [bd.gamma[..., upper[0], upper[1]], bd.alpha[..., upper[0], upper[1]], bd.H[..., None], bd.beta],
        axis=-1,
    ).reshape(-1, 9)
    header = {"format": constants.BARTNIK_FORMAT, "n_theta": bd.grid.n_theta, "n_phi": bd.grid.n_phi}
    return _write(path, header, rows)


def load_bartnik_data(path: Path) -> BartnikData:
    header, rows = _read(path, constants.BARTNIK_FORMAT)
    grid = as_grid((header["n_theta"], header["n_phi"]))
    if rows.shape != (grid.n_theta * grid.n_phi, 9):
        raise SceneError(f"{path}: expected {grid.n_theta * grid.n_phi} rows of 9 values, found {rows.shape}")
    values = rows.reshape(grid.shape + (9,))

    def sym2(cols):
        out = np.empty(grid.shape + (2, 2))
        out[..., 0, 0], out[..., 0, 1], out[..., 1, 1] = cols[..., 0], cols[..., 1], cols[..., 2]
        out[..., 1, 0] = out[..., 0, 1]
        return out

    return BartnikData(grid=grid, gamma=sym2(values[..., 0:3]), alpha=sym2(values[..., 3:6]), H=values[..., 6], beta=values[..., 7:9])


def export_embedding(path: Path, emb: EmbeddingResult) -> Path:
    """Wavefront OBJ: one vertex per node, quads between neighbouring latitude rings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_theta, n_phi = emb.grid.shape
    with path.open("w", encoding="utf8") as f:
        f.write(f"# embedding degree={emb.degree} residual_max={emb.residual_max:.3e} converged={emb.converged}\n")
        for x, y, z in emb.positions.reshape(-1, 3):
            f.write(f"v {x:.12g} {y:.12g} {z:.12g}\n")
        for j in range(n_theta - 1):
            for k in range(n_phi):
                a = j * n_phi + k + 1
                b = j * n_phi + (k + 1) % n_phi + 1
                f.write(f"f {a} {b} {b + n_phi} {a + n_phi}\n")
    return path
