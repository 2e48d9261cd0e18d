"""Closed 2-surfaces in an initial data set and their extrinsic geometry."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from quasilocal_lab import constants
from quasilocal_lab.errors import DegenerateGeometryError, GridMismatchError
from quasilocal_lab.initial_data import InitialDataSet, christoffel_first_kind
from quasilocal_lab.sphere_grid import SphereGrid, as_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    grid: SphereGrid
    points: np.ndarray
    ambient: InitialDataSet
    center: np.ndarray
    orientation: str = "outward"
    label: str = ""

    @cached_property
    def tangents(self) -> np.ndarray:
        """(..., 2, 3): rows are X_theta and X_phi in chart components."""
        return np.stack(
            [self.grid.d_theta(self.points, parity=1), self.grid.d_phi(self.points)], axis=-2
        )

    @cached_property
    def centroid(self) -> np.ndarray:
        w = self.grid.node_weights[..., None]
        return np.sum(w * self.points, axis=(0, 1)) / np.sum(self.grid.node_weights)


def _check_embedded(grid: SphereGrid, points: np.ndarray):
    pts = points.reshape(-1, 3)
    scale = float(np.max(np.ptp(pts, axis=0)))
    if scale == 0.0:
        raise DegenerateGeometryError("surface collapses to a point")
    pairs = cKDTree(pts).query_pairs(r=1e-10 * scale)
    if pairs:
        raise DegenerateGeometryError(f"surface not embedded: {len(pairs)} coincident node pairs")


def sampled_surface(ids: InitialDataSet, grid, points: np.ndarray, label: str = "") -> SurfaceMesh:
    grid = as_grid(grid)
    points = np.asarray(points, dtype=float)
    if points.shape != grid.shape + (3,):
        raise GridMismatchError(f"surface samples have shape {points.shape}, grid expects {grid.shape + (3,)}")
    ids.chart.check(points, ids.derivative_margin(1), what=f"surface {label or 'sampled'}")
    _check_embedded(grid, points)
    w = grid.node_weights[..., None]
    center = np.sum(w * points, axis=(0, 1)) / np.sum(grid.node_weights)
    return SurfaceMesh(grid=grid, points=points, ambient=ids, center=center, label=label)


def coordinate_sphere(
    ids: InitialDataSet,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    r: float = 1.0,
    grid=constants.DEFAULT_GRID,
    label: str = "",
) -> SurfaceMesh:
    grid = as_grid(grid)
    if not r > 0.0:
        raise ValueError(f"sphere radius must be positive, got {r}")
    center = np.asarray(center, dtype=float)
    points = center + r * grid.unit_sphere_points()
    ids.chart.check(points, ids.derivative_margin(1), what=f"sphere r={r:g}")
    return SurfaceMesh(grid=grid, points=points, ambient=ids, center=center, label=label or f"sphere(r={r:g})")


@dataclass(frozen=True, eq=False)
class ExtrinsicData:
    grid: SphereGrid
    gamma: np.ndarray
    gamma_inv: np.ndarray
    area_density: np.ndarray
    H: np.ndarray
    trk: np.ndarray
    omega_t: np.ndarray
    pinn: np.ndarray
    pi_nu_norm: np.ndarray
    pi_nu_tangential_norm: np.ndarray
    second_form_tangential: np.ndarray
    nu: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    tangents: Optional[np.ndarray] = None
    ambient_metric: Optional[np.ndarray] = None
    shape_operator: Optional[np.ndarray] = None

    @property
    def area_element(self) -> np.ndarray:
        return self.area_density

    @classmethod
    def from_fields(cls, grid, H, trk=0.0, omega=None, radius: float = 1.0) -> "ExtrinsicData":
        """Hand-built data on a round sphere of the given radius (no ambient data set)."""
        grid = as_grid(grid)
        gamma = grid.round_metric(radius)
        gamma_inv = np.linalg.inv(gamma)
        H = np.broadcast_to(np.asarray(H, dtype=float), grid.shape).copy()
        trk = np.broadcast_to(np.asarray(trk, dtype=float), grid.shape).copy()
        omega = np.zeros(grid.shape + (2,)) if omega is None else np.asarray(omega, dtype=float)
        omega_sq = np.einsum("...ab,...a,...b->...", gamma_inv, omega, omega)
        return cls(
            grid=grid,
            gamma=gamma,
            gamma_inv=gamma_inv,
            area_density=np.sqrt(np.linalg.det(gamma)),
            H=H,
            trk=trk,
            omega_t=omega,
            pinn=-trk,
            pi_nu_norm=np.sqrt(trk**2 + omega_sq),
            pi_nu_tangential_norm=np.sqrt(omega_sq),
            second_form_tangential=0.5 * trk[..., None, None] * gamma,
        )

    def normal_component(self, vectors: np.ndarray) -> np.ndarray:
        """g(X, nu) for chart-component vectors X sampled on the nodes."""
        if self.nu is None or self.ambient_metric is None:
            raise DegenerateGeometryError("hand-built extrinsic data carries no ambient normal")
        return np.einsum("...ij,...i,...j->...", self.ambient_metric, vectors, self.nu)


def induced_metric(g: np.ndarray, tangents: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...ai,...bj->...ab", g, tangents, tangents)


def checked_inverse_2d(gamma: np.ndarray, what: str = "induced metric") -> np.ndarray:
    det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] * gamma[..., 1, 0]
    scale = np.max(np.abs(det))
    if not scale > 0.0 or np.any(det <= constants.DET_FLOOR * scale):
        raise DegenerateGeometryError(f"{what} is not positive definite (min det {np.min(det):.3e})")
    inv = np.empty_like(gamma)
    inv[..., 0, 0] = gamma[..., 1, 1] / det
    inv[..., 1, 1] = gamma[..., 0, 0] / det
    inv[..., 0, 1] = -gamma[..., 0, 1] / det
    inv[..., 1, 0] = -gamma[..., 1, 0] / det
    return inv


def extrinsic_data(mesh: SurfaceMesh) -> ExtrinsicData:
    grid, ids, X = mesh.grid, mesh.ambient, mesh.points
    T = mesh.tangents

    g = ids.metric(X)
    ginv = ids.inverse_metric(X)
    dg = ids.metric_jacobian(X)
    gamma = induced_metric(g, T)
    gamma_inv = checked_inverse_2d(gamma)
    area_density = np.sqrt(np.linalg.det(gamma))

    n_cov = np.cross(T[..., 0, :], T[..., 1, :])
    nu = np.einsum("...ij,...j->...i", ginv, n_cov)
    norm_sq = np.einsum("...i,...i->...", n_cov, nu)
    if np.any(norm_sq <= constants.DET_FLOOR * np.max(np.abs(norm_sq))):
        raise DegenerateGeometryError(f"{mesh.label}: normal undefined (parametrization fold)")
    nu = nu / np.sqrt(norm_sq)[..., None]
    outward = grid.integrate(np.einsum("...i,...i->...", nu, X - mesh.centroid), area_density)
    if outward < 0.0:
        nu = -nu

    dnu = np.stack([grid.d_theta(nu, parity=1), grid.d_phi(nu)], axis=-2)
    gam1 = christoffel_first_kind(dg)
    A = np.einsum("...il,...ai,...bl->...ab", g, dnu, T) + np.einsum(
        "...ljk,...bl,...aj,...k->...ab", gam1, T, T, nu
    )
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    H = np.einsum("...ab,...ab->...", gamma_inv, A)

    k = ids.second_form(X)
    trk_g = np.einsum("...ij,...ij->...", ginv, k)
    k_tan = induced_metric(k, T)
    trk = np.einsum("...ab,...ab->...", gamma_inv, k_tan)
    omega = np.einsum("...ij,...i,...aj->...a", k, nu, T)
    pinn = np.einsum("...ij,...i,...j->...", k, nu, nu) - trk_g
    pi_nu = np.einsum("...ij,...i->...j", k, nu) - trk_g[..., None] * np.einsum("...ij,...i->...j", g, nu)
    pi_nu_norm = np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", ginv, pi_nu, pi_nu), 0.0))
    omega_norm = np.sqrt(np.maximum(np.einsum("...ab,...a,...b->...", gamma_inv, omega, omega), 0.0))

    return ExtrinsicData(
        grid=grid,
        gamma=gamma,
        gamma_inv=gamma_inv,
        area_density=area_density,
        H=H,
        trk=trk,
        omega_t=omega,
        pinn=pinn,
        pi_nu_norm=pi_nu_norm,
        pi_nu_tangential_norm=omega_norm,
        second_form_tangential=k_tan,
        nu=nu,
        points=X,
        tangents=T,
        ambient_metric=g,
        shape_operator=A,
    )


def integrate(surface, values) -> float:
    """Integral of a scalar node field against the induced area element of `surface`."""
    values = np.asarray(values, dtype=float)
    if values.shape != surface.grid.shape:
        raise GridMismatchError(f"field of shape {values.shape} on a {surface.grid.shape} grid")
    if isinstance(surface, SurfaceMesh):
        surface = extrinsic_data(surface)
    return surface.grid.integrate(values, surface.area_density)


def area(surface) -> float:
    return integrate(surface, np.ones(surface.grid.shape))


def area_radius(surface) -> float:
    return math.sqrt(area(surface) / constants.OMEGA_2)


@dataclass(frozen=True, eq=False)
class ExpansionData:
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    classification: str
    band: float

    def to_record(self):
        return {
            "classification": self.classification,
            "band": self.band,
            "theta_plus_min": float(np.min(self.theta_plus)),
            "theta_plus_max": float(np.max(self.theta_plus)),
            "theta_minus_min": float(np.min(self.theta_minus)),
            "theta_minus_max": float(np.max(self.theta_minus)),
        }


def classify_expansions(theta_plus: np.ndarray, theta_minus: np.ndarray, band: float) -> str:
    plus_zero = float(np.max(np.abs(theta_plus))) <= band
    minus_zero = float(np.max(np.abs(theta_minus))) <= band
    if plus_zero and minus_zero:
        return constants.EXPANSION_BOTH
    if plus_zero:
        return constants.EXPANSION_MOTS
    if minus_zero:
        return constants.EXPANSION_MITS
    if float(np.max(theta_plus)) <= band:
        return constants.EXPANSION_WEAK_OUTER
    if float(np.max(theta_minus)) <= band:
        return constants.EXPANSION_WEAK_INNER
    return constants.EXPANSION_UNTRAPPED


def null_expansions(ext: ExtrinsicData, eps_mots: Optional[float] = None) -> ExpansionData:
    """theta_pm = H +- tr_Sigma k, classified with a zero band of eps_mots (default 1e-6 / r_area)."""
    theta_plus = ext.H + ext.trk
    theta_minus = ext.H - ext.trk
    band = eps_mots if eps_mots is not None else constants.EPS_MOTS / area_radius(ext)
    return ExpansionData(
        theta_plus=theta_plus,
        theta_minus=theta_minus,
        classification=classify_expansions(theta_plus, theta_minus, band),
        band=band,
    )
