"""Quasilocal mass functionals on closed surfaces.

Every functional returns a MassReport holding the bare surface integral (raw) and
raw / 8pi (normalized). Inadmissible inputs produce flagged reports, not errors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from quasilocal_lab import constants
from quasilocal_lab.errors import GridMismatchError, HypothesisError, WeylConditionError
from quasilocal_lab.initial_data import InitialDataSet, RegionSpec, fd4_derivative, scalar_curvature
from quasilocal_lab.sphere_grid import SphereGrid
from quasilocal_lab.surface_geometry import (
    ExtrinsicData,
    SurfaceMesh,
    checked_inverse_2d,
    coordinate_sphere,
    extrinsic_data,
    integrate,
)
from quasilocal_lab.weyl_embedding import EmbeddingOptions, embed_convex, weyl_condition

logger = logging.getLogger(__name__)

BOOST_FAMILY_NOTE = "gauge infimum over the boosted-frame family; local minimum"


@dataclass(eq=False)
class MassReport:
    functional: str
    raw: float
    admissibility: Dict[str, float]
    admissible: bool
    fields: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    extras: Dict[str, object] = field(default_factory=dict)

    @property
    def normalized(self) -> float:
        return self.raw / constants.MASS_NORMALIZATION

    def to_record(self) -> Dict[str, object]:
        record = {
            "functional": self.functional,
            "raw": self.raw,
            "normalized": self.normalized,
            "admissible": self.admissible,
        }
        for name, margin in self.admissibility.items():
            record[f"margin_{name}"] = margin
        for name, value in self.extras.items():
            if isinstance(value, (bool, int, float, str)) or value is None:
                record[name] = value
        return record


def _check_grid(H0: np.ndarray, ext: ExtrinsicData):
    if np.shape(H0) != ext.grid.shape:
        raise GridMismatchError(f"H0 has shape {np.shape(H0)}, surface grid is {ext.grid.shape}")


def _margin_report(functional: str, H0, ext: ExtrinsicData, effective_H: np.ndarray, margins: Dict[str, np.ndarray]) -> MassReport:
    _check_grid(H0, ext)
    mins = {name: float(np.min(values)) for name, values in margins.items()}
    admissible = all(m > constants.MARGIN_TOL for m in mins.values())
    raw = integrate(ext, np.asarray(H0) - effective_H)
    if not admissible:
        logger.info(f"{functional}: inadmissible surface (margins {mins})")
    return MassReport(
        functional=functional,
        raw=raw,
        admissibility=mins,
        admissible=admissible,
        fields={"integrand": np.asarray(H0) - effective_H},
    )


def brown_york(H0: np.ndarray, ext: ExtrinsicData) -> MassReport:
    return _margin_report("BY", H0, ext, ext.H, {"H": ext.H})


def mean_curvature_vector_norm(ext: ExtrinsicData) -> np.ndarray:
    return np.sqrt(np.maximum(ext.H**2 - ext.trk**2, 0.0))


def kijowski_liu_yau(H0: np.ndarray, ext: ExtrinsicData) -> MassReport:
    return _margin_report("KLY", H0, ext, mean_curvature_vector_norm(ext), {"H_minus_abs_trk": ext.H - np.abs(ext.trk)})


def w_mass(H0: np.ndarray, ext: ExtrinsicData) -> MassReport:
    effective = ext.H - ext.pi_nu_norm
    return _margin_report("W", H0, ext, effective, {"H_minus_pi_nu": effective})


# --- Gauge family ---


@dataclass(frozen=True, eq=False)
class GaugeField:
    phi: np.ndarray
    tau: np.ndarray

    @classmethod
    def zero(cls, grid: SphereGrid) -> "GaugeField":
        return cls(phi=np.zeros(grid.shape), tau=np.zeros(grid.shape))

    def tail_norm(self, grid: SphereGrid) -> float:
        return max(grid.tail_ratio(self.phi), grid.tail_ratio(self.tau))


class _TauGeometry(NamedTuple):
    d_tau: np.ndarray
    grad_tau: np.ndarray
    grad_sq: np.ndarray
    V: np.ndarray
    laplacian: np.ndarray
    hessian: np.ndarray


def metric_christoffels(grid: SphereGrid, gamma: np.ndarray, gamma_inv: np.ndarray) -> np.ndarray:
    """Gamma[..., c, a, b] of a sphere metric by spectral differentiation."""
    parity = np.array([[1, -1], [-1, 1]])
    d_gamma = np.empty(grid.shape + (2, 2, 2))
    for a in range(2):
        for b in range(2):
            d_gamma[..., 0, a, b] = grid.d_theta(gamma[..., a, b], parity[a, b])
            d_gamma[..., 1, a, b] = grid.d_phi(gamma[..., a, b])
    first = 0.5 * (np.swapaxes(d_gamma, -3, -2) + np.moveaxis(d_gamma, -3, -1) - d_gamma)
    return np.einsum("...cd,...dab->...cab", gamma_inv, first)


def _tau_geometry(grid: SphereGrid, gamma: np.ndarray, gamma_inv: np.ndarray, tau: np.ndarray) -> _TauGeometry:
    grid.check_field(tau, "tau")
    tau_t, tau_p = grid.d_theta(tau, 1), grid.d_phi(tau)
    d_tau = np.stack([tau_t, tau_p], axis=-1)
    hess = np.empty(grid.shape + (2, 2))
    hess[..., 0, 0] = grid.d_theta(tau, 1, order=2)
    hess[..., 0, 1] = hess[..., 1, 0] = grid.d_phi(tau_t)
    hess[..., 1, 1] = grid.d_phi(tau, 2)
    christoffel = metric_christoffels(grid, gamma, gamma_inv)
    cov_hess = hess - np.einsum("...cab,...c->...ab", christoffel, d_tau)
    grad = np.einsum("...ab,...b->...a", gamma_inv, d_tau)
    grad_sq = np.einsum("...a,...a->...", grad, d_tau)
    return _TauGeometry(
        d_tau=d_tau,
        grad_tau=grad,
        grad_sq=grad_sq,
        V=np.sqrt(1.0 + grad_sq),
        laplacian=np.einsum("...ab,...ab->...", gamma_inv, cov_hess),
        hessian=hess,
    )


def generalized_mean_curvature(ext: ExtrinsicData, gauge: GaugeField) -> np.ndarray:
    """h = V (H cosh phi + trk sinh phi) + (omega + d phi)(grad tau)."""
    grid = ext.grid
    geo = _tau_geometry(grid, ext.gamma, ext.gamma_inv, gauge.tau)
    d_phi = np.stack([grid.d_theta(gauge.phi, 1), grid.d_phi(gauge.phi)], axis=-1)
    connection = np.einsum("...a,...a->...", ext.omega_t + d_phi, geo.grad_tau)
    return geo.V * (ext.H * np.cosh(gauge.phi) + ext.trk * np.sinh(gauge.phi)) + connection


@dataclass(frozen=True)
class GaugeStrategy:
    max_iter: int = constants.GAUGE_MAX_ITER
    tol: float = constants.GAUGE_TOL
    max_step: float = 1.0


class GaugeMinimum(NamedTuple):
    phi: np.ndarray
    value: float
    value_at_zero: float
    converged: bool
    iterations: int


def _boost_objective(phi, V, H, trk, lap):
    return V * (H * np.cosh(phi) + trk * np.sinh(phi)) - phi * lap


def minimize_boost(ext_like, H, trk, omega, geo: _TauGeometry, strategy: GaugeStrategy) -> GaugeMinimum:
    """Minimize the integral of h over the boost field phi.

    The d phi(grad tau) term is integrated by parts into -phi * laplacian(tau), which
    makes the objective pointwise and strictly convex in phi when H > |trk|.
    """
    V, lap = geo.V, geo.laplacian
    constant = np.einsum("...a,...a->...", omega, geo.grad_tau)
    phi = np.zeros_like(H)
    scale = 1.0 + float(np.max(np.abs(lap))) + float(np.max(np.abs(V * H)))
    converged = False
    iterations = 0
    for iterations in range(1, strategy.max_iter + 1):
        grad = V * (H * np.sinh(phi) + trk * np.cosh(phi)) - lap
        if float(np.max(np.abs(grad))) <= strategy.tol * scale:
            converged = True
            break
        curvature = V * (H * np.cosh(phi) + trk * np.sinh(phi))
        step = np.clip(-grad / curvature, -strategy.max_step, strategy.max_step)
        f0 = _boost_objective(phi, V, H, trk, lap)
        slack = 1e-14 * (np.abs(f0) + 1.0)
        t = np.ones_like(phi)
        for _ in range(40):
            ok = _boost_objective(phi + t * step, V, H, trk, lap) <= f0 + slack
            if np.all(ok):
                break
            t = np.where(ok, t, 0.5 * t)
        phi = phi + t * step
    value = integrate(ext_like, _boost_objective(phi, V, H, trk, lap) + constant)
    at_zero = integrate(ext_like, V * H + constant)
    return GaugeMinimum(phi=phi, value=value, value_at_zero=at_zero, converged=converged, iterations=iterations)


@dataclass(eq=False)
class WangYauReport:
    energy: float
    physical_h: float
    physical_h_at_zero: float
    reference_h: float
    reference_h_at_zero: float
    physical_converged: bool
    reference_converged: bool
    embedding_residual_max: float
    embedding_converged: bool
    min_h: float
    ibp_defect: float
    projected_total_mean_curvature: float
    admissibility: Dict[str, float]
    admissible: bool
    notes: List[str] = field(default_factory=list)
    phi: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def normalized(self) -> float:
        return self.energy / constants.MASS_NORMALIZATION

    def to_record(self) -> Dict[str, object]:
        record = {
            "functional": "WY",
            "raw": self.energy,
            "normalized": self.normalized,
            "admissible": self.admissible,
            "physical_h": self.physical_h,
            "physical_h_at_zero": self.physical_h_at_zero,
            "reference_h": self.reference_h,
            "reference_h_at_zero": self.reference_h_at_zero,
            "physical_converged": self.physical_converged,
            "reference_converged": self.reference_converged,
            "embedding_residual_max": self.embedding_residual_max,
            "embedding_converged": self.embedding_converged,
            "min_h": self.min_h,
            "ibp_defect": self.ibp_defect,
            "projected_total_mean_curvature": self.projected_total_mean_curvature,
            "notes": "; ".join(self.notes),
        }
        for name, margin in self.admissibility.items():
            record[f"margin_{name}"] = margin
        return record


def wang_yau_energy(
    mesh: Optional[SurfaceMesh],
    ext: ExtrinsicData,
    tau: np.ndarray,
    strategy: Optional[GaugeStrategy] = None,
    embedding_options: Optional[EmbeddingOptions] = None,
) -> Tuple[float, WangYauReport]:
    """E_WY(tau) = reference term - physical term over the boosted-frame family."""
    strategy = strategy or GaugeStrategy()
    grid = ext.grid
    tau = np.asarray(tau, dtype=float)
    _check_grid(tau, ext)
    margin = float(np.min(ext.H - np.abs(ext.trk)))
    if margin <= constants.MARGIN_TOL:
        raise HypothesisError(f"Wang-Yau energy needs H > |tr_Sigma k| (min margin {margin:.3e})")
    label = mesh.label if mesh is not None else "surface"

    geo = _tau_geometry(grid, ext.gamma, ext.gamma_inv, tau)
    tail = grid.tail_ratio(tau)
    notes = [BOOST_FAMILY_NOTE]
    if tail > constants.TAIL_WARN_RATIO:
        notes.append(f"tau spectral tail {tail:.1e}")
        logger.warning(f"{label}: tau is under-resolved (spectral tail {tail:.1e})")

    physical = minimize_boost(ext, ext.H, ext.trk, ext.omega_t, geo, strategy)
    h_field = generalized_mean_curvature(ext, GaugeField(phi=physical.phi, tau=tau))
    ibp_defect = abs(integrate(ext, h_field) - physical.value)

    # reference surface: graph of tau over the Euclidean embedding of gamma + d tau^2
    gamma_hat = ext.gamma + geo.d_tau[..., :, None] * geo.d_tau[..., None, :]
    weyl = weyl_condition(gamma_hat, grid)
    if weyl.min_K <= 0.0:
        raise WeylConditionError(f"{label}: gamma + d tau^2 violates the Weyl condition (min K = {weyl.min_K:.3e})")
    emb = embed_convex(gamma_hat, embedding_options, grid)
    if not emb.converged:
        notes.append("reference embedding not converged")

    metric_inv = checked_inverse_2d(emb.metric, "embedded metric")
    L = -np.einsum("...abi,...i->...ab", emb.second_derivatives, emb.normal)
    grad_hat = np.einsum("...cd,...d->...c", metric_inv, geo.d_tau)
    grad_hat_sq = np.einsum("...c,...c->...", grad_hat, geo.d_tau)
    lapse = np.sqrt(np.maximum(1.0 - grad_hat_sq, 0.0))
    grad_hat_vec = np.einsum("...c,...ci->...i", grad_hat, emb.tangents)
    gamma_ref = emb.metric - geo.d_tau[..., :, None] * geo.d_tau[..., None, :]
    gamma_ref_inv = checked_inverse_2d(gamma_ref, "reference metric")
    H_ref = np.einsum("...ab,...ab->...", gamma_ref_inv, L)
    k_ref = (geo.hessian - np.einsum("...abi,...i->...ab", emb.second_derivatives, grad_hat_vec)) / lapse[..., None, None]
    trk_ref = np.einsum("...ab,...ab->...", gamma_ref_inv, k_ref)
    omega_ref = -np.einsum("...c,...ca->...a", grad_hat, L) / lapse[..., None]

    ref_margin = float(np.min(H_ref - np.abs(trk_ref)))
    admissibility = {"H_minus_abs_trk": margin, "reference_H_minus_abs_trk": ref_margin}
    if ref_margin <= constants.MARGIN_TOL:
        notes.append("reference surface has H <= |trk|; boost minimization undefined")
        reference = GaugeMinimum(phi=np.zeros(grid.shape), value=float("nan"), value_at_zero=float("nan"), converged=False, iterations=0)
    else:
        reference = minimize_boost(ext, H_ref, trk_ref, omega_ref, geo, strategy)

    energy = reference.value - physical.value
    report = WangYauReport(
        energy=energy,
        physical_h=physical.value,
        physical_h_at_zero=physical.value_at_zero,
        reference_h=reference.value,
        reference_h_at_zero=reference.value_at_zero,
        physical_converged=physical.converged,
        reference_converged=reference.converged,
        embedding_residual_max=emb.residual_max,
        embedding_converged=emb.converged,
        min_h=float(np.min(h_field)),
        ibp_defect=ibp_defect,
        projected_total_mean_curvature=emb.grid.integrate(emb.H0, emb.area_density),
        admissibility=admissibility,
        admissible=ref_margin > constants.MARGIN_TOL and emb.converged,
        notes=notes,
        phi=physical.phi,
    )
    logger.debug(f"{label}: E_WY={energy:.8f} (reference {reference.value:.8f}, physical {physical.value:.8f})")
    return energy, report


# --- Vector fields ---


@dataclass(frozen=True)
class VectorFieldData:
    """Bulk vector field X^i in chart components, optionally with an analytic div_g X."""

    vector: Callable[[np.ndarray], np.ndarray]
    divergence: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: float = constants.CUSTOM_FD_STEP
    label: str = "X"
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "VectorFieldData":
        return cls(
            vector=lambda x: np.zeros(np.shape(x)),
            divergence=lambda x: np.zeros(np.shape(x)[:-1]),
            label="0",
            is_zero=True,
        )

    @classmethod
    def position(cls, scale: float = 1.0, center: Sequence[float] = (0.0, 0.0, 0.0)) -> "VectorFieldData":
        c = np.asarray(center, dtype=float)
        return cls(vector=lambda x: scale * (np.asarray(x) - c), label=f"{scale:g}*x")

    @classmethod
    def constant(cls, value: Sequence[float]) -> "VectorFieldData":
        v = np.asarray(value, dtype=float)
        return cls(vector=lambda x: np.broadcast_to(v, np.shape(x)).copy(), label=f"const{tuple(v)}")

    def boundary_normal_component(self, ext: ExtrinsicData) -> np.ndarray:
        if self.is_zero:
            return np.zeros(ext.grid.shape)
        return ext.normal_component(self.vector(ext.points))

    def divergence_at(self, ids: InitialDataSet, points: np.ndarray) -> np.ndarray:
        if self.divergence is not None:
            return self.divergence(points)

        def densitized(x):
            return np.sqrt(np.linalg.det(ids.metric(x)))[..., None] * self.vector(x)

        jac = fd4_derivative(densitized, points, self.fd_step)
        return np.einsum("...ii->...", jac) / np.sqrt(np.linalg.det(ids.metric(points)))


def x_modified_energy(H0: np.ndarray, ext: ExtrinsicData, X: Optional[VectorFieldData] = None) -> MassReport:
    """raw = integral of H0 - (H - <X, nu>); carries u = H0 / (H - <X, nu>) when admissible."""
    X = X or VectorFieldData.zero()
    normal = X.boundary_normal_component(ext)
    effective = ext.H - normal
    report = _margin_report("X-modified", H0, ext, effective, {"H_minus_X_nu": effective})
    report.extras["X"] = X.label
    if report.admissible:
        report.fields["u"] = np.asarray(H0) / effective
    return report


class HypothesisMargins(NamedTuple):
    interior: float
    boundary: float


def vector_field_hypotheses(
    ids: InitialDataSet,
    region: RegionSpec,
    X: VectorFieldData,
    grid=(16, 32),
    boundary: Optional[SurfaceMesh] = None,
) -> HypothesisMargins:
    """min of R + 2 div X - 2|X|^2 over the region and min of H - <X, nu> on its boundary sphere."""
    points = region.points()
    margin = ids.derivative_margin(2) + (0.0 if X.divergence is not None else 2.0 * constants.FD_HALF_WIDTH * X.fd_step)
    ids.chart.check(points, margin, what=f"region {region.kind}")

    R = scalar_curvature(ids, points)
    vec = X.vector(points)
    x_sq = np.einsum("...ij,...i,...j->...", ids.metric(points), vec, vec)
    interior = float(np.min(R + 2.0 * X.divergence_at(ids, points) - 2.0 * x_sq))

    if boundary is None:
        if region.kind == "box":
            raise ValueError("box regions need an explicit boundary surface")
        boundary = coordinate_sphere(ids, region.center, region.r_outer, grid)
    ext = extrinsic_data(boundary)
    boundary_margin = float(np.min(ext.H - X.boundary_normal_component(ext)))
    return HypothesisMargins(interior=interior, boundary=boundary_margin)
