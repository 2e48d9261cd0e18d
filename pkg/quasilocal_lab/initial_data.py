"""Initial data sets (M, g, k) on coordinate charts.

Metric and second fundamental form are evaluated pointwise on arrays of chart
points with shape (..., 3). Derivative arrays carry the differentiation index
before the tensor indices: metric_jacobian(x)[..., k, i, j] = d_k g_ij and
metric_hessian(x)[..., l, k, i, j] = d_l d_k g_ij.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve

from quasilocal_lab import constants
from quasilocal_lab.errors import (
    CatalogError,
    ChartError,
    DegenerateGeometryError,
    NotAsymptoticallyFlatError,
)
from quasilocal_lab.sphere_grid import SphereGrid, as_grid

logger = logging.getLogger(__name__)

TensorFn = Callable[[np.ndarray], np.ndarray]


# --- Charts & regions ---


@dataclass(frozen=True)
class Chart:
    """Coordinate box with an optional excluded ball around `center`."""

    lower: Tuple[float, float, float] = (-math.inf, -math.inf, -math.inf)
    upper: Tuple[float, float, float] = (math.inf, math.inf, math.inf)
    inner_radius: Optional[float] = None
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    asymptotically_flat: bool = False
    decay_rate: Optional[float] = None

    def contains(self, points: np.ndarray, margin: float = 0.0) -> bool:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if np.any(pts - margin <= np.asarray(self.lower)) or np.any(pts + margin >= np.asarray(self.upper)):
            return False
        if self.inner_radius is not None:
            r = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
            if np.any(r - margin <= self.inner_radius):
                return False
        return True

    def check(self, points: np.ndarray, margin: float = 0.0, what: str = "points"):
        if not self.contains(points, margin):
            raise ChartError(f"{what} leave the chart (stencil margin {margin:g}): {self}")


@dataclass(frozen=True)
class RegionSpec:
    """Sample set for bulk quantities: a ball, a spherical shell or a Cartesian box.

    Ball and shell regions are r-theta-phi product grids; a ball includes its center.
    """

    kind: str = "ball"
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    r_inner: float = 0.0
    r_outer: float = 1.0
    lower: Tuple[float, float, float] = (-1.0, -1.0, -1.0)
    upper: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_radial: int = 9
    n_box: int = 9
    grid: Tuple[int, int] = (8, 16)

    def __post_init__(self):
        if self.kind not in ("ball", "shell", "box"):
            raise ValueError(f"Unknown region kind '{self.kind}'")
        if self.kind == "shell" and not 0.0 < self.r_inner < self.r_outer:
            raise ValueError(f"Shell needs 0 < r_inner < r_outer, got ({self.r_inner}, {self.r_outer})")
        if self.kind == "ball" and self.r_outer <= 0.0:
            raise ValueError(f"Ball radius must be positive, got {self.r_outer}")

    def points(self) -> np.ndarray:
        center = np.asarray(self.center, dtype=float)
        if self.kind == "box":
            axes = [np.linspace(lo, hi, self.n_box) for lo, hi in zip(self.lower, self.upper)]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            return mesh.reshape(-1, 3)
        r_min = 0.0 if self.kind == "ball" else self.r_inner
        directions = as_grid(self.grid).unit_sphere_points().reshape(-1, 3)
        shells = [center[None, :] + r * directions for r in np.linspace(r_min, self.r_outer, self.n_radial) if r > 0.0]
        if self.kind == "ball":
            shells.insert(0, center[None, :])
        return np.concatenate(shells, axis=0)


# --- Finite differences ---


def fd4_derivative(fn: TensorFn, x: np.ndarray, h: float) -> np.ndarray:
    """4th-order centered derivative of a tensor-valued map along the three axes."""
    out = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out.append((-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12.0 * h))
    return np.stack(out, axis=x.ndim - 1)


def fd4_axis(values: np.ndarray, spacing: float, axis: int) -> np.ndarray:
    """4th-order centered differences along `axis`, 2nd-order one-sided at the two outer layers."""
    out = np.gradient(values, spacing, axis=axis, edge_order=2)
    n = values.shape[axis]
    if n < 5:
        return out

    def sl(start, stop):
        index = [slice(None)] * values.ndim
        index[axis] = slice(start, stop)
        return tuple(index)

    interior = (
        -values[sl(4, n)] + 8 * values[sl(3, n - 1)] - 8 * values[sl(1, n - 3)] + values[sl(0, n - 4)]
    ) / (12.0 * spacing)
    out[sl(2, n - 2)] = interior
    return out


# --- Data sets ---


@dataclass(frozen=True)
class InitialDataSet:
    name: str
    kind: str
    chart: Chart
    metric_fn: TensorFn
    second_form_fn: TensorFn
    params: Dict[str, float] = field(default_factory=dict)
    inverse_metric_fn: Optional[TensorFn] = None
    metric_jacobian_fn: Optional[TensorFn] = None
    metric_hessian_fn: Optional[TensorFn] = None
    second_form_jacobian_fn: Optional[TensorFn] = None
    fd_step: float = constants.CATALOG_FD_STEP

    @property
    def decay_rate(self) -> Optional[float]:
        return self.chart.decay_rate

    def metric(self, x: np.ndarray) -> np.ndarray:
        return self.metric_fn(np.asarray(x, dtype=float))

    def second_form(self, x: np.ndarray) -> np.ndarray:
        return self.second_form_fn(np.asarray(x, dtype=float))

    def inverse_metric(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.inverse_metric_fn is not None:
            return self.inverse_metric_fn(x)
        g = self.metric_fn(x)
        det = np.linalg.det(g)
        if np.any(det <= constants.DET_FLOOR):
            raise DegenerateGeometryError(f"{self.name}: metric not invertible (min det {np.min(det):.3e})")
        return np.linalg.inv(g)

    def metric_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.metric_jacobian_fn is not None:
            return self.metric_jacobian_fn(x)
        return fd4_derivative(self.metric_fn, x, self.fd_step)

    def metric_hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.metric_hessian_fn is not None:
            return self.metric_hessian_fn(x)
        hess = fd4_derivative(self.metric_jacobian, x, self.fd_step)
        return 0.5 * (hess + np.swapaxes(hess, x.ndim - 1, x.ndim))

    def second_form_jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.second_form_jacobian_fn is not None:
            return self.second_form_jacobian_fn(x)
        return fd4_derivative(self.second_form_fn, x, self.fd_step)

    def derivative_margin(self, order: int) -> float:
        """Distance the stencils reach beyond an evaluation point for derivatives up to `order`."""
        analytic = [self.metric_jacobian_fn is not None, self.metric_hessian_fn is not None]
        if all(analytic[:order]):
            return 0.0
        missing = sum(1 for a in analytic[:order] if not a)
        return 2.0 * constants.FD_HALF_WIDTH * self.fd_step * missing

    def with_finite_differences(self, step: float) -> "InitialDataSet":
        """Same data with every derivative taken by 4th-order differences of step `step`."""
        return replace(
            self,
            kind=f"{self.kind}+fd",
            metric_jacobian_fn=None,
            metric_hessian_fn=None,
            second_form_jacobian_fn=None,
            fd_step=float(step),
        )

    def scaled(self, lam: float) -> "InitialDataSet":
        """Pull back by x -> x / lam and rescale: g -> lam^2 g, k -> lam k in the new chart.

        Chart coordinates scale by lam while the component functions keep their
        shape, so lengths scale by lam, H by 1/lam and all raw mass integrals by lam.
        """
        if lam <= 0.0:
            raise CatalogError(f"scale factor must be positive, got {lam}")
        g, k = self.metric_fn, self.second_form_fn
        dg, ddg, dk = self.metric_jacobian, self.metric_hessian, self.second_form_jacobian
        ginv = self.inverse_metric
        c = self.chart
        chart = Chart(
            lower=tuple(lam * v for v in c.lower),
            upper=tuple(lam * v for v in c.upper),
            inner_radius=None if c.inner_radius is None else lam * c.inner_radius,
            center=tuple(lam * v for v in c.center),
            asymptotically_flat=c.asymptotically_flat,
            decay_rate=c.decay_rate,
        )
        return InitialDataSet(
            name=f"{self.name}*{lam:g}",
            kind=self.kind,
            chart=chart,
            metric_fn=lambda x: g(x / lam),
            second_form_fn=lambda x: k(x / lam) / lam,
            params={**self.params, "scale": lam},
            inverse_metric_fn=lambda x: ginv(x / lam),
            metric_jacobian_fn=lambda x: dg(x / lam) / lam,
            metric_hessian_fn=lambda x: ddg(x / lam) / lam**2,
            second_form_jacobian_fn=lambda x: dk(x / lam) / lam**2,
            fd_step=self.fd_step * lam,
        )


def _eye(x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()


def _zeros(shape_extra: Tuple[int, ...]) -> TensorFn:
    return lambda x: np.zeros(x.shape[:-1] + shape_extra)


def _outer(x: np.ndarray) -> np.ndarray:
    return x[..., :, None] * x[..., None, :]


def _sym_delta_x(x: np.ndarray) -> np.ndarray:
    """T[..., k, i, j] = delta_ki x_j + delta_kj x_i."""
    eye = np.eye(3)
    return eye[:, :, None] * x[..., None, None, :] + eye[:, None, :] * x[..., None, :, None]


def _flat() -> InitialDataSet:
    return InitialDataSet(
        name=constants.CATALOG_FLAT,
        kind="catalog",
        chart=Chart(asymptotically_flat=True, decay_rate=1.0),
        metric_fn=_eye,
        second_form_fn=_zeros((3, 3)),
        inverse_metric_fn=_eye,
        metric_jacobian_fn=_zeros((3, 3, 3)),
        metric_hessian_fn=_zeros((3, 3, 3, 3)),
        second_form_jacobian_fn=_zeros((3, 3, 3)),
    )


def _schwarzschild(m: float) -> InitialDataSet:
    # areal radius: g = delta + b(r) x x with b = 2m / (r^2 (r - 2m))
    def b_of(r):
        return 2.0 * m / (r**2 * (r - 2.0 * m))

    def metric(x):
        r = np.linalg.norm(x, axis=-1)[..., None, None]
        return np.eye(3) + b_of(r) * _outer(x)

    def inverse_metric(x):
        r = np.linalg.norm(x, axis=-1)[..., None, None]
        return np.eye(3) - (2.0 * m / r**3) * _outer(x)

    def jacobian(x):
        r = np.linalg.norm(x, axis=-1)[..., None, None, None]
        b = b_of(r)
        db = -2.0 * m * (3.0 * r**2 - 4.0 * m * r) / (r**3 - 2.0 * m * r**2) ** 2
        xxx = x[..., :, None, None] * _outer(x)[..., None, :, :]
        return db / r * xxx + b * _sym_delta_x(x)

    return InitialDataSet(
        name=constants.CATALOG_SCHWARZSCHILD,
        kind="catalog",
        chart=Chart(inner_radius=2.0 * m, asymptotically_flat=True, decay_rate=1.0),
        metric_fn=metric,
        second_form_fn=_zeros((3, 3)),
        params={"m": m},
        inverse_metric_fn=inverse_metric,
        metric_jacobian_fn=jacobian,
        second_form_jacobian_fn=_zeros((3, 3, 3)),
    )


def _hyperboloid(a: float) -> InitialDataSet:
    # unit-speed hyperboloid t = sqrt(a^2 + |x|^2) as a graph over R^3
    def metric(x):
        s = (a**2 + np.sum(x**2, axis=-1))[..., None, None]
        return np.eye(3) - _outer(x) / s

    def inverse_metric(x):
        return np.eye(3) + _outer(x) / a**2

    def jacobian(x):
        s = (a**2 + np.sum(x**2, axis=-1))[..., None, None, None]
        xxx = x[..., :, None, None] * _outer(x)[..., None, :, :]
        return -_sym_delta_x(x) / s + 2.0 * xxx / s**2

    return InitialDataSet(
        name=constants.CATALOG_HYPERBOLOID,
        kind="catalog",
        chart=Chart(asymptotically_flat=False),
        metric_fn=metric,
        second_form_fn=lambda x: metric(x) / a,
        params={"a": a},
        inverse_metric_fn=inverse_metric,
        metric_jacobian_fn=jacobian,
        second_form_jacobian_fn=lambda x: jacobian(x) / a,
    )


def _perturbed_flat(eps: float, length: float) -> InitialDataSet:
    def second_form(x):
        q = (1.0 + np.sum(x**2, axis=-1) / length**2)[..., None, None]
        return eps * (np.eye(3) + _outer(x) / length**2) / q

    def second_form_jacobian(x):
        q = (1.0 + np.sum(x**2, axis=-1) / length**2)[..., None, None, None]
        numerator = (np.eye(3) + _outer(x) / length**2)[..., None, :, :]
        dq = (2.0 * x / length**2)[..., :, None, None]
        return eps * (_sym_delta_x(x) / (length**2 * q) - numerator * dq / q**2)

    flat = _flat()
    return replace(
        flat,
        name=constants.CATALOG_PERTURBED_FLAT,
        chart=Chart(asymptotically_flat=False),
        second_form_fn=second_form,
        second_form_jacobian_fn=second_form_jacobian,
        params={"eps": eps, "length": length},
    )


def _require_positive(name: str, params: Dict[str, float], key: str, default: Optional[float] = None) -> float:
    value = params.get(key, default)
    if value is None:
        raise CatalogError(f"{name}: missing parameter '{key}'")
    value = float(value)
    if not value > 0.0:
        raise CatalogError(f"{name}: parameter '{key}' must be > 0, got {value}")
    return value


def build_catalog_data(name: str, params: Optional[Dict[str, float]] = None) -> InitialDataSet:
    params = dict(params or {})
    if name == constants.CATALOG_FLAT:
        return _flat()
    if name == constants.CATALOG_SCHWARZSCHILD:
        return _schwarzschild(_require_positive(name, params, "m"))
    if name == constants.CATALOG_HYPERBOLOID:
        return _hyperboloid(_require_positive(name, params, "a"))
    if name == constants.CATALOG_PERTURBED_FLAT:
        eps = float(params.get("eps", 0.1))
        return _perturbed_flat(eps, _require_positive(name, params, "length", 1.0))
    raise CatalogError(f"Unknown catalog entry '{name}'. Available: {', '.join(constants.CATALOG_NAMES)}")


def custom_data(
    metric: TensorFn,
    second_form: TensorFn,
    chart: Optional[Chart] = None,
    name: str = "custom",
    fd_step: float = constants.CUSTOM_FD_STEP,
) -> InitialDataSet:
    """Data from user callables; all derivatives by 4th-order differences."""
    return InitialDataSet(
        name=name,
        kind="custom",
        chart=chart or Chart(),
        metric_fn=metric,
        second_form_fn=second_form,
        fd_step=fd_step,
    )


class _GridField:
    """Cubic interpolation of a tensor-valued array sampled on a uniform box."""

    def __init__(self, axes, values: np.ndarray, tensor_shape: Tuple[int, ...]):
        self.tensor_shape = tensor_shape
        flat = values.reshape(values.shape[:3] + (-1,))
        # direct spline solve so the interpolant matches the samples at the nodes
        self._interp = RegularGridInterpolator(axes, flat, method="cubic", bounds_error=True, solver=spsolve)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        out = self._interp(pts.reshape(-1, 3))
        return out.reshape(pts.shape[:-1] + self.tensor_shape)


def sampled_data(
    metric_samples: np.ndarray,
    second_form_samples: np.ndarray,
    origin: Sequence[float],
    spacing: Sequence[float],
    decay_rate: Optional[float] = None,
    asymptotically_flat: bool = False,
    name: str = "sampled",
) -> InitialDataSet:
    """Data set from samples g_ij, k_ij of shape (nx, ny, nz, 3, 3) on a uniform box."""
    dims = metric_samples.shape[:3]
    if min(dims) < 5:
        raise ChartError(f"sampled grid needs >= 5 nodes per axis for the 4th-order stencil, got {dims}")
    axes = tuple(o + h * np.arange(n) for o, h, n in zip(origin, spacing, dims))
    det = np.linalg.det(metric_samples)
    if np.any(det <= constants.DET_FLOOR):
        raise DegenerateGeometryError(f"{name}: metric samples not positive definite (min det {np.min(det):.3e})")

    dg = np.stack([fd4_axis(metric_samples, spacing[k], axis=k) for k in range(3)], axis=3)
    ddg = np.stack([fd4_axis(dg, spacing[k], axis=k) for k in range(3)], axis=3)
    ddg = 0.5 * (ddg + np.swapaxes(ddg, 3, 4))
    dk = np.stack([fd4_axis(second_form_samples, spacing[k], axis=k) for k in range(3)], axis=3)

    # one stencil width inside the box for the derivative arrays' one-sided layers
    inset = [constants.FD_HALF_WIDTH * h for h in spacing]
    chart = Chart(
        lower=tuple(a[0] + d for a, d in zip(axes, inset)),
        upper=tuple(a[-1] - d for a, d in zip(axes, inset)),
        asymptotically_flat=asymptotically_flat,
        decay_rate=decay_rate,
    )
    return InitialDataSet(
        name=name,
        kind="sampled",
        chart=chart,
        metric_fn=_GridField(axes, metric_samples, (3, 3)),
        second_form_fn=_GridField(axes, second_form_samples, (3, 3)),
        params={"dims": dims, "spacing": tuple(spacing)},
        metric_jacobian_fn=_GridField(axes, dg, (3, 3, 3)),
        metric_hessian_fn=_GridField(axes, ddg, (3, 3, 3, 3)),
        second_form_jacobian_fn=_GridField(axes, dk, (3, 3, 3)),
        fd_step=float(max(spacing)),
    )


# --- Geometry helpers ---


def christoffel_first_kind(dg: np.ndarray) -> np.ndarray:
    """G[..., l, i, j] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)."""
    return 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)


def _checked_inverse(ids: InitialDataSet, points: np.ndarray, g: np.ndarray) -> np.ndarray:
    det = np.linalg.det(g)
    if np.any(det <= constants.DET_FLOOR):
        raise DegenerateGeometryError(f"{ids.name}: metric not invertible (min det {np.min(det):.3e})")
    return ids.inverse_metric(points)


def scalar_curvature(ids: InitialDataSet, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    g = ids.metric(points)
    ginv = _checked_inverse(ids, points, g)
    dg = ids.metric_jacobian(points)
    ddg = ids.metric_hessian(points)
    return _scalar_curvature(ginv, dg, ddg)


def _scalar_curvature(ginv, dg, ddg):
    gam1 = christoffel_first_kind(dg)
    gam = np.einsum("...kl,...lij->...kij", ginv, gam1)
    # dgam1[..., m, l, i, j] = d_m G_lij
    dgam1 = 0.5 * (np.swapaxes(ddg, -3, -2) + np.moveaxis(ddg, -3, -1) - ddg)
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    dgam = np.einsum("...mkl,...lij->...mkij", dginv, gam1) + np.einsum("...kl,...mlij->...mkij", ginv, dgam1)
    ricci = (
        np.einsum("...kkij->...ij", dgam)
        - np.einsum("...jkik->...ij", dgam)
        + np.einsum("...kkl,...lij->...ij", gam, gam)
        - np.einsum("...kjl,...lik->...ij", gam, gam)
    )
    return np.einsum("...ij,...ij->...", ginv, ricci)


# --- Constraints ---


@dataclass(frozen=True)
class ConstraintFields:
    points: np.ndarray
    mu: np.ndarray
    j: np.ndarray
    pi: np.ndarray
    dec_margin: np.ndarray
    j_norm: np.ndarray
    trace_k: np.ndarray
    trace_pi: np.ndarray
    scalar_curvature: np.ndarray


def constraint_fields(ids: InitialDataSet, region: RegionSpec) -> ConstraintFields:
    points = region.points()
    ids.chart.check(points, ids.derivative_margin(2), what=f"region {region.kind}")

    g = ids.metric(points)
    ginv = _checked_inverse(ids, points, g)
    dg = ids.metric_jacobian(points)
    ddg = ids.metric_hessian(points)
    k = ids.second_form(points)
    dk = ids.second_form_jacobian(points)

    scal = _scalar_curvature(ginv, dg, ddg)
    trk = np.einsum("...ij,...ij->...", ginv, k)
    k_sq = np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, k, k)
    mu = 0.5 * (scal + trk**2 - k_sq)

    pi = k - trk[..., None, None] * g
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    dtrk = np.einsum("...lab,...ab->...l", dginv, k) + np.einsum("...ab,...lab->...l", ginv, dk)
    dpi = dk - dtrk[..., :, None, None] * g[..., None, :, :] - trk[..., None, None, None] * dg
    gam = np.einsum("...kl,...lij->...kij", ginv, christoffel_first_kind(dg))
    cov = (
        dpi
        - np.einsum("...mli,...mj->...lij", gam, pi)
        - np.einsum("...mlj,...im->...lij", gam, pi)
    )
    j = np.einsum("...il,...lij->...j", ginv, cov)
    j_norm = np.sqrt(np.maximum(np.einsum("...ij,...i,...j->...", ginv, j, j), 0.0))
    trace_pi = np.einsum("...ij,...ij->...", ginv, pi)

    return ConstraintFields(
        points=points,
        mu=mu,
        j=j,
        pi=pi,
        dec_margin=mu - j_norm,
        j_norm=j_norm,
        trace_k=trk,
        trace_pi=trace_pi,
        scalar_curvature=scal,
    )


def dec_check(cf: ConstraintFields, tolerance: float = constants.MARGIN_TOL) -> Tuple[float, List[Tuple[float, float, float]]]:
    """Minimum of mu - |J|_g and the points where it drops below -tolerance."""
    min_margin = float(np.min(cf.dec_margin))
    bad = cf.dec_margin < -tolerance
    violations = [tuple(float(c) for c in p) for p in cf.points[bad]]
    if violations:
        logger.info(f"DEC violated at {len(violations)} of {cf.dec_margin.size} points (min margin {min_margin:.3e})")
    return min_margin, violations


# --- ADM ---


@dataclass(frozen=True)
class AdmResult:
    energy: float
    momentum: Tuple[float, float, float]
    mass: float
    valid: bool
    shell_radii: Tuple[float, ...]
    shell_energy: Tuple[float, ...]
    shell_momentum: Tuple[Tuple[float, float, float], ...]
    extrapolation_order: int

    def to_record(self) -> Dict[str, object]:
        return {
            "energy": self.energy,
            "momentum_x": self.momentum[0],
            "momentum_y": self.momentum[1],
            "momentum_z": self.momentum[2],
            "mass": self.mass,
            "valid": self.valid,
            "extrapolation_order": self.extrapolation_order,
            "shell_radii": list(self.shell_radii),
            "shell_energy": list(self.shell_energy),
        }


def _shell_fluxes(ids: InitialDataSet, grid: SphereGrid, center: np.ndarray, r: float):
    directions = grid.unit_sphere_points()
    points = center + r * directions
    dg = ids.metric_jacobian(points)
    g = ids.metric(points)
    ginv = ids.inverse_metric(points)
    k = ids.second_form(points)
    trk = np.einsum("...ij,...ij->...", ginv, k)
    pi = k - trk[..., None, None] * g

    # Euclidean normal and area element
    density = np.broadcast_to((r**2 * grid.sin_theta)[:, None], grid.shape)
    div_term = np.einsum("...iij->...j", dg) - np.einsum("...jii->...j", dg)
    energy = grid.integrate(np.einsum("...j,...j->...", div_term, directions), density)
    energy /= 2.0 * constants.MASS_NORMALIZATION
    momentum = tuple(
        grid.integrate(np.einsum("...j,...j->...", pi[..., i, :], directions), density)
        / constants.MASS_NORMALIZATION
        for i in range(3)
    )
    return energy, momentum


def adm_energy_momentum(
    ids: InitialDataSet,
    radii: Sequence[float],
    grid=(24, 48),
    center: Sequence[float] = (0.0, 0.0, 0.0),
) -> AdmResult:
    if not ids.chart.asymptotically_flat:
        raise NotAsymptoticallyFlatError(f"{ids.name}: chart is not flagged asymptotically flat")
    radii = sorted(float(r) for r in radii)
    if len(radii) < 3:
        raise ValueError(f"ADM extrapolation needs at least 3 radii, got {len(radii)}")
    grid = as_grid(grid)
    center = np.asarray(center, dtype=float)
    for r in radii:
        ids.chart.check(center + r * grid.unit_sphere_points(), ids.derivative_margin(1), what=f"ADM shell r={r:g}")

    energies, momenta = [], []
    for r in radii:
        e, p = _shell_fluxes(ids, grid, center, r)
        energies.append(e)
        momenta.append(p)
        logger.debug(f"ADM shell r={r:g}: E={e:.8f}")

    inv_r = 1.0 / np.asarray(radii)
    order = len(radii) - 1
    energy = float(np.polyfit(inv_r, energies, order)[-1])
    momentum = tuple(float(np.polyfit(inv_r, [p[i] for p in momenta], order)[-1]) for i in range(3))
    p_sq = sum(p * p for p in momentum)
    valid = energy**2 >= p_sq
    if not valid:
        logger.warning(f"{ids.name}: E^2 < |P|^2 (E={energy:.6g}, |P|={math.sqrt(p_sq):.6g}); ADM mass flagged invalid")
    return AdmResult(
        energy=energy,
        momentum=momentum,
        mass=math.sqrt(max(energy**2 - p_sq, 0.0)),
        valid=valid,
        shell_radii=tuple(radii),
        shell_energy=tuple(energies),
        shell_momentum=tuple(momenta),
        extrapolation_order=order,
    )


def decay_check(ids: InitialDataSet, radii: Sequence[float], grid=(12, 24)) -> Dict[float, float]:
    """max |g_ij - delta_ij| * r^q on coordinate shells; pointwise decay only."""
    if ids.decay_rate is None:
        raise NotAsymptoticallyFlatError(f"{ids.name}: no decay rate declared")
    grid = as_grid(grid)
    out = {}
    for r in radii:
        g = ids.metric(r * grid.unit_sphere_points())
        out[float(r)] = float(np.max(np.abs(g - np.eye(3)))) * r**ids.decay_rate
    return out
