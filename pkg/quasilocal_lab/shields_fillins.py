"""Dominant energy shields and fill-in obstruction quantities for Bartnik data."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from quasilocal_lab import constants
from quasilocal_lab.errors import OutOfDomainError
from quasilocal_lab.initial_data import InitialDataSet, RegionSpec, constraint_fields, dec_check
from quasilocal_lab.sphere_grid import SphereGrid
from quasilocal_lab.surface_geometry import ExtrinsicData, SurfaceMesh, checked_inverse_2d, extrinsic_data

logger = logging.getLogger(__name__)

SHIELD_TOL = 1e-12


def _pole(sigma: float, n: int) -> float:
    return math.pi / (math.sqrt(sigma) * n)


def lambda_of_d(sigma: float, n: int, d: float) -> float:
    """lambda(d) = (sqrt(sigma) n / 2) tan(sqrt(sigma) n d / 2)."""
    if sigma < 0.0 or d < 0.0:
        raise ValueError(f"need sigma >= 0 and d >= 0, got sigma={sigma}, d={d}")
    if sigma == 0.0:
        return 0.0
    if d >= _pole(sigma, n):
        raise OutOfDomainError(f"d={d:g} reaches the tangent pole pi/(sqrt(sigma) n)={_pole(sigma, n):g}")
    root = math.sqrt(sigma) * n
    return 0.5 * root * math.tan(0.5 * root * d)


def psi_threshold(sigma: float, n: int, d: float, l: float) -> float:
    """Psi(d, l) = (2/n) lambda / (1 - l lambda); math.inf outside the finite branch."""
    if sigma < 0.0 or d < 0.0 or l < 0.0:
        raise ValueError(f"need sigma, d, l >= 0, got sigma={sigma}, d={d}, l={l}")
    if sigma > 0.0 and d >= _pole(sigma, n):
        return math.inf
    lam = lambda_of_d(sigma, n, d)
    if lam > 0.0 and l >= 1.0 / lam:
        return math.inf
    denominator = 1.0 - l * lam
    if denominator <= 0.0:
        return math.inf
    return (2.0 / n) * lam / denominator


@dataclass(frozen=True, eq=False)
class ShieldGeometry:
    sigma: float
    d: float
    l: float
    boundary_margin: np.ndarray
    u0_margin: float
    annulus_margin: float
    n: int = constants.DIMENSION

    def __post_init__(self):
        if self.sigma < 0.0 or self.d < 0.0 or self.l < 0.0:
            raise ValueError(f"shield needs sigma, d, l >= 0, got ({self.sigma}, {self.d}, {self.l})")


@dataclass
class ShieldReport:
    passed: Dict[str, bool]
    margins: Dict[str, float]
    psi: float

    @property
    def is_shield(self) -> bool:
        return all(self.passed.values())

    def to_record(self) -> Dict[str, object]:
        record: Dict[str, object] = {"is_shield": self.is_shield, "psi": self.psi}
        for name, ok in self.passed.items():
            record[f"{name}_passed"] = ok
        for name, margin in self.margins.items():
            record[f"{name}_margin"] = margin
        return record


def shield_check(sg: ShieldGeometry) -> ShieldReport:
    psi = psi_threshold(sg.sigma, sg.n, sg.d, sg.l)
    floor = sg.sigma * sg.n * (sg.n - 1)
    boundary_min = float(np.min(sg.boundary_margin))
    margins = {
        "dec_on_U0": sg.u0_margin,
        "energy_floor_on_annulus": sg.annulus_margin - floor,
        # distance above -Psi; infinite when Psi is
        "boundary": boundary_min + psi,
    }
    passed = {
        "dec_on_U0": margins["dec_on_U0"] >= -SHIELD_TOL,
        "energy_floor_on_annulus": margins["energy_floor_on_annulus"] >= -SHIELD_TOL,
        "boundary": boundary_min > -psi,
    }
    return ShieldReport(passed=passed, margins=margins, psi=psi)


def shield_geometry_from_data(
    ids: InitialDataSet,
    u0_region: RegionSpec,
    annulus_region: RegionSpec,
    boundary: SurfaceMesh,
    sigma: float,
    d: float,
    l: float,
    n: int = constants.DIMENSION,
) -> ShieldGeometry:
    """Interior margins from constraint fields, boundary margin H - |pi(nu, .)|_T on the boundary surface."""
    u0_min, _ = dec_check(constraint_fields(ids, u0_region))
    annulus_min, _ = dec_check(constraint_fields(ids, annulus_region))
    ext = extrinsic_data(boundary)
    return ShieldGeometry(
        sigma=sigma,
        d=d,
        l=l,
        boundary_margin=ext.H - ext.pi_nu_tangential_norm,
        u0_margin=u0_min,
        annulus_margin=annulus_min,
        n=n,
    )


# --- Bartnik data ---


@dataclass(frozen=True, eq=False)
class BartnikData:
    grid: SphereGrid
    gamma: np.ndarray
    alpha: np.ndarray
    H: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name, expected in (("gamma", (2, 2)), ("alpha", (2, 2)), ("H", ()), ("beta", (2,))):
            value = getattr(self, name)
            if value.shape != self.grid.shape + expected:
                raise ValueError(f"Bartnik field {name} has shape {value.shape}, expected {self.grid.shape + expected}")

    @property
    def area_density(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.gamma))


def bartnik_data_from_surface(ext: ExtrinsicData) -> BartnikData:
    return BartnikData(
        grid=ext.grid,
        gamma=ext.gamma,
        alpha=ext.second_form_tangential,
        H=ext.H,
        beta=ext.omega_t,
    )


def fillin_f(bd: BartnikData) -> np.ndarray:
    """f = sqrt((tr_gamma alpha)^2 + |beta|_gamma^2)."""
    gamma_inv = checked_inverse_2d(bd.gamma, "Bartnik metric")
    tr_alpha = np.einsum("...ab,...ab->...", gamma_inv, bd.alpha)
    beta_sq = np.einsum("...ab,...a,...b->...", gamma_inv, bd.beta, bd.beta)
    return np.sqrt(tr_alpha**2 + np.maximum(beta_sq, 0.0))


def regularity_diagnostics(bd: BartnikData) -> Dict[str, float]:
    """Spectral tail ratios of alpha and beta components; C^{1,eps} is monitored, not certified."""
    grid = bd.grid
    return {
        "alpha_tail": max(
            grid.tail_ratio(bd.alpha[..., 0, 0], 1),
            grid.tail_ratio(bd.alpha[..., 0, 1], -1),
            grid.tail_ratio(bd.alpha[..., 1, 1], 1),
        ),
        "beta_tail": max(grid.tail_ratio(bd.beta[..., 0], -1), grid.tail_ratio(bd.beta[..., 1], 1)),
    }


@dataclass
class ObstructionReport:
    h0: float
    C0: float
    min_H_minus_f: float
    integral_H_minus_f: float
    area: float
    integral_criterion_met: bool
    pointwise_criterion_met: bool
    positivity_holds: bool
    regularity: Dict[str, float] = field(default_factory=dict)
    unchecked_assumptions: List[str] = field(default_factory=list)

    def to_record(self) -> Dict[str, object]:
        return {
            "h0_user_supplied": self.h0,
            "C0_user_supplied": self.C0,
            "min_H_minus_f": self.min_H_minus_f,
            "integral_H_minus_f": self.integral_H_minus_f,
            "area": self.area,
            "integral_criterion_met": self.integral_criterion_met,
            "pointwise_criterion_met": self.pointwise_criterion_met,
            "positivity_holds": self.positivity_holds,
            **{f"regularity_{k}": v for k, v in self.regularity.items()},
            "unchecked_assumptions": "; ".join(self.unchecked_assumptions),
        }


UNCHECKED_ASSUMPTIONS = (
    "gamma isotopic to the round metric within positive scalar curvature metrics",
    "outer boundary and apparent horizon topology of the fill-in",
)


def obstruction_report(bd: BartnikData, *, h0: float, C0: float) -> ObstructionReport:
    """Compare H - f against the user-supplied thresholds h0 (integral) and C0 (pointwise)."""
    diff = bd.H - fillin_f(bd)
    density = bd.area_density
    integral = bd.grid.integrate(diff, density)
    min_diff = float(np.min(diff))
    positivity = min_diff > 0.0
    return ObstructionReport(
        h0=float(h0),
        C0=float(C0),
        min_H_minus_f=min_diff,
        integral_H_minus_f=integral,
        area=bd.grid.integrate(np.ones(bd.grid.shape), density),
        integral_criterion_met=positivity and integral > h0,
        pointwise_criterion_met=positivity and min_diff >= C0,
        positivity_holds=positivity,
        regularity=regularity_diagnostics(bd),
        unchecked_assumptions=list(UNCHECKED_ASSUMPTIONS),
    )
