"""Rotationally symmetric scalar-flat extensions g+ = u(r)^2 dr^2 + r^2 dOmega^2.

Scalar flatness reduces to the conservation law r (1 - u^-2) = 2m, so
u(r) = (1 - 2m/r)^(-1/2) on every leaf and Q(r) = r (1 - 1/u) decreases to m.
Q is stored normalized, i.e. divided by 8 pi.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from quasilocal_lab import constants
from quasilocal_lab.errors import FlowError, HypothesisError
from quasilocal_lab.mass_functionals import VectorFieldData
from quasilocal_lab.surface_geometry import ExtrinsicData, area, integrate

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class UField:
    values: np.ndarray
    mean: float
    relative_deviation: float
    area_radius: float


def shi_tam_boundary_u(H0: np.ndarray, ext: ExtrinsicData, X: Optional[VectorFieldData] = None) -> UField:
    """u = H0 / (H - <X, nu>) on the boundary surface."""
    X = X or VectorFieldData.zero()
    effective = ext.H - X.boundary_normal_component(ext)
    margin = float(np.min(effective))
    if margin <= constants.MARGIN_TOL:
        raise HypothesisError(f"H - <X, nu> must be positive on the boundary (min {margin:.3e})")
    u = np.asarray(H0) / effective
    total = area(ext)
    mean = integrate(ext, u) / total
    return UField(
        values=u,
        mean=mean,
        relative_deviation=float(np.max(np.abs(u - mean))) / abs(mean),
        area_radius=math.sqrt(total / constants.OMEGA_2),
    )


def seed_from_boundary(ufield: UField, max_deviation: float = constants.FLOW_DEVIATION_TOL) -> Tuple[float, float]:
    """(r0, u0) for the round flow; refused when u is not constant to `max_deviation`."""
    if ufield.relative_deviation > max_deviation:
        raise FlowError(
            f"non-round boundary data: u deviates from its mean by {ufield.relative_deviation:.2e} (> {max_deviation:.1e})"
        )
    return ufield.area_radius, ufield.mean


@dataclass(frozen=True)
class FlowState:
    r: float
    u: float
    Q: float
    H0_r: float
    area: float

    @property
    def Q_scaled(self) -> float:
        return constants.MASS_NORMALIZATION * self.Q


@dataclass(eq=False)
class FlowTrajectory:
    states: List[FlowState]
    mass_parameter: float
    energy: float
    r0: float
    u0: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.states])

    @property
    def r_max(self) -> float:
        return self.states[-1].r


def _leaf(r: float, two_m: float) -> FlowState:
    s = math.sqrt(1.0 - two_m / r)
    return FlowState(
        r=r,
        u=1.0 / s,
        Q=two_m / (1.0 + s),
        H0_r=2.0 / r,
        area=constants.OMEGA_2 * r * r,
    )


def _extrapolate(traj: FlowTrajectory) -> float:
    tail = traj.states[-3:]
    if len(tail) < 3:
        return tail[-1].Q
    inv_r = np.array([1.0 / s.r for s in tail])
    q = np.array([s.Q for s in tail])
    return float(np.polyfit(inv_r, q, 2)[-1])


def solve_rotsym_extension(r0: float, u0: float, r_max: float, steps: int = constants.FLOW_STEPS) -> FlowTrajectory:
    if not u0 > 0.0:
        raise FlowError(f"u0 must be positive, got {u0}")
    if not math.isfinite(r_max) or r_max <= r0:
        raise FlowError(f"r_max must be finite and exceed r0={r0}, got {r_max}")
    if steps < 2:
        raise FlowError(f"need at least 2 leaves, got {steps}")
    two_m = r0 * (1.0 - u0**-2)
    if two_m >= r0:
        raise FlowError(f"horizon inside the foliation: 2m={two_m:.6g} >= r0={r0:.6g}")

    radii = np.geomspace(r0, r_max, steps)
    states = [_leaf(float(r), two_m) for r in radii]
    # the first leaf carries the seed exactly
    states[0] = FlowState(r=r0, u=u0, Q=r0 * (1.0 - 1.0 / u0), H0_r=2.0 / r0, area=constants.OMEGA_2 * r0 * r0)
    traj = FlowTrajectory(states=states, mass_parameter=two_m, energy=float("nan"), r0=r0, u0=u0)
    traj.energy = _extrapolate(traj)
    logger.debug(f"flow r0={r0:g} u0={u0:g}: 2m={two_m:.8f}, Q(r0)={states[0].Q:.8f}, E={traj.energy:.8f}")
    return traj


def _dq_dr_numeric(traj: FlowTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """dQ/dr on interior leaves by centered differences in ln r; returns (indices, values)."""
    r = traj.column("r")
    q = traj.column("Q")
    s = np.log(r)
    n = len(r)
    if n >= 7:
        h = (s[-1] - s[0]) / (n - 1)
        idx = np.arange(3, n - 3)
        dq_ds = (
            -q[idx - 3] + 9 * q[idx - 2] - 45 * q[idx - 1] + 45 * q[idx + 1] - 9 * q[idx + 2] + q[idx + 3]
        ) / (60.0 * h)
    else:
        idx = np.arange(1, n - 1)
        dq_ds = (q[idx + 1] - q[idx - 1]) / (s[idx + 1] - s[idx - 1])
    return idx, dq_ds / r[idx]


def dq_dr_formula(u: np.ndarray) -> np.ndarray:
    """Round-case monotonicity formula divided by 8 pi: -(1 - u)^2 / (2u)."""
    return -((1.0 - u) ** 2) / (2.0 * u)


def q_derivative_check(traj: FlowTrajectory) -> float:
    if len(traj.states) < 3:
        raise FlowError(f"derivative check needs >= 3 states, got {len(traj.states)}")
    idx, numeric = _dq_dr_numeric(traj)
    if idx.size == 0:
        return 0.0
    formula = dq_dr_formula(traj.column("u")[idx])
    return float(np.max(np.abs(numeric - formula)))


def extension_energy(traj: FlowTrajectory) -> float:
    """Limit of Q by quadratic extrapolation in 1/r over the last three leaves."""
    if traj.r_max < constants.FLOW_RANGE_FACTOR * traj.r0:
        raise FlowError(
            f"insufficient range: r_max={traj.r_max:g} < {constants.FLOW_RANGE_FACTOR:g} * r0={traj.r0:g}"
        )
    return _extrapolate(traj)


def trajectory_table(traj: FlowTrajectory) -> List[Dict[str, float]]:
    r = traj.column("r")
    q = traj.column("Q")
    u = traj.column("u")
    numeric = np.gradient(q, r, edge_order=2) if len(r) >= 3 else np.full(len(r), float("nan"))
    idx, interior = _dq_dr_numeric(traj) if len(r) >= 3 else (np.array([], dtype=int), np.array([]))
    numeric[idx] = interior
    formula = dq_dr_formula(u)
    return [
        {"r": float(r[i]), "u": float(u[i]), "Q": float(q[i]), "dQ/dr_numeric": float(numeric[i]), "dQ/dr_formula": float(formula[i])}
        for i in range(len(r))
    ]


def export_trajectory_csv(path: Path, traj: FlowTrajectory) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = trajectory_table(traj)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return path
