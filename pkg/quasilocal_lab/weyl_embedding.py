"""Convex isometric embedding of sphere metrics into Euclidean 3-space."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from quasilocal_lab import constants
from quasilocal_lab.errors import EmbeddingNotConvergedError, WeylConditionError
from quasilocal_lab.sphere_grid import SphereGrid, harmonic_basis, sphere_grid
from quasilocal_lab.surface_geometry import checked_inverse_2d

logger = logging.getLogger(__name__)


def _grid_for(gamma: np.ndarray, grid: Optional[SphereGrid]) -> SphereGrid:
    return grid if grid is not None else sphere_grid(*gamma.shape[:2])


def induced_metric_from_positions(grid: SphereGrid, X: np.ndarray) -> np.ndarray:
    """Euclidean pullback metric of an explicit surface X(theta, phi)."""
    Xt = grid.d_theta(X, parity=1)
    Xp = grid.d_phi(X)
    gamma = np.empty(grid.shape + (2, 2))
    gamma[..., 0, 0] = np.einsum("...i,...i->...", Xt, Xt)
    gamma[..., 0, 1] = gamma[..., 1, 0] = np.einsum("...i,...i->...", Xt, Xp)
    gamma[..., 1, 1] = np.einsum("...i,...i->...", Xp, Xp)
    return gamma


class WeylCondition(NamedTuple):
    K: np.ndarray
    min_K: float


def weyl_condition(gamma: np.ndarray, grid: Optional[SphereGrid] = None) -> WeylCondition:
    """Intrinsic Gauss curvature by the Brioschi formula."""
    grid = _grid_for(gamma, grid)
    checked_inverse_2d(gamma, "sphere metric")
    E, F, G = gamma[..., 0, 0], gamma[..., 0, 1], gamma[..., 1, 1]

    E_u, E_v, E_vv = grid.d_theta(E, 1), grid.d_phi(E), grid.d_phi(E, 2)
    F_u, F_v = grid.d_theta(F, -1), grid.d_phi(F)
    F_uv = grid.d_theta(F_v, -1)
    G_u, G_v, G_uu = grid.d_theta(G, 1), grid.d_phi(G), grid.d_theta(G, 1, order=2)

    m1 = np.empty(grid.shape + (3, 3))
    m1[..., 0, :] = np.stack([-0.5 * E_vv + F_uv - 0.5 * G_uu, 0.5 * E_u, F_u - 0.5 * E_v], axis=-1)
    m1[..., 1, :] = np.stack([F_v - 0.5 * G_u, E, F], axis=-1)
    m1[..., 2, :] = np.stack([0.5 * G_v, F, G], axis=-1)
    m2 = np.empty(grid.shape + (3, 3))
    m2[..., 0, :] = np.stack([np.zeros_like(E), 0.5 * E_v, 0.5 * G_u], axis=-1)
    m2[..., 1, :] = np.stack([0.5 * E_v, E, F], axis=-1)
    m2[..., 2, :] = np.stack([0.5 * G_u, F, G], axis=-1)

    K = (np.linalg.det(m1) - np.linalg.det(m2)) / (E * G - F * F) ** 2
    return WeylCondition(K=K, min_K=float(np.min(K)))


@dataclass(frozen=True)
class EmbeddingOptions:
    degree: Optional[int] = None
    tol: float = constants.EMBED_TOL
    max_iter: int = constants.EMBED_MAX_ITER
    seed: int = 0
    jitter: float = 0.0
    homotopy_steps: int = 1
    damping: float = constants.EMBED_INITIAL_DAMPING


@dataclass(eq=False)
class EmbeddingResult:
    grid: SphereGrid
    degree: int
    coefficients: np.ndarray
    positions: np.ndarray
    tangents: np.ndarray
    second_derivatives: np.ndarray
    normal: np.ndarray
    metric: np.ndarray
    area_density: np.ndarray
    residual_l2: float
    residual_max: float
    H0: np.ndarray
    gauss_curvature: np.ndarray
    embedded_gauss_curvature: np.ndarray
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def min_gauss_curvature(self) -> float:
        return float(np.min(self.gauss_curvature))

    def to_record(self):
        return {
            "degree": self.degree,
            "residual_l2": self.residual_l2,
            "residual_max": self.residual_max,
            "iterations": self.iterations,
            "converged": self.converged,
            "min_gauss_curvature": self.min_gauss_curvature,
            "min_embedded_gauss_curvature": float(np.min(self.embedded_gauss_curvature)),
            "min_H0": float(np.min(self.H0)),
            "max_H0": float(np.max(self.H0)),
        }


class _MetricMismatch:
    """Weighted residual of the pullback metric against a target, in coefficient space."""

    def __init__(self, grid: SphereGrid, degree: int, target: np.ndarray, scale: float):
        basis = harmonic_basis(grid, degree)
        cols = basis.degrees >= 1
        self.n_modes = int(np.count_nonzero(cols))
        self.Y = basis.values[:, cols]
        self.Yt = basis.d_theta[:, cols]
        self.Yp = basis.d_phi[:, cols]
        self.Ytt = basis.d_theta2[:, cols]
        self.Ytp = basis.d_theta_phi[:, cols]
        self.Ypp = basis.d_phi2[:, cols]

        s = np.repeat(grid.sin_theta, grid.n_phi)
        sw = np.sqrt(grid.node_weights.ravel()) / scale
        self.scale = scale
        self.sin = s
        self.rows = (sw, math.sqrt(2.0) * sw / s, sw / s**2)
        self.set_target(target)

    def set_target(self, target: np.ndarray):
        self.E = target[..., 0, 0].ravel()
        self.F = target[..., 0, 1].ravel()
        self.G = target[..., 1, 1].ravel()

    def unpack(self, c_vec: np.ndarray) -> np.ndarray:
        return c_vec.reshape(3, self.n_modes).T

    def mismatch(self, c: np.ndarray):
        Xt, Xp = self.Yt @ c, self.Yp @ c
        return (
            np.einsum("ni,ni->n", Xt, Xt) - self.E,
            np.einsum("ni,ni->n", Xt, Xp) - self.F,
            np.einsum("ni,ni->n", Xp, Xp) - self.G,
        )

    def residual(self, c: np.ndarray) -> np.ndarray:
        return np.concatenate([w * d for w, d in zip(self.rows, self.mismatch(c))])

    def relative_max(self, c: np.ndarray) -> float:
        dE, dF, dG = self.mismatch(c)
        rel = np.sqrt(dE**2 + 2.0 * (dF / self.sin) ** 2 + (dG / self.sin**2) ** 2) / self.scale
        return float(np.max(rel))

    def jacobian(self, c: np.ndarray) -> np.ndarray:
        Xt, Xp = self.Yt @ c, self.Yp @ c
        w_tt, w_tp, w_pp = self.rows
        n, k = self.Yt.shape
        J = np.zeros((3 * n, 3 * k))
        for i in range(3):
            cols = slice(i * k, (i + 1) * k)
            J[:n, cols] = (2.0 * w_tt * Xt[:, i])[:, None] * self.Yt
            J[n : 2 * n, cols] = (w_tp * Xp[:, i])[:, None] * self.Yt + (w_tp * Xt[:, i])[:, None] * self.Yp
            J[2 * n :, cols] = (2.0 * w_pp * Xp[:, i])[:, None] * self.Yp
        return J


def _armijo_descent(problem: _MetricMismatch, c_vec, cost, grad):
    grad_sq = float(grad @ grad)
    if grad_sq == 0.0:
        return None
    t = cost / grad_sq
    while t > 1e-30:
        trial = c_vec - t * grad
        r = problem.residual(problem.unpack(trial))
        trial_cost = 0.5 * float(r @ r)
        if trial_cost <= cost - 1e-4 * t * grad_sq:
            return trial, r, trial_cost
        t *= 0.5
    return None


def _solve_stage(problem: _MetricMismatch, c_vec: np.ndarray, tol: float, opts: EmbeddingOptions, history: List[float]):
    r = problem.residual(problem.unpack(c_vec))
    cost = 0.5 * float(r @ r)
    lam = opts.damping
    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        if problem.relative_max(problem.unpack(c_vec)) < tol:
            return c_vec, iterations - 1
        J = problem.jacobian(problem.unpack(c_vec))
        A = J.T @ J
        grad = J.T @ r
        scaling = np.diag(A).copy()
        scaling = np.maximum(scaling, 1e-12 * np.max(scaling))

        accepted = False
        while lam <= constants.EMBED_MAX_DAMPING:
            try:
                factor = cho_factor(A + lam * np.diag(scaling))
            except LinAlgError:
                lam *= 10.0
                continue
            trial = c_vec - cho_solve(factor, grad)
            r_trial = problem.residual(problem.unpack(trial))
            trial_cost = 0.5 * float(r_trial @ r_trial)
            if trial_cost < cost:
                c_vec, r, cost = trial, r_trial, trial_cost
                lam = max(lam / 3.0, 1e-10)
                accepted = True
                break
            lam *= 4.0

        if not accepted:
            logger.debug(f"embedding: damped step stalled at iteration {iterations}, trying gradient descent")
            step = _armijo_descent(problem, c_vec, cost, grad)
            if step is None:
                logger.info(f"embedding: no descent direction at iteration {iterations}; stopping")
                break
            c_vec, r, cost = step
            lam = opts.damping
        history.append(math.sqrt(2.0 * cost))
    return c_vec, iterations


def _surface_frame(problem: _MetricMismatch, grid: SphereGrid, c: np.ndarray):
    shape = grid.shape
    X = (problem.Y @ c).reshape(shape + (3,))
    T = np.stack([(problem.Yt @ c).reshape(shape + (3,)), (problem.Yp @ c).reshape(shape + (3,))], axis=-2)
    Xtt = (problem.Ytt @ c).reshape(shape + (3,))
    Xtp = (problem.Ytp @ c).reshape(shape + (3,))
    Xpp = (problem.Ypp @ c).reshape(shape + (3,))
    D2 = np.stack([np.stack([Xtt, Xtp], axis=-2), np.stack([Xtp, Xpp], axis=-2)], axis=-3)
    metric = np.einsum("...ai,...bi->...ab", T, T)
    area_density = np.sqrt(np.linalg.det(metric))

    n = np.cross(T[..., 0, :], T[..., 1, :])
    n /= np.linalg.norm(n, axis=-1)[..., None]
    centroid = np.sum(grid.node_weights[..., None] * X, axis=(0, 1)) / np.sum(grid.node_weights)
    if grid.integrate(np.einsum("...i,...i->...", n, X - centroid), area_density) < 0.0:
        n = -n
    return X, T, D2, n, metric, area_density


def embed_convex(gamma: np.ndarray, opts: Optional[EmbeddingOptions] = None, grid: Optional[SphereGrid] = None) -> EmbeddingResult:
    """Isometric embedding by damped Gauss-Newton over spherical-harmonic position coefficients.

    Translations are frozen by dropping the l = 0 modes; rotations are absorbed by
    the damping. Returns the best iterate with converged=False when the residual
    does not reach opts.tol within opts.max_iter iterations per homotopy stage.
    """
    opts = opts or EmbeddingOptions()
    grid = _grid_for(gamma, grid)
    weyl = weyl_condition(gamma, grid)
    if weyl.min_K <= 0.0:
        raise WeylConditionError(f"metric violates the Weyl condition (min K = {weyl.min_K:.3e})")

    degree = opts.degree if opts.degree is not None else grid.n_theta - 2
    area = grid.integrate(np.ones(grid.shape), np.sqrt(np.linalg.det(gamma)))
    radius = math.sqrt(area / constants.OMEGA_2)
    round_target = grid.round_metric(radius)
    problem = _MetricMismatch(grid, degree, round_target, radius**2)

    start = radius * grid.unit_sphere_points().reshape(-1, 3)
    c0, *_ = np.linalg.lstsq(problem.Y, start, rcond=None)
    if opts.jitter > 0.0:
        rng = np.random.default_rng(opts.seed)
        c0 = c0 + opts.jitter * radius * rng.standard_normal(c0.shape)
    c_vec = c0.T.ravel()

    history: List[float] = []
    iterations = 0
    steps = max(1, int(opts.homotopy_steps))
    for stage in range(1, steps + 1):
        t = stage / steps
        problem.set_target((1.0 - t) * round_target + t * gamma)
        stage_tol = opts.tol if stage == steps else 100.0 * opts.tol
        c_vec, used = _solve_stage(problem, c_vec, stage_tol, opts, history)
        iterations += used

    c = problem.unpack(c_vec)
    r = problem.residual(c)
    residual_max = problem.relative_max(c)
    converged = residual_max < opts.tol

    X, T, D2, n, metric, area_density = _surface_frame(problem, grid, c)
    metric_inv = checked_inverse_2d(metric, "embedded metric")
    L = -np.einsum("...abi,...i->...ab", D2, n)
    H0 = np.einsum("...ab,...ab->...", metric_inv, L)
    K_emb = np.linalg.det(L) / np.linalg.det(metric)

    if converged:
        logger.debug(f"embedding converged: residual_max={residual_max:.2e} after {iterations} iterations (L={degree})")
        if np.min(K_emb) <= 0.0:
            logger.warning(f"converged embedding is not strictly convex (min K = {np.min(K_emb):.3e})")
    else:
        logger.warning(f"embedding did not converge: residual_max={residual_max:.2e} > tol={opts.tol:.1e}")

    return EmbeddingResult(
        grid=grid,
        degree=degree,
        coefficients=c,
        positions=X,
        tangents=T,
        second_derivatives=D2,
        normal=n,
        metric=metric,
        area_density=area_density,
        residual_l2=float(np.linalg.norm(r)),
        residual_max=residual_max,
        H0=H0,
        gauss_curvature=weyl.K,
        embedded_gauss_curvature=K_emb,
        iterations=iterations,
        converged=converged,
        history=history,
    )


def reference_mean_curvature(emb: EmbeddingResult) -> np.ndarray:
    if not emb.converged:
        raise EmbeddingNotConvergedError(
            f"embedding not converged (residual_max={emb.residual_max:.2e} after {emb.iterations} iterations)"
        )
    return emb.H0


def embedding_gauss_curvature(emb: EmbeddingResult) -> np.ndarray:
    return emb.embedded_gauss_curvature


def minkowski_defect(emb: EmbeddingResult, gamma: np.ndarray) -> float:
    """Relative mismatch of the integral H0 against twice the integral K s (K intrinsic, s support function)."""
    grid = emb.grid
    K = weyl_condition(gamma, grid).K
    centroid = np.sum(grid.node_weights[..., None] * emb.positions, axis=(0, 1)) / np.sum(grid.node_weights)
    support = np.einsum("...i,...i->...", emb.positions - centroid, emb.normal)
    lhs = grid.integrate(emb.H0, emb.area_density)
    rhs = 2.0 * grid.integrate(K * support, emb.area_density)
    return abs(lhs - rhs) / abs(lhs)
