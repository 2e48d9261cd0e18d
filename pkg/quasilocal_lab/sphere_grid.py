"""Gauss-Legendre x uniform grids on the 2-sphere.

Quadrature, spectral differentiation in (theta, phi) and a real spherical-harmonic
basis shared by every surface module. Fields are arrays whose first two axes are
(theta index, phi index); theta runs north to south.

Theta derivatives use the double-Fourier-sphere parity of each Fourier mode: a
field of parity sigma (+1 for scalars and for the (theta,theta), (phi,phi)
components of a tensor, -1 for theta-components of one-forms and the (theta,phi)
component of a 2-tensor) has, in Fourier mode m, a cosine series in theta when
sigma * (-1)^m = +1 and a sine series otherwise. A theta derivative flips sigma.
"""
import functools
import math
from typing import NamedTuple, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from quasilocal_lab.constants import TAIL_FRACTION
from quasilocal_lab.errors import GridMismatchError


class SphereGrid:
    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 4 or n_phi < 4:
            raise ValueError(f"Sphere grid needs at least 4x4 nodes, got ({n_theta}, {n_phi})")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        self.shape = (self.n_theta, self.n_phi)

        x, w = roots_legendre(self.n_theta)
        order = np.argsort(-x)
        self.cos_theta = x[order]
        self.gl_weights = w[order]
        self.theta = np.arccos(self.cos_theta)
        self.sin_theta = np.sin(self.theta)
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.node_weights = np.outer(self.gl_weights, np.full(self.n_phi, 2.0 * np.pi / self.n_phi))

        self._theta_matrices, self._theta_inverse = self._build_theta_matrices()

    def __repr__(self):
        return f"SphereGrid({self.n_theta}, {self.n_phi})"

    def _build_theta_matrices(self):
        th = self.theta[:, None]
        n_cos = np.arange(self.n_theta)[None, :]
        n_sin = np.arange(1, self.n_theta + 1)[None, :]
        bases = {
            1: (np.cos(n_cos * th), -n_cos * np.sin(n_cos * th), -(n_cos**2) * np.cos(n_cos * th)),
            -1: (np.sin(n_sin * th), n_sin * np.cos(n_sin * th), -(n_sin**2) * np.sin(n_sin * th)),
        }
        matrices, inverses = {}, {}
        for parity, (b0, b1, b2) in bases.items():
            # D = B' B^{-1}, solved rather than inverted
            matrices[(parity, 1)] = np.linalg.solve(b0.T, b1.T).T
            matrices[(parity, 2)] = np.linalg.solve(b0.T, b2.T).T
            inverses[parity] = np.linalg.inv(b0)
        return matrices, inverses

    def _mode_parity(self, n_modes: int, parity: int) -> np.ndarray:
        m = np.arange(n_modes)
        return parity * np.where(m % 2 == 0, 1, -1)

    def check_field(self, values: np.ndarray, what: str = "field"):
        if tuple(values.shape[:2]) != self.shape:
            raise GridMismatchError(f"{what} has shape {values.shape}, grid is {self.shape}")

    def d_theta(self, values: np.ndarray, parity: int = 1, order: int = 1) -> np.ndarray:
        self.check_field(values)
        coeffs = np.fft.rfft(values, axis=1)
        mode_parity = self._mode_parity(coeffs.shape[1], parity)
        out = np.empty_like(coeffs)
        for p in (1, -1):
            cols = mode_parity == p
            if np.any(cols):
                out[:, cols] = np.tensordot(self._theta_matrices[(p, order)], coeffs[:, cols], axes=(1, 0))
        return np.fft.irfft(out, n=self.n_phi, axis=1)

    def d_phi(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        self.check_field(values)
        coeffs = np.fft.rfft(values, axis=1)
        factor = (1j * np.arange(coeffs.shape[1])) ** order
        if self.n_phi % 2 == 0 and order % 2 == 1:
            factor[-1] = 0.0
        coeffs = coeffs * factor.reshape((1, -1) + (1,) * (values.ndim - 2))
        return np.fft.irfft(coeffs, n=self.n_phi, axis=1)

    def integrate(self, values: np.ndarray, area_density: np.ndarray) -> float:
        """Quadrature of a scalar field against sqrt(det gamma) dtheta dphi.

        `area_density` is the coordinate density sqrt(det gamma_(theta,phi)); the
        Gauss-Legendre weights already carry one factor of sin(theta).
        """
        self.check_field(values)
        self.check_field(area_density, "area density")
        if values.shape != self.shape:
            raise GridMismatchError(f"integrand must be a scalar field, got shape {values.shape}")
        terms = values * area_density / self.sin_theta[:, None] * self.node_weights
        return math.fsum(np.ravel(terms))

    def unit_sphere_points(self) -> np.ndarray:
        st = self.sin_theta[:, None]
        return np.stack(
            [
                st * np.cos(self.phi)[None, :],
                st * np.sin(self.phi)[None, :],
                np.broadcast_to(self.cos_theta[:, None], self.shape),
            ],
            axis=-1,
        )

    def round_metric(self, radius: float = 1.0) -> np.ndarray:
        gamma = np.zeros(self.shape + (2, 2))
        gamma[..., 0, 0] = radius**2
        gamma[..., 1, 1] = (radius * self.sin_theta[:, None]) ** 2
        return gamma

    def theta_coefficients(self, values: np.ndarray, parity: int = 1) -> np.ndarray:
        """|coefficients| of a scalar field in the parity-adapted (n, m) basis."""
        self.check_field(values)
        coeffs = np.fft.rfft(values, axis=1)
        mode_parity = self._mode_parity(coeffs.shape[1], parity)
        out = np.empty_like(coeffs)
        for p in (1, -1):
            cols = mode_parity == p
            if np.any(cols):
                out[:, cols] = self._theta_inverse[p] @ coeffs[:, cols]
        return np.abs(out)

    def tail_ratio(self, values: np.ndarray, parity: int = 1) -> float:
        """Share of spectral energy in the top quarter of theta or phi modes."""
        amplitude = self.theta_coefficients(values, parity)
        n_idx = np.arange(amplitude.shape[0])[:, None]
        m_idx = np.arange(amplitude.shape[1])[None, :]
        tail = (n_idx >= TAIL_FRACTION * amplitude.shape[0]) | (m_idx >= TAIL_FRACTION * amplitude.shape[1])
        total = float(np.sqrt(np.sum(amplitude**2)))
        if total == 0.0:
            return 0.0
        return float(np.sqrt(np.sum(amplitude[tail] ** 2))) / total


@functools.cache
def sphere_grid(n_theta: int, n_phi: int) -> SphereGrid:
    return SphereGrid(n_theta, n_phi)


def as_grid(grid: Union[SphereGrid, Tuple[int, int]]) -> SphereGrid:
    if isinstance(grid, SphereGrid):
        return grid
    n_theta, n_phi = grid
    return sphere_grid(int(n_theta), int(n_phi))


class HarmonicBasis(NamedTuple):
    degree: int
    degrees: np.ndarray
    values: np.ndarray
    d_theta: np.ndarray
    d_phi: np.ndarray
    d_theta2: np.ndarray
    d_theta_phi: np.ndarray
    d_phi2: np.ndarray


def _normalized_legendre(degree: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """P[l, m] normalized so that the integral of P^2 over [-1, 1] is one."""
    p = np.zeros((degree + 1, degree + 1, x.size))
    p[0, 0] = 1.0 / math.sqrt(2.0)
    for m in range(1, degree + 1):
        p[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * p[m - 1, m - 1]
    for m in range(degree):
        p[m + 1, m] = math.sqrt(2 * m + 3) * x * p[m, m]
    for m in range(degree + 1):
        for ell in range(m + 2, degree + 1):
            a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
            b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
            p[ell, m] = a * (x * p[ell - 1, m] - b * p[ell - 2, m])
    return p


@functools.cache
def _harmonic_basis(n_theta: int, n_phi: int, degree: int) -> HarmonicBasis:
    grid = sphere_grid(n_theta, n_phi)
    x, s = grid.cos_theta, grid.sin_theta
    p = _normalized_legendre(degree, x, s)

    dp = np.zeros_like(p)
    for m in range(degree + 1):
        for ell in range(max(m, 1), degree + 1):
            lower = p[ell - 1, m] if ell - 1 >= m else 0.0
            c = math.sqrt((2 * ell + 1) * (ell * ell - m * m) / (2 * ell - 1))
            dp[ell, m] = (ell * x * p[ell, m] - c * lower) / s
    ell_idx = np.arange(degree + 1)[:, None, None]
    m_idx = np.arange(degree + 1)[None, :, None]
    d2p = -(x / s) * dp - (ell_idx * (ell_idx + 1) - m_idx**2 / s**2) * p

    columns = [(ell, m) for ell in range(degree + 1) for m in range(-ell, ell + 1)]
    n_cols = len(columns)
    legendre = np.empty((3, n_theta, n_cols))
    trig = np.empty((3, n_phi, n_cols))
    for j, (ell, m) in enumerate(columns):
        am = abs(m)
        legendre[0, :, j] = p[ell, am]
        legendre[1, :, j] = dp[ell, am]
        legendre[2, :, j] = d2p[ell, am]
        if m == 0:
            trig[0, :, j] = 1.0 / math.sqrt(2.0 * math.pi)
            trig[1, :, j] = 0.0
            trig[2, :, j] = 0.0
        elif m > 0:
            trig[0, :, j] = np.cos(am * grid.phi) / math.sqrt(math.pi)
            trig[1, :, j] = -am * np.sin(am * grid.phi) / math.sqrt(math.pi)
            trig[2, :, j] = -(am**2) * np.cos(am * grid.phi) / math.sqrt(math.pi)
        else:
            trig[0, :, j] = np.sin(am * grid.phi) / math.sqrt(math.pi)
            trig[1, :, j] = am * np.cos(am * grid.phi) / math.sqrt(math.pi)
            trig[2, :, j] = -(am**2) * np.sin(am * grid.phi) / math.sqrt(math.pi)

    def combine(i_theta, i_phi):
        return (legendre[i_theta][:, None, :] * trig[i_phi][None, :, :]).reshape(n_theta * n_phi, n_cols)

    return HarmonicBasis(
        degree=degree,
        degrees=np.array([ell for ell, _ in columns]),
        values=combine(0, 0),
        d_theta=combine(1, 0),
        d_phi=combine(0, 1),
        d_theta2=combine(2, 0),
        d_theta_phi=combine(1, 1),
        d_phi2=combine(0, 2),
    )


def harmonic_basis(grid: SphereGrid, degree: int) -> HarmonicBasis:
    """Real orthonormal spherical harmonics up to `degree` and their derivatives on the nodes."""
    if degree < 1:
        raise ValueError(f"harmonic degree must be >= 1, got {degree}")
    return _harmonic_basis(grid.n_theta, grid.n_phi, int(degree))
