"""Spherical-harmonic analysis on the sphere and the ball.

Two modal representations live here. ``ModalField`` stores, for every
(l, m), the radial profile u_lm(rho_k) on the Lobatto grid of a ``BallGrid``.
``ParityBasis`` stores the regular part v_l of u_lm(rho) = rho^l v_l(rho^2)
as Chebyshev coefficients in z = rho^2, which removes the coordinate
singularity at the centre and keeps every linear operator exact on
polynomial data.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .errors import ConfigError
from .geometry import BallGrid, SphereQuadrature, gauss_radial, sphere_quadrature, z_vandermonde


def _real_from_complex(m, y):
    if m > 0:
        return np.sqrt(2.0) * (-1) ** m * y.real
    if m < 0:
        return np.sqrt(2.0) * (-1) ** m * y.imag
    return y.real


def real_sph_harm(l, m, theta, phi):
    """Orthonormal real harmonic: cos(m phi) type for m > 0, sin(|m| phi) for m < 0."""
    y = sph_harm_y(l, abs(m), theta, phi)
    return _real_from_complex(m, y)


def real_sph_harm_grad(l, m, theta, phi):
    """Value and (d/dtheta, d/dphi) of the real harmonic."""
    y, dy = sph_harm_y(l, abs(m), theta, phi, diff_n=1)
    return (_real_from_complex(m, y), _real_from_complex(m, dy[..., 0]), _real_from_complex(m, dy[..., 1]))


def tangential_gradient_harmonic(l, m, theta, phi):
    """Cartesian components of the surface gradient of Y_lm, shape (3,) + broadcast shape."""
    _, yt, yp = real_sph_harm_grad(l, m, theta, phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    yp = yp / st
    return np.stack(np.broadcast_arrays(ct * cp * yt - sp * yp, ct * sp * yt + cp * yp, -st * yt))


@lru_cache(maxsize=32)
def _tables(L, Lmax):
    sq = sphere_quadrature(L)
    th, ph = np.meshgrid(sq.theta, sq.phi, indexing="ij")
    Y, G = [], []
    for l in range(Lmax + 1):
        Y.append(np.array([real_sph_harm(l, m, th, ph) for m in range(-l, l + 1)]))
        G.append(np.array([tangential_gradient_harmonic(l, m, th, ph) for m in range(-l, l + 1)]))
    return sq, Y, G


@dataclass
class ModalField:
    """Radial profiles u_lm(rho_k); coeffs[l] has shape (2l+1, N+1), rows m = -l..l."""

    Lmax: int
    coeffs: list

    def mode(self, l, m):
        return self.coeffs[l][m + l]

    @classmethod
    def zeros(cls, Lmax, n_radial):
        return cls(Lmax, [np.zeros((2 * l + 1, n_radial)) for l in range(Lmax + 1)])


def _check_order(sphere: SphereQuadrature, Lmax):
    if Lmax > sphere.L:
        raise ConfigError(f"Lmax={Lmax} exceeds the quadrature order L={sphere.L}")


def analyze_shells(values, sphere: SphereQuadrature, Lmax: int) -> list:
    """Sphere inner products against Y_lm for every leading index of values."""
    _check_order(sphere, Lmax)
    _, Y, _ = _tables(sphere.L, Lmax)
    fw = np.asarray(values) * sphere.weights
    return [np.tensordot(Y[l], fw, axes=([1, 2], [-2, -1])) for l in range(Lmax + 1)]


def analyze(values, grid: BallGrid, Lmax: int) -> ModalField:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ConfigError(f"field shape {values.shape} does not match grid {grid.shape}")
    return ModalField(Lmax, analyze_shells(values, grid.sphere, Lmax))


def synthesize(modal: ModalField, grid: BallGrid) -> np.ndarray:
    _check_order(grid.sphere, modal.Lmax)
    _, Y, _ = _tables(grid.sphere.L, modal.Lmax)
    out = np.zeros(grid.shape)
    for l in range(modal.Lmax + 1):
        out += np.tensordot(modal.coeffs[l], Y[l], axes=(0, 0))
    return out


def shell_tangential_gradient(modal: ModalField, sphere: SphereQuadrature) -> np.ndarray:
    """Surface gradient of every shell, shape (3, n_radial, nt, nphi)."""
    _, _, G = _tables(sphere.L, modal.Lmax)
    out = 0.0
    for l in range(1, modal.Lmax + 1):
        out = out + np.einsum("mk,mcij->ckij", modal.coeffs[l], G[l])
    if np.isscalar(out):
        n = modal.coeffs[0].shape[-1]
        return np.zeros((3, n) + sphere.shape)
    return out


def laplace_beltrami_check(l: int, m: int, quad: SphereQuadrature) -> float:
    """Sup-norm residual of -div_S grad_S Y_lm - l(l+1) Y_lm on the quadrature nodes.

    The surface divergence is computed by re-analysing each Cartesian
    component of the gradient, so l + 1 <= quad.L is required.
    """
    if l + 1 > quad.L:
        raise ConfigError("quadrature order must exceed l by one")
    th, ph = np.meshgrid(quad.theta, quad.phi, indexing="ij")
    y = real_sph_harm(l, m, th, ph)
    grad = tangential_gradient_harmonic(l, m, th, ph)
    lap = np.zeros_like(y)
    for j in range(3):
        coeffs = analyze_shells(grad[j][None], quad, quad.L)
        gj = shell_tangential_gradient(ModalField(quad.L, coeffs), quad)[j, 0]
        lap += gj
    return float(np.max(np.abs(-lap - l * (l + 1) * y)))


def real_to_complex(modal: ModalField) -> ModalField:
    """Coefficients against the complex (Condon-Shortley) harmonics."""
    out = []
    for l, c in enumerate(modal.coeffs):
        z = np.zeros(c.shape, dtype=complex)
        z[l] = c[l]
        for m in range(1, l + 1):
            a, b = c[l + m], c[l - m]
            # Y_l^m = (-1)^m (Y_m + i Y_-m)/sqrt2, Y_l^-m = (Y_m - i Y_-m)/sqrt2 in real terms
            z[l + m] = (-1) ** m * (a - 1j * b) / np.sqrt(2.0)
            z[l - m] = (a + 1j * b) / np.sqrt(2.0)
        out.append(z)
    return ModalField(modal.Lmax, out)


def complex_to_real(modal: ModalField) -> ModalField:
    out = []
    for l, z in enumerate(modal.coeffs):
        c = np.zeros(z.shape)
        c[l] = z[l].real
        for m in range(1, l + 1):
            zp, zm = z[l + m], z[l - m]
            c[l + m] = ((-1) ** m * zp + zm).real / np.sqrt(2.0)
            c[l - m] = ((zm - (-1) ** m * zp) / 1j).real / np.sqrt(2.0)
        out.append(c)
    return ModalField(modal.Lmax, out)


# ---------------------------------------------------------------------------
# parity basis: u_lm(rho) = rho^l v_l(rho^2), v_l in Chebyshev coefficients


def cos_recurrence(l, m):
    """cos(theta) Y_lm = up * Y_{l+1,m} + down * Y_{l-1,m}."""
    m = abs(m)
    up = np.sqrt(((l + 1) ** 2 - m * m) / ((2 * l + 1) * (2 * l + 3)))
    down = np.sqrt((l * l - m * m) / ((2 * l - 1) * (2 * l + 1))) if l > m else 0.0
    return up, down


@dataclass(eq=False)
class ParityBasis:
    """Chebyshev-in-z coefficients of the regular radial factors of one m-sector.

    Physical values are sum_l rho^l v_l(rho^2) Y_lm. Fitting from samples is a
    weighted least-squares problem with the ball measure, so nothing is ever
    divided by rho^l; components that are invisible in L2(B) stay small
    instead of being amplified near the centre.
    """

    N: int
    Lmax: int
    m: int = 0
    radial_points: int = 0
    angular_order: int = 0
    ell_min: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("parity basis needs N >= 2")
        if max(abs(self.m), self.ell_min) > self.Lmax:
            raise ConfigError("sector m or ell_min exceeds Lmax")
        if not self.radial_points:
            self.radial_points = 2 * self.N + self.Lmax + 8
        if not self.angular_order:
            self.angular_order = self.Lmax + 12
        self.r, self.wr = gauss_radial(self.radial_points)
        self.T = z_vandermonde(self.r**2, self.N)

    @property
    def ells(self):
        return list(range(max(abs(self.m), self.ell_min), self.Lmax + 1))

    @property
    def n_ell(self):
        return len(self.ells)

    @property
    def shape(self):
        return (self.n_ell, self.N + 1)

    @property
    def size(self):
        return self.n_ell * (self.N + 1)

    def key(self):
        return (self.N, self.Lmax, self.m, max(abs(self.m), self.ell_min))

    # -- angular tables ----------------------------------------------------
    def _full_sphere(self):
        if "sphere" not in self._cache:
            sq = sphere_quadrature(self.angular_order)
            th, ph = np.meshgrid(sq.theta, sq.phi, indexing="ij")
            Y = np.array([real_sph_harm(l, self.m, th, ph) for l in self.ells])
            self._cache["sphere"] = (sq, Y)
        return self._cache["sphere"]

    def _axis_tables(self, order):
        key = ("axis", order)
        if key not in self._cache:
            from numpy.polynomial import legendre

            ct, w = legendre.leggauss(order)
            Y = np.array([real_sph_harm(l, 0, np.arccos(ct), 0.0) for l in self.ells])
            self._cache[key] = (ct, 2.0 * np.pi * w, Y)
        return self._cache[key]

    def _pinv(self):
        if "pinv" not in self._cache:
            sw = np.sqrt(self.wr) * self.r
            mats = []
            for l in self.ells:
                A = sw[:, None] * self.r[:, None] ** l * self.T
                mats.append(np.linalg.pinv(A, rcond=1e-15) * sw[None, :])
            self._cache["pinv"] = np.array(mats)  # (n_ell, N+1, M)
        return self._cache["pinv"]

    def _rpow(self):
        if "rpow" not in self._cache:
            self._cache["rpow"] = np.array([self.r**l for l in self.ells])
        return self._cache["rpow"]

    # -- fitting -----------------------------------------------------------
    def fit_profiles(self, u):
        """Coefficients from radial profiles u[l_index, k] sampled at the Gauss nodes."""
        return np.einsum("lnk,lk->ln", self._pinv(), u)

    def project(self, fn):
        """Project a callable fn(xi) with xi of shape (..., 3) onto this sector."""
        sq, Y = self._full_sphere()
        pts = self.r[:, None, None, None] * sq.points[None]
        F = np.asarray(fn(pts), dtype=float)
        u = np.tensordot(F * sq.weights, Y, axes=([1, 2], [1, 2])).T
        return self.fit_profiles(u)

    def project_axisymmetric(self, fn, order=None):
        """Projection of an axisymmetric callable using only the meridian x >= 0, y = 0."""
        if self.m != 0:
            raise ConfigError("axisymmetric projection needs m = 0")
        order = order or self.angular_order + 1
        ct, _, _ = self._axis_tables(order)
        st = np.sqrt(1.0 - ct**2)
        pts = np.stack(np.broadcast_arrays(self.r[:, None] * st, 0.0, self.r[:, None] * ct), axis=-1)
        return self.analyze_axis(np.asarray(fn(pts), dtype=float), order=order)

    def grid_axis(self, order=None):
        """(rho, cos_theta) meshes of the axisymmetric evaluation grid."""
        ct, _, _ = self._axis_tables(order or self.Lmax + 1)
        return np.meshgrid(self.r, ct, indexing="ij")

    def synthesize_axis(self, coef, order=None):
        """Values on the (Gauss rho) x (Gauss cos theta) grid; m = 0 only."""
        if self.m != 0:
            raise ConfigError("axisymmetric synthesis needs m = 0")
        _, _, Y = self._axis_tables(order or self.Lmax + 1)
        prof = (coef @ self.T.T) * self._rpow()
        return prof.T @ Y

    def analyze_axis(self, F, order=None):
        if self.m != 0:
            raise ConfigError("axisymmetric analysis needs m = 0")
        _, w, Y = self._axis_tables(order or self.Lmax + 1)
        u = (F * w) @ Y.T
        return self.fit_profiles(u.T)

    # -- evaluation --------------------------------------------------------
    def values(self, coef, xi):
        """Evaluate the represented field at points xi (..., 3)."""
        xi = np.asarray(xi, dtype=float)
        rho = np.linalg.norm(xi, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        ct = np.where(rho > 0, xi[..., 2] / safe, 1.0)
        th = np.arccos(np.clip(ct, -1.0, 1.0))
        ph = np.mod(np.arctan2(xi[..., 1], xi[..., 0]), 2 * np.pi)
        V = z_vandermonde(rho**2, self.N)
        out = np.zeros(rho.shape)
        for i, l in enumerate(self.ells):
            out += rho**l * (V @ coef[i]) * real_sph_harm(l, self.m, th, ph)
        return out

    def radial_profile(self, coef, rho):
        """u_l(rho) for every l in the sector, shape (n_ell, len(rho))."""
        rho = np.asarray(rho, dtype=float)
        V = z_vandermonde(rho**2, self.N)
        return np.array([rho**l * (V @ coef[i]) for i, l in enumerate(self.ells)])


@dataclass
class ModeState:
    """A pair (psi1, psi2) in a parity basis; c1, c2 have shape basis.shape."""

    basis: ParityBasis
    c1: np.ndarray
    c2: np.ndarray

    @classmethod
    def zeros(cls, basis):
        return cls(basis, np.zeros(basis.shape), np.zeros(basis.shape))

    @classmethod
    def from_vector(cls, basis, vec):
        n = basis.size
        vec = np.asarray(vec)
        return cls(basis, vec[:n].reshape(basis.shape).copy(), vec[n:].reshape(basis.shape).copy())

    @classmethod
    def from_functions(cls, basis, f1, f2):
        return cls(basis, basis.project(f1), basis.project(f2))

    @property
    def vector(self):
        return np.concatenate([self.c1.ravel(), self.c2.ravel()])

    def _check(self, other):
        if other.basis.key() != self.basis.key():
            raise ConfigError("states live in different bases")

    def __add__(self, other):
        self._check(other)
        return ModeState(self.basis, self.c1 + other.c1, self.c2 + other.c2)

    def __sub__(self, other):
        self._check(other)
        return ModeState(self.basis, self.c1 - other.c1, self.c2 - other.c2)

    def __mul__(self, s):
        return ModeState(self.basis, s * self.c1, s * self.c2)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def values(self, xi):
        return self.basis.values(self.c1, xi), self.basis.values(self.c2, xi)


def random_mode_state(basis: ParityBasis, rng, decay=0.6) -> ModeState:
    """Random coefficients with geometric decay in Chebyshev degree and in l."""
    k = np.arange(basis.N + 1)
    l = np.array(basis.ells)[:, None]
    env = np.exp(-decay * (k[None, :] + l))
    return ModeState(basis, rng.standard_normal(basis.shape) * env, rng.standard_normal(basis.shape) * env)
