"""Grids, differentiation matrices and quadrature on [0,1], the sphere and the ball."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import legendre

from .errors import ConfigError


@dataclass(frozen=True)
class RadialGrid:
    """Chebyshev-Gauss-Lobatto nodes on [0, 1] with spectral derivatives."""

    N: int
    nodes: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def _cheb_matrix(N):
    # Lobatto nodes x_k = cos(pi k / N) and the classical collocation matrix.
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def clenshaw_curtis_weights(N):
    """Weights for the Lobatto nodes cos(pi k/N) on [-1, 1]."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    inner = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w


def chebyshev_lobatto_grid(N: int) -> RadialGrid:
    """Lobatto grid on [0, 1] with rho_0 = 0 and rho_N = 1.

    Weights integrate against d(rho) and sum to one.
    """
    if int(N) != N or N < 2 or N % 2:
        raise ConfigError(f"radial order N must be an even integer >= 2, got {N}")
    N = int(N)
    x, Dx = _cheb_matrix(N)
    nodes = (1.0 - x) / 2.0
    nodes[0], nodes[-1] = 0.0, 1.0
    D1 = -2.0 * Dx
    D2 = D1 @ D1
    w = clenshaw_curtis_weights(N) / 2.0
    return RadialGrid(N, nodes, D1, D2, w)


@dataclass(frozen=True)
class SphereQuadrature:
    """Gauss-Legendre in cos(theta) times a uniform azimuthal grid."""

    L: int
    cos_theta: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray  # shape (L+1, 2L+1)

    @property
    def shape(self):
        return self.weights.shape

    @property
    def points(self):
        st = np.sqrt(1.0 - self.cos_theta**2)
        ct, cp, sp = self.cos_theta[:, None], np.cos(self.phi)[None, :], np.sin(self.phi)[None, :]
        return np.stack(np.broadcast_arrays(st[:, None] * cp, st[:, None] * sp, ct), axis=-1)

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-2, -1], [0, 1]))


def sphere_quadrature(L: int) -> SphereQuadrature:
    if int(L) != L or L < 1:
        raise ConfigError(f"sphere order L must be a positive integer, got {L}")
    L = int(L)
    x, w = legendre.leggauss(L + 1)
    x, w = x[::-1].copy(), w[::-1].copy()
    nphi = 2 * L + 1
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    weights = np.outer(w, np.full(nphi, 2.0 * np.pi / nphi))
    return SphereQuadrature(L, x, np.arccos(x), phi, weights)


@dataclass(frozen=True)
class BallGrid:
    """Product grid rho_k * omega_ij on the ball of the given radius."""

    radial: RadialGrid
    sphere: SphereQuadrature
    radius: float = 1.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def shape(self):
        return (self.radial.N + 1,) + self.sphere.shape

    @property
    def rho(self):
        return self.radius * self.radial.nodes

    @property
    def nodes(self):
        if "nodes" not in self._cache:
            self._cache["nodes"] = self.rho[:, None, None, None] * self.sphere.points[None]
        return self._cache["nodes"]

    @property
    def volume_weights(self):
        if "vw" not in self._cache:
            r = self.radial.nodes
            wr = self.radial.weights * r**2 * self.radius**3
            self._cache["vw"] = wr[:, None, None] * self.sphere.weights[None]
        return self._cache["vw"]

    def integrate(self, values):
        return np.sum(self.volume_weights * values)

    def integrate_surface(self, values):
        """Integral over the boundary sphere of values sampled on the outer shell."""
        return self.sphere.integrate(values) * self.radius**2

    def sample(self, fn):
        """Evaluate fn on the node array of shape (..., 3)."""
        return np.asarray(fn(self.nodes))

    def scaled(self, radius: float) -> "BallGrid":
        return BallGrid(self.radial, self.sphere, float(radius))


def ball_grid(N: int, L: int, radius: float = 1.0) -> BallGrid:
    return BallGrid(chebyshev_lobatto_grid(N), sphere_quadrature(L), float(radius))


def gradient_on_ball(grid: BallGrid, f) -> np.ndarray:
    """Cartesian gradient of nodal samples, shape (3,) + grid.shape.

    Uses d/drho along rays plus the angular gradient from a per-shell
    harmonic transform. At the centre only the l = 1 content survives.
    """
    from .harmonics import analyze, shell_tangential_gradient

    f = np.asarray(f, dtype=float)
    R = grid.radius
    rho = grid.radial.nodes
    dr = np.tensordot(grid.radial.D1, f, axes=(1, 0)) / R
    omega = grid.sphere.points
    grad = omega[None].transpose(3, 0, 1, 2) * dr[None]
    modal = analyze(f, grid, grid.sphere.L)
    tang = shell_tangential_gradient(modal, grid.sphere)  # (3, N+1, nt, nphi), unit sphere
    inner = rho > 0
    grad[:, inner] += tang[:, inner] / (R * rho[inner])[None, :, None, None]
    # origin: gradient of the linear part, sqrt(3/4pi) * d/drho of the l=1 radial coefficients
    c = np.sqrt(3.0 / (4.0 * np.pi))
    d1 = grid.radial.D1[0] / R
    u1 = modal.coeffs[1]  # (2l+1, N+1) ordered m = -1, 0, 1
    g0 = c * np.array([d1 @ u1[2], d1 @ u1[0], d1 @ u1[1]])
    grad[:, ~inner] = g0[:, None, None, None]
    return grad


def coefficient_derivative(N: int) -> np.ndarray:
    """d/dz acting on Chebyshev coefficients of degree <= N on z in [0, 1]."""
    D = np.zeros((N + 1, N + 1))
    for k in range(1, N + 1):
        e = np.zeros(k + 1)
        e[k] = 1.0
        d = cheb.chebder(e)
        D[: d.size, k] = 2.0 * d
    return D


def coefficient_multiply_z(N: int) -> np.ndarray:
    """Multiplication by z = (1 + x)/2 on coefficients, truncated to degree N."""
    X = np.zeros((N + 1, N + 1))
    X[1, 0] = 1.0
    for k in range(1, N + 1):
        X[k - 1, k] += 0.5
        if k + 1 <= N:
            X[k + 1, k] += 0.5
    return 0.5 * (X + np.eye(N + 1))


def chebyshev_z_nodes(N: int) -> np.ndarray:
    """Lobatto nodes in z, increasing from 0 to 1."""
    z = (1.0 - np.cos(np.pi * np.arange(N + 1) / N)) / 2.0
    z[0], z[-1] = 0.0, 1.0
    return z


def z_vandermonde(z, N: int) -> np.ndarray:
    """Values of T_j(2z - 1), j <= N, at the points z."""
    return cheb.chebvander(2.0 * np.asarray(z, dtype=float) - 1.0, N)


def gauss_radial(M: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = legendre.leggauss(M)
    return (x + 1.0) / 2.0, w / 2.0


def transport_matrix(ell: int, N: int) -> np.ndarray:
    """xi . grad acting on v of u = rho^l v(rho^2): l + 2 z d/dz."""
    return ell * np.eye(N + 1) + 2.0 * coefficient_multiply_z(N) @ coefficient_derivative(N)


def laplacian_matrix(ell: int, N: int) -> np.ndarray:
    """Laplacian acting on v of u = rho^l v(rho^2): 4 z v'' + (4l + 6) v'."""
    D = coefficient_derivative(N)
    return 4.0 * coefficient_multiply_z(N) @ D @ D + (4 * ell + 6) * D
