"""The boosted ODE-blowup family, its tangent vectors, and data rescalings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import BallGrid

RAPIDITY_CAP = 0.5


def c_p(p):
    return (2.0 * (p + 1) / (p - 1) ** 2) ** (1.0 / (p - 1))


def kappa_p(p):
    """Derivative of the rescaled ODE profile with respect to T at T = 1, in units of g_0."""
    return 2.0 * c_p(p) / (p - 1)


def critical_exponent(p):
    return 1.5 - 2.0 / (p - 1)


def potential_constant(p):
    return 2.0 * p * (p + 1) / (p - 1) ** 2


def _check_p(p):
    if not np.isfinite(p) or p <= 3:
        raise ConfigError(f"exponent p must exceed 3, got {p}")


def _rapidity(a):
    a = np.asarray(a, dtype=float).reshape(3)
    return a


@dataclass(frozen=True)
class BoostCoefficients:
    A0: float
    A1: float
    A2: float
    A3: float

    @property
    def spatial(self):
        return np.array([self.A1, self.A2, self.A3])

    def minkowski(self):
        return self.A0**2 - self.A1**2 - self.A2**2 - self.A3**2


def boost_coefficients(a) -> BoostCoefficients:
    a1, a2, a3 = _rapidity(a)
    c1, c2, c3 = np.cosh([a1, a2, a3])
    s1, s2, s3 = np.sinh([a1, a2, a3])
    return BoostCoefficients(c1 * c2 * c3, s1 * c2 * c3, s2 * c3, s3)


def boost_jacobian(a) -> np.ndarray:
    """d A_mu / d a^j as a (4, 3) array."""
    a1, a2, a3 = _rapidity(a)
    c1, c2, c3 = np.cosh([a1, a2, a3])
    s1, s2, s3 = np.sinh([a1, a2, a3])
    return np.array(
        [
            [s1 * c2 * c3, c1 * s2 * c3, c1 * c2 * s3],
            [c1 * c2 * c3, s1 * s2 * c3, s1 * c2 * s3],
            [0.0, c2 * c3, s2 * s3],
            [0.0, 0.0, c3],
        ]
    )


@dataclass(frozen=True)
class BlowupParams:
    p: float
    T: float = 1.0
    a: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        _check_p(self.p)
        if not self.T > 0:
            raise ConfigError("blowup time T must be positive")
        object.__setattr__(self, "a", tuple(float(x) for x in _rapidity(self.a)))

    @property
    def cp(self):
        return c_p(self.p)

    @property
    def boost(self):
        return boost_coefficients(self.a)


def _check_cap(a):
    if np.linalg.norm(a) > RAPIDITY_CAP + 1e-15:
        raise DomainError(f"|a| = {np.linalg.norm(a):.3g} exceeds the cap {RAPIDITY_CAP}")


def _denominator(A: BoostCoefficients, xi):
    xi = np.asarray(xi, dtype=float)
    D = A.A0 - xi @ A.spatial
    if np.any(D <= 0) or not np.all(np.isfinite(D)):
        raise DomainError("A0 - A.xi must stay positive")
    return D


def _pow(D, e):
    return np.exp(e * np.log(D))


# ---------------------------------------------------------------------------
# pointwise fields of xi, shape (..., 3) -> (...)


def profile_fields(p, a, shift=0.0):
    """The static profile (psi_a1, psi_a2) as callables of xi.

    A nonzero ``shift`` gives the same boosted solution with blowup time
    T' = T(1 + shift e^{-tau}) seen in the similarity frame of T at time tau:
    the base A0 - A.xi becomes A0 (1 + shift) - A.xi. Its shift-derivative at
    zero is -kappa_p g_a.
    """
    _check_p(p)
    a = _rapidity(a)
    _check_cap(a)
    A = boost_coefficients(a)
    if shift:
        A = BoostCoefficients(A.A0 * (1.0 + shift), A.A1, A.A2, A.A3)
    A0 = boost_coefficients(a).A0
    c = c_p(p)
    r, q = 2.0 / (p - 1), (p + 1) / (p - 1)

    def f1(xi):
        return c * _pow(_denominator(A, xi), -r)

    def f2(xi):
        return r * c * A0 * _pow(_denominator(A, xi), -q)

    return f1, f2


def tangent_g_fields(p, a):
    """Time-translation mode g_a, normalised so that g_0 = (1, (p+1)/(p-1))."""
    _check_p(p)
    a = _rapidity(a)
    _check_cap(a)
    A = boost_coefficients(a)
    r, q = 2.0 / (p - 1), (p + 1) / (p - 1)

    def f1(xi):
        return A.A0 * _pow(_denominator(A, xi), -r - 1)

    def f2(xi):
        return q * A.A0**2 * _pow(_denominator(A, xi), -r - 2)

    return f1, f2


def tangent_h_fields(p, a, j):
    """Boost mode d Psi_a / d a^j (j = 1, 2, 3) by the chain rule through A_mu(a)."""
    _check_p(p)
    if j not in (1, 2, 3):
        raise ConfigError("boost direction j must be 1, 2 or 3")
    a = _rapidity(a)
    _check_cap(a)
    A = boost_coefficients(a)
    dA = boost_jacobian(a)[:, j - 1]
    c = c_p(p)
    r, q = 2.0 / (p - 1), (p + 1) / (p - 1)
    kap = r * c

    def f1(xi):
        D = _denominator(A, xi)
        return r * c * _pow(D, -r - 1) * (np.asarray(xi) @ dA[1:] - dA[0])

    def f2(xi):
        D = _denominator(A, xi)
        dD = np.asarray(xi) @ dA[1:] - dA[0]  # -dD/da^j
        return kap * dA[0] * _pow(D, -q) + kap * q * A.A0 * _pow(D, -q - 1) * dD

    return f1, f2


# ---------------------------------------------------------------------------
# states sampled on a ball grid


@dataclass
class StatePair:
    """Two fields (psi1, psi2) sampled on the nodes of a BallGrid."""

    grid: BallGrid
    psi1: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        self.psi1 = np.asarray(self.psi1, dtype=float)
        self.psi2 = np.asarray(self.psi2, dtype=float)
        if self.psi1.shape != self.grid.shape or self.psi2.shape != self.grid.shape:
            raise ConfigError("state components must match the grid shape")

    @classmethod
    def from_functions(cls, grid, f1, f2):
        return cls(grid, grid.sample(f1), grid.sample(f2))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    def _check(self, other):
        if other.grid is not self.grid and (
            other.grid.shape != self.grid.shape or other.grid.radius != self.grid.radius
        ):
            raise ConfigError("states live on different grids")

    def __add__(self, other):
        self._check(other)
        return StatePair(self.grid, self.psi1 + other.psi1, self.psi2 + other.psi2)

    def __sub__(self, other):
        self._check(other)
        return StatePair(self.grid, self.psi1 - other.psi1, self.psi2 - other.psi2)

    def __mul__(self, s):
        return StatePair(self.grid, s * self.psi1, s * self.psi2)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def max_abs(self):
        return float(max(np.abs(self.psi1).max(), np.abs(self.psi2).max()))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.psi1)) and np.all(np.isfinite(self.psi2)))


def profile_psi_a(params: BlowupParams, grid: BallGrid) -> StatePair:
    return StatePair.from_functions(grid, *profile_fields(params.p, params.a))


def tangent_g(p, a, grid: BallGrid) -> StatePair:
    return StatePair.from_functions(grid, *tangent_g_fields(p, a))


def tangent_h(p, a, j, grid: BallGrid) -> StatePair:
    return StatePair.from_functions(grid, *tangent_h_fields(p, a, j))


def blowup_solution_u(params: BlowupParams, t, x):
    """(u, u_t) of the boosted blowup solution at time t and points x (..., 3)."""
    A = params.boost
    x = np.asarray(x, dtype=float)
    D = A.A0 * (params.T - t) - x @ A.spatial
    if np.any(D <= 0):
        raise DomainError("point lies on or beyond the blowup surface")
    c = params.cp
    r, q = 2.0 / (params.p - 1), (params.p + 1) / (params.p - 1)
    return c * _pow(D, -r), r * c * A.A0 * _pow(D, -q)


# ---------------------------------------------------------------------------
# similarity coordinates


def to_similarity(f, g, T, p, grid: BallGrid) -> StatePair:
    """Initial data (f, g) on the ball of radius T to the state at tau = 0.

    f and g are callables of x or samples on ``grid.scaled(T)``.
    """
    _check_p(p)
    if not T > 0:
        raise ConfigError("T must be positive")
    if callable(f):
        x = grid.nodes * T
        f, g = f(x), g(x)
    f, g = np.asarray(f, dtype=float), np.asarray(g, dtype=float)
    return StatePair(grid, T ** (2 / (p - 1)) * f, T ** ((p + 1) / (p - 1)) * g)


def from_similarity(state: StatePair, tau, T, p):
    """(u, u_t, physical grid) at t = T - T e^{-tau} on the ball of radius T e^{-tau}."""
    _check_p(p)
    s = T * np.exp(-tau)
    return (
        s ** (-2 / (p - 1)) * state.psi1,
        s ** (-(p + 1) / (p - 1)) * state.psi2,
        state.grid.scaled(s),
    )


@dataclass(frozen=True)
class Perturbation:
    """Perturbation profile (f, g) of the ODE blowup data, defined on |x| <= radius."""

    f: Callable
    g: Callable
    radius: float = 2.0

    @classmethod
    def zero(cls, radius=np.inf):
        z = lambda x: np.zeros(np.shape(x)[:-1])  # noqa: E731
        return cls(z, z, radius)


def prepared_fields(T, v: Perturbation, p):
    """Callables for v^T + Psi_0^T - Psi_0, the similarity data of a perturbed ODE blowup."""
    _check_p(p)
    if not T > 0:
        raise ConfigError("T must be positive")
    if v.radius < T:
        raise DomainError(f"perturbation is defined on radius {v.radius} < T = {T}")
    c = c_p(p)
    e1, e2 = 2 / (p - 1), (p + 1) / (p - 1)
    shift1 = c * (T**e1 - 1.0)
    shift2 = kappa_p(p) * (T**e2 - 1.0)

    def f1(xi):
        return T**e1 * v.f(T * np.asarray(xi)) + shift1

    def f2(xi):
        return T**e2 * v.g(T * np.asarray(xi)) + shift2

    return f1, f2


def prepare_data(T, v: Perturbation, p, grid: BallGrid) -> StatePair:
    return StatePair.from_functions(grid, *prepared_fields(T, v, p))
