"""Gauss hypergeometric function on [0, 1) and the mode ODEs built from it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import legendre
from scipy.special import digamma, gamma, rgamma

from .errors import ConfigError, DomainError, NumericalError

LOG_THRESHOLD = 1e-6
_EPS = 1e-17
_MAX_TERMS = 4000
_NEAR_LOG_STEP = 1e-3


def _nonpositive_integer(x, tol=1e-14):
    x = np.asarray(x)
    r = np.round(x.real)
    return (np.abs(x.imag) <= tol) & (np.abs(x.real - r) <= tol) & (r <= 0)


def _series(a, b, c, z):
    """Direct Taylor series, vectorised over broadcast parameters."""
    a, b, c, z = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (a, b, c, z)))
    term = np.ones(a.shape, dtype=complex)
    total = term.copy()
    active = np.ones(a.shape, dtype=bool)
    quiet = np.zeros(a.shape, dtype=int)
    for n in range(_MAX_TERMS):
        term = term * (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total = total + term
        small = np.abs(term) <= _EPS * np.abs(total)
        quiet = np.where(small, quiet + 1, 0)
        active = quiet < 2
        if not active.any():
            return total
    bad = np.abs(z[active]).max()
    raise NumericalError(f"hypergeometric series did not converge (|z| up to {bad:.3g})")


def _log_case(a, b, c, z, m):
    """Limit formula when c - a - b is the nonnegative integer m (scalar parameters)."""
    b = c - a - m
    w = 1.0 - z
    out = np.zeros(np.shape(z), dtype=complex)
    if m > 0:
        pref = gamma(m) * gamma(c) * rgamma(a + m) * rgamma(b + m)
        t, s = 1.0 + 0j, 0.0 + 0j
        for n in range(m):
            s = s + t * w**n
            if n + 1 < m:
                t = t * (a + n) * (b + n) / ((n + 1) * (1 - m + n))
        out = out + pref * s
    pref = -((z - 1.0) ** m) * gamma(c) * rgamma(a) * rgamma(b)
    logw = np.log(w)
    coef = 1.0 / gamma(m + 1) + 0j
    acc = np.zeros(np.shape(z), dtype=complex)
    for n in range(_MAX_TERMS):
        bracket = logw - digamma(n + 1.0) - digamma(n + m + 1.0) + digamma(a + n + m) + digamma(b + n + m)
        piece = coef * w**n * bracket
        acc = acc + piece
        if n > 3 and np.all(np.abs(piece) <= _EPS * np.maximum(np.abs(acc), 1e-300)):
            break
        coef = coef * (a + m + n) * (b + m + n) / ((n + 1) * (n + m + 1))
    else:
        raise NumericalError("logarithmic connection series did not converge")
    return out + pref * acc


def _connection(a, b, c, z):
    """Evaluate for z in (1/2, 1) through the argument 1 - z (scalar parameters)."""
    s = c - a - b
    m = int(np.round(s.real))
    if abs(s.imag) < LOG_THRESHOLD and abs(s.real - m) < LOG_THRESHOLD:
        if m < 0:
            # Euler transformation swaps the sign of c - a - b
            return (1.0 - z) ** s * _connection(c - a, c - b, c, z)
        eps = s - m
        c0 = c - eps
        base = _log_case(a, b, c0, z, m)
        if eps == 0:
            return base
        # first-order correction in c; the two-term formula is well conditioned at c0 +- h
        h = _NEAR_LOG_STEP
        slope = (_connection_vector(a, b, c0 + h, z) - _connection_vector(a, b, c0 - h, z)) / (2 * h)
        return base + eps * slope
    return _connection_vector(a, b, c, z)


def gauss_2f1(alpha, beta, gam, z, method="auto"):
    """2F1(alpha, beta; gam; z) for real z in [0, 1).

    Parameters may be complex and broadcast against z. ``method`` can force
    ``"series"`` or ``"connection"``; ``"auto"`` uses the series on [0, 1/2]
    and for terminating cases, the 1 - z connection formula otherwise.
    The result is complex unless every input is real.
    """
    real_out = all(np.isrealobj(v) for v in (alpha, beta, gam))
    alpha, beta, gam, z = np.broadcast_arrays(
        *(np.asarray(v, dtype=complex) for v in (alpha, beta, gam)), np.asarray(z, dtype=float)
    )
    if np.any(_nonpositive_integer(gam)):
        raise ConfigError("gamma parameter is a nonpositive integer")
    if np.any((z < 0) | (z >= 1)):
        raise DomainError("z must lie in [0, 1)")
    out = np.empty(z.shape, dtype=complex)
    terminating = _nonpositive_integer(alpha) | _nonpositive_integer(beta)
    if method == "series":
        use_series = np.ones(z.shape, dtype=bool)
    elif method == "connection":
        use_series = terminating | (z == 0)
    else:
        use_series = terminating | (z <= 0.5)
    if use_series.any():
        out[use_series] = _series(alpha[use_series], beta[use_series], gam[use_series], z[use_series])
    rest = ~use_series
    if rest.any():
        s = gam[rest] - alpha[rest] - beta[rest]
        near = (np.abs(s.imag) < LOG_THRESHOLD) & (np.abs(s.real - np.round(s.real)) < LOG_THRESHOLD)
        vals = np.empty(s.shape, dtype=complex)
        if (~near).any():
            a, b, c, zz = (v[rest][~near] for v in (alpha, beta, gam, z))
            vals[~near] = _connection_vector(a, b, c, zz)
        for k in np.flatnonzero(near):
            vals[k] = _connection(alpha[rest][k], beta[rest][k], gam[rest][k], z[rest][k])
        out[rest] = vals
    if real_out:
        return out.real if out.ndim else float(out.real)
    return out if out.ndim else complex(out)


def _connection_vector(a, b, c, z):
    # same two-term formula, vectorised over many non-logarithmic parameter triples
    s = c - a - b
    w = 1.0 - z
    t1 = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b) * _series(a, b, 1.0 - s, w)
    t2 = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b) * w**s * _series(c - a, c - b, 1.0 + s, w)
    return t1 + t2


def connection_condition(alpha, beta, gam, z):
    """Cancellation factor (|t1| + |t2|) / |t1 + t2| of the two-term 1 - z formula.

    Roughly the factor by which rounding errors are amplified on that route.
    """
    a, b, c, zz = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (alpha, beta, gam)), np.asarray(z, dtype=float))
    s = c - a - b
    w = 1.0 - zz
    t1 = gamma(c) * gamma(s) * rgamma(c - a) * rgamma(c - b) * _series(a, b, 1.0 - s, w)
    t2 = gamma(c) * gamma(-s) * rgamma(a) * rgamma(b) * w**s * _series(c - a, c - b, 1.0 + s, w)
    return (np.abs(t1) + np.abs(t2)) / np.abs(t1 + t2)


def gauss_2f1_derivative(alpha, beta, gam, z):
    """d/dz 2F1 = (alpha beta / gam) 2F1(alpha+1, beta+1; gam+1; z)."""
    return alpha * beta / gam * gauss_2f1(alpha + 1, beta + 1, gam + 1, z)


# ---------------------------------------------------------------------------
# eigenvalue problem of the linearisation at the ODE profile, per mode l


@dataclass(frozen=True)
class ModeODE:
    ell: int
    lam: complex
    p: float

    def params(self):
        """(alpha, beta, gam) of the hypergeometric equation satisfied by v(z)."""
        q = (self.p + 1) / (self.p - 1)
        mu = self.lam + self.ell
        return (mu - 1) / 2, mu / 2 + q, self.ell + 1.5

    def residual(self, v, dv, d2v, z):
        """z(1-z)v'' + [gam - (alpha+beta+1)z]v' - alpha beta v."""
        a, b, c = self.params()
        return z * (1 - z) * d2v + (c - (a + b + 1) * z) * dv - a * b * v


@dataclass(frozen=True)
class SolutionPair:
    """The z = 0 regular solution and the z = 1 regular solution of a mode ODE."""

    alpha: complex
    beta: complex
    gam: complex
    ell: int

    def phi0(self, z):
        return gauss_2f1(self.alpha, self.beta, self.gam, z)

    def phi1(self, z):
        z = np.asarray(z, dtype=float)
        return gauss_2f1(self.alpha, self.beta, self.alpha + self.beta + 1 - self.gam, 1.0 - z)

    def dphi0(self, z):
        return gauss_2f1_derivative(self.alpha, self.beta, self.gam, z)

    def dphi1(self, z):
        z = np.asarray(z, dtype=float)
        c1 = self.alpha + self.beta + 1 - self.gam
        return -gauss_2f1_derivative(self.alpha, self.beta, c1, 1.0 - z)

    def radial(self, which, rho):
        """u(rho) = rho^l phi(rho^2) and its rho-derivative."""
        rho = np.asarray(rho, dtype=float)
        z = rho**2
        f, df = (self.phi0, self.dphi0) if which == 0 else (self.phi1, self.dphi1)
        val = f(z)
        der = df(z)
        rl = rho**self.ell
        drl = self.ell * rho ** (self.ell - 1) if self.ell else 0.0 * rho
        return rl * val, drl * val + 2 * rho * rl * der


def eigensolution_pair(mode: ModeODE) -> SolutionPair:
    if mode.p <= 3:
        raise ConfigError("exponent must exceed 3")
    a, b, c = mode.params()
    if np.isrealobj(mode.lam):
        a, b = float(a), float(b)
    return SolutionPair(a, b, c, mode.ell)


def analytic_point_spectrum(ell: int, p: float, bound: float) -> list:
    """Eigenvalues of the mode-l linearisation with real part >= bound, descending."""
    out = []
    n = 0
    while 1 - ell - 2 * n >= bound:
        out.append(float(1 - ell - 2 * n))
        n += 1
    head = -2.0 / (p - 1) - 2.0 * p / (p - 1) - ell
    n = 0
    while head - 2 * n >= bound:
        out.append(head - 2 * n)
        n += 1
    return sorted(out, reverse=True)


def singular_connection_weight(ell, lam, p):
    """Coefficient of the (1-z)^{c-a-b} branch of phi0 at z = 1.

    It vanishes exactly on the analytic point spectrum, where phi0 extends
    smoothly to the sphere.
    """
    a, b, c = ModeODE(ell, lam, p).params()
    return gamma(c) * gamma(a + b - c) * rgamma(a) * rgamma(b)


# ---------------------------------------------------------------------------
# degenerate elliptic problem at lambda = 3/2 - 2/(p-1)


def resolvent_pair(ell: int) -> SolutionPair:
    return SolutionPair((3 + 2 * ell) / 4, (5 + 2 * ell) / 4, (3 + 2 * ell) / 2, ell)


def resolvent_wronskian(ell, rho):
    rho = np.asarray(rho, dtype=float)
    return -(2.0 ** (0.5 + ell)) / (rho**2 * (1 - rho**2) ** 1.5)


def numerical_wronskian(ell, rho):
    pair = resolvent_pair(ell)
    u0, du0 = pair.radial(0, rho)
    u1, du1 = pair.radial(1, rho)
    return u0 * du1 - du0 * u1


def resolvent_operator(ell, u, du, d2u, rho):
    """[-(1-rho^2) d^2 - (2/rho) d + 5 rho d + l(l+1)/rho^2 + 15/4] u."""
    rho = np.asarray(rho, dtype=float)
    return -(1 - rho**2) * d2u - 2 * du / rho + 5 * rho * du + ell * (ell + 1) * u / rho**2 + 3.75 * u


_GL_X, _GL_W = legendre.leggauss(24)


def _panels(sa, sb):
    """Breakpoints in s: geometric near the centre, uniform in sigma = sqrt(1-s) elsewhere."""
    pts = [sa]
    if sa > 0:
        s = sa * 1.6
        while s < min(sb, 0.5):
            pts.append(s)
            s *= 1.6
    else:
        pts.append(min(sb, 1e-3))
        s = 2e-3
        while s < min(sb, 0.5):
            pts.append(s)
            s *= 2.0
    lo = max(pts[-1], sa)
    sig_hi, sig_lo = np.sqrt(1 - lo), np.sqrt(1 - sb)
    k = max(1, int(np.ceil((sig_hi - sig_lo) / 0.08)))
    for sig in np.linspace(sig_hi, sig_lo, k + 1)[1:]:
        pts.append(1 - sig * sig)
    pts = np.unique(np.clip(pts, sa, sb))
    return pts


def _integrate(f, sa, sb):
    if sb <= sa:
        return 0.0
    total = 0.0
    pts = _panels(sa, sb)
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        # s = 1 - sigma^2 on every panel keeps the sqrt behaviour at s = 1 smooth
        s_lo, s_hi = np.sqrt(1 - lo), np.sqrt(1 - hi)
        sig = 0.5 * (s_lo + s_hi) + 0.5 * (s_lo - s_hi) * _GL_X
        s = 1 - sig**2
        total += 0.5 * (s_lo - s_hi) * np.sum(_GL_W * f(s) * 2 * sig)
    return total


def _as_callable(g, rho):
    if callable(g):
        return g
    g = np.asarray(g, dtype=float)
    if rho is None or np.shape(rho) != g.shape:
        raise ConfigError("sampled right-hand side needs matching rho nodes")
    fit = cheb.Chebyshev.fit(rho, g, deg=len(rho) - 1, domain=[0, 1])
    return fit


def resolvent_mode_solve(ell: int, g, rho) -> np.ndarray:
    """Bounded solution of the mode-l degenerate elliptic ODE by variation of constants.

    ``g`` is a callable of rho, or samples at ``rho`` (interpolated by a
    Chebyshev polynomial through those nodes).
    """
    rho = np.asarray(rho, dtype=float)
    if np.any((rho < 0) | (rho > 1)):
        raise DomainError("rho must lie in [0, 1]")
    gf = _as_callable(g, rho)
    pair = resolvent_pair(ell)
    c = 2.0 ** (0.5 + ell)

    # psi_j g / ((1 - s^2) W) with the Wronskian inserted in closed form
    def k0(s):
        return -pair.radial(0, s)[0] * gf(s) * s**2 * np.sqrt(1 - s**2) / c

    def k1(s):
        return -pair.radial(1, s)[0] * gf(s) * s**2 * np.sqrt(1 - s**2) / c

    out = np.zeros(rho.shape)
    for i, r in np.ndenumerate(rho):
        first = second = 0.0
        if r > 0:
            psi1 = pair.radial(1, r)[0] if r < 1 else 1.0
            first = -psi1 * _integrate(k0, 0.0, r)
        if r < 1:
            psi0 = pair.radial(0, r)[0]
            second = -psi0 * _integrate(k1, r, 1.0)
        out[i] = first + second
    if not np.all(np.isfinite(out)):
        raise NumericalError("variation-of-constants quadrature produced non-finite values")
    return out
