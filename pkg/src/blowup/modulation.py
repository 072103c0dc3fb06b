"""Modulation parameters of perturbed blowup: rapidity fits, blowup time, decay rates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import energy
from .errors import ConfigError, DomainError, FitError
from .evolve import RateFit, fit_log_slope
from .family import (
    BlowupParams,
    StatePair,
    blowup_solution_u,
    critical_exponent,
    from_similarity,
    kappa_p,
    profile_fields,
    tangent_g_fields,
    tangent_h_fields,
)
from .harmonics import ModeState

ORTHO_TOL = 1e-9
MAX_NEWTON = 25


# ---------------------------------------------------------------------------
# family members in the representation of a given state


def _sample(like, fields):
    if isinstance(like, ModeState):
        b = like.basis
        if b.m == 0:
            return ModeState(b, b.project_axisymmetric(fields[0]), b.project_axisymmetric(fields[1]))
        return ModeState.from_functions(b, *fields)
    return StatePair.from_functions(like.grid, *fields)


def family_member(like, p, a, shift=0.0):
    """Psi_a (optionally time-shifted) in the representation of ``like``."""
    return _sample(like, profile_fields(p, a, shift))


def _directions(like, p, a, with_shift):
    """Tangent fields whose orthogonality defines the fit."""
    js = (3,) if isinstance(like, ModeState) else (1, 2, 3)
    out = [_sample(like, tangent_h_fields(p, a, j)) for j in js]
    if with_shift:
        out.append(_sample(like, tangent_g_fields(p, a)))
    return out


@dataclass(frozen=True)
class RapidityFit:
    a: np.ndarray
    shift: float
    phi: object
    residual: float
    iterations: int

    def __iter__(self):
        # allows  a_hat, phi = fit_rapidity(...)
        return iter((self.a, self.phi))


def _check_neighbourhood(state, p, limit):
    psi0 = family_member(state, p, (0.0, 0.0, 0.0))
    n0 = energy.energy_norm(psi0)
    d = energy.energy_norm(state - psi0)
    if d > limit * n0:
        raise DomainError(f"state is {d / n0:.3g} (relative) away from Psi_0; fits need <= {limit}")


def fit_modulation(state, p, guess=None, with_shift=False, tol=ORTHO_TOL, neighbourhood=0.1) -> RapidityFit:
    """Newton solve of (Psi - Psi_a | h_{a,j}) = 0 in the total inner product.

    Modal states are axisymmetric, so only a3 is fitted; grid states fit all
    three components. With ``with_shift`` the time-shifted family is used and
    (Psi - Psi_{a,s} | g_a) = 0 is added, which removes the time-translation
    direction that grows like e^tau when the chosen T is slightly off.
    """
    if not isinstance(state, (ModeState, StatePair)):
        raise ConfigError("state must be a ModeState or a StatePair")
    if isinstance(state, ModeState) and state.basis.m != 0:
        raise ConfigError("modal fits need the axisymmetric sector")
    if neighbourhood is not None:
        _check_neighbourhood(state, p, neighbourhood)
    a = np.zeros(3) if guess is None else np.array(guess, dtype=float).reshape(3)
    modal = isinstance(state, ModeState)
    if modal:
        a[:2] = 0.0
    shift = 0.0
    idx = [2] if modal else [0, 1, 2]

    def system(a, shift):
        psi = family_member(state, p, a, shift)
        phi = state - psi
        dirs = _directions(state, p, a, with_shift)
        F = np.array([energy.inner(phi, d) for d in dirs])
        scale = np.sqrt([energy.inner(d, d) for d in dirs])
        return phi, F / scale, dirs, scale

    residual = np.inf
    polished = False
    for it in range(1, MAX_NEWTON + 1):
        phi, F, dirs, scale = system(a, shift)
        residual = float(np.abs(F).max())
        if residual < tol:
            # one more step is nearly free under quadratic convergence and takes a to roundoff
            if polished or residual < 1e-3 * tol:
                return RapidityFit(a, shift, phi, residual, it - 1)
            polished = True
            best = RapidityFit(a, shift, phi, residual, it - 1)
        # d(member)/d(a_j) = h_j and d(member)/d(shift) = -kappa_p g, up to O(phi, shift)
        moves = dirs[:-1] + [dirs[-1] * -kappa_p(p)] if with_shift else dirs
        J = -np.array([[energy.inner(mk, dj) for mk in moves] for dj in dirs]) / scale[:, None]
        step = np.linalg.solve(J, -F)
        a = a.copy()
        a[idx] += step[: len(idx)]
        if with_shift:
            shift += step[-1]
        if polished and not np.all(np.isfinite(a)):
            return best
        if np.linalg.norm(a) > 0.5 or not np.all(np.isfinite(a)):
            raise FitError(f"Newton left the admissible rapidities (a = {a}, residual {residual:.3g})")
    phi, F, _, _ = system(a, shift)
    residual = float(np.abs(F).max())
    if residual < tol:
        return RapidityFit(a, shift, phi, residual, MAX_NEWTON)
    raise FitError(f"Newton did not converge in {MAX_NEWTON} iterations; residual {residual:.3g}")


def fit_rapidity(state, p, guess=None, tol=ORTHO_TOL, neighbourhood=0.1) -> RapidityFit:
    """Rapidity a_hat with Psi - Psi_{a_hat} orthogonal to the boost modes.

    The result unpacks as ``a_hat, phi``.
    """
    return fit_modulation(state, p, guess, with_shift=False, tol=tol, neighbourhood=neighbourhood)


# ---------------------------------------------------------------------------
# blowup time


def estimate_blowup_time(t, u, p) -> float:
    """Root of the line fitted to u(t, 0)^{-(p-1)/2}."""
    t, u = np.asarray(t, dtype=float), np.asarray(u, dtype=float)
    if t.shape != u.shape or t.size < 2:
        raise ConfigError("need matching series with at least two samples")
    if np.any(u <= 0):
        raise DomainError("u(t, 0) must be positive")
    if np.any(np.diff(u) <= 0) or np.any(np.diff(t) <= 0):
        warnings.warn("blowup-time series is not monotone", RuntimeWarning, stacklevel=2)
    y = u ** (-(p - 1) / 2.0)
    slope, icpt = np.polyfit(t, y, 1)
    if slope >= 0:
        raise FitError("fitted line does not decrease; no blowup time")
    return float(-icpt / slope)


# ---------------------------------------------------------------------------
# scale-normalized distances to the blowup solution in physical variables


WEIGHT_SHIFTS = {"h2h1": 2, "h1l2": 1, "l2": 0}


def theorem_norm_diagnostics(state, params: BlowupParams, tau, frame="similarity") -> dict:
    """Weighted distances of u(t) to u_{T,a}(t) on the ball of radius T - t.

    ``state`` is the similarity state at ``tau`` in the frame of params.T, so
    t = T - T e^{-tau}. The weights (T-t)^{-s_p+k} make all three equal to the
    unit-ball seminorms of Psi - Psi_a; ``frame="direct"`` evaluates them
    instead by quadrature on the physical ball (grid route).
    """
    p = params.p
    R = params.T * np.exp(-tau)
    if not R > 0:
        raise DomainError("t must precede the blowup time")
    if frame == "similarity":
        phi = state - family_member(state, p, params.a)
        return energy.seminorms(phi)
    if frame != "direct":
        raise ConfigError("frame must be 'similarity' or 'direct'")
    if not isinstance(state, StatePair):
        raise ConfigError("the direct frame needs a grid state")
    u, ut, grid = from_similarity(state, tau, params.T, p)
    t = params.T - R
    ref_u, ref_ut = blowup_solution_u(params, t, grid.nodes)
    diff = StatePair(grid, u - ref_u, ut - ref_ut)
    raw = energy.seminorms(diff)
    sp = critical_exponent(p)
    return {k: raw[k] * R ** (-sp + WEIGHT_SHIFTS[k]) for k in raw}


def to_grid_state(state: ModeState, grid) -> StatePair:
    """Evaluate a modal state on the nodes of a BallGrid."""
    v1, v2 = state.values(grid.nodes)
    return StatePair(grid, v1, v2)


# ---------------------------------------------------------------------------
# decay rates


@dataclass(frozen=True)
class DecayRate:
    omega: float
    band: tuple
    window: tuple
    truncated: bool


def _floor_cut(t, y, rise=3.0):
    """Index after which the series is floor- or noise-dominated.

    A series that climbs back more than ``rise`` times above its running
    minimum has hit the numerical floor at that minimum.
    """
    run = np.minimum.accumulate(y)
    bad = np.nonzero(y > rise * run)[0]
    if bad.size == 0:
        return len(y)
    return int(np.argmin(y[: bad[0]])) + 1


def rate_fit(times, norms, window=None, floor=0.0) -> DecayRate:
    """Exponent omega of norms ~ e^{-omega tau}, with a two-sigma band."""
    t, y = np.asarray(times, dtype=float), np.asarray(norms, dtype=float)
    if t.shape != y.shape:
        raise ConfigError("times and norms differ in length")
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if t.size < 10 or np.any(y <= 0):
        raise ConfigError("need at least 10 positive samples")
    stop = _floor_cut(t, y)
    truncated = stop < len(y)
    fit: RateFit = fit_log_slope(t[:stop], y[:stop], floor=floor)
    omega = -fit.rate
    band = (omega - 2 * fit.stderr, omega + 2 * fit.stderr)
    return DecayRate(omega, band, fit.window, truncated or fit.truncated)
