"""Nonlinear stability runs: perturbed ODE-blowup data, blowup-time shooting, and diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import energy
from .errors import ConfigError, NumericalError
from .evolve import EvolutionConfig, integrate
from .family import (
    BlowupParams,
    Perturbation,
    c_p,
    kappa_p,
    prepared_fields,
    tangent_g_fields,
    tangent_h_fields,
)
from .harmonics import ModeState
from .modulation import fit_modulation, fit_rapidity, rate_fit, theorem_norm_diagnostics

MIX_NAMES = ("growing", "boost", "decaying")


def decaying_mode_fields(p):
    """The l = 0 eigenfunction of the linearization at Psi_0 with eigenvalue -1.

    Its first component is the terminating series 1 - (b/c) rho^2 with
    b = (p+1)/(p-1) - 1/2 and c = 3/2.
    """
    r = 2.0 / (p - 1)
    k = ((p + 1) / (p - 1) - 0.5) / 1.5

    def f1(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - k * np.sum(x**2, axis=-1)

    def f2(x):
        z = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        return (r - 1.0) * (1.0 - k * z) - 2.0 * k * z

    return f1, f2


def _mix_fields(p):
    return {
        "growing": tangent_g_fields(p, (0.0, 0.0, 0.0)),
        "boost": tangent_h_fields(p, (0.0, 0.0, 0.0), 3),
        "decaying": decaying_mode_fields(p),
    }


def perturbation_mix(p, delta, weights=(1.0, 1.0, 1.0), basis=None) -> Perturbation:
    """delta times a combination of unit-energy g_0, h_{0,3} and the decaying mode.

    The fields are polynomials, so they extend to every radius.
    """
    if len(weights) != 3:
        raise ConfigError("mix weights are (growing, boost, decaying)")
    fields = _mix_fields(p)
    scales = []
    for name in MIX_NAMES:
        if basis is None:
            scales.append(1.0)
            continue
        s = ModeState(basis, basis.project_axisymmetric(fields[name][0]), basis.project_axisymmetric(fields[name][1]))
        scales.append(1.0 / energy.energy_norm(s))
    coef = [delta * w * s for w, s in zip(weights, scales)]

    def f(x):
        return sum(c * fields[n][0](x) for c, n in zip(coef, MIX_NAMES))

    def g(x):
        return sum(c * fields[n][1](x) for c, n in zip(coef, MIX_NAMES))

    return Perturbation(f, g, radius=np.inf)


def initial_state(T, v: Perturbation, p, basis) -> ModeState:
    """Similarity data Psi(0) = Psi_0 + (v^T + Psi_0^T - Psi_0) in a modal basis."""
    f1, f2 = prepared_fields(T, v, p)
    c, k = c_p(p), kappa_p(p)
    return ModeState(
        basis,
        basis.project_axisymmetric(lambda x: f1(x) + c),
        basis.project_axisymmetric(lambda x: f2(x) + k),
    )


@dataclass
class ShootingLog:
    times: list = field(default_factory=list)
    T: list = field(default_factory=list)
    shift: list = field(default_factory=list)


def shoot_blowup_time(v, config: EvolutionConfig, T0=1.0, stages=(4.0, 8.0, 12.0, 16.0), max_rounds=3, tol=1e-15):
    """Choose T so that the time-translation mode is absent from the solution.

    At each stage horizon the state is fitted against the time-shifted family,
    which returns the apparent blowup time T (1 + shift e^{-tau}). Longer
    horizons sharpen the estimate because decaying content has died out;
    the horizon is only extended once the previous one is stable.
    """
    p = config.p
    basis = config.basis()
    T = float(T0)
    log = ShootingLog()
    guess = None
    for horizon in stages:
        cfg = EvolutionConfig(p, "nonlinear", N=config.N, Lmax=config.Lmax, tau_max=horizon,
                              cadence=10**9, dealias=config.dealias, c_cfl=config.c_cfl)
        for _ in range(max_rounds):
            traj = integrate(initial_state(T, v, p, basis), cfg, diagnostics=False)
            if traj.reason != "horizon":
                raise NumericalError(f"shooting run ended early ({traj.reason}) at T = {T}")
            fit = fit_modulation(traj.final, p, guess=guess, with_shift=True, neighbourhood=None)
            guess = fit.a
            correction = fit.shift * np.exp(-horizon)
            T *= 1.0 + correction
            log.times.append(horizon)
            log.T.append(T)
            log.shift.append(fit.shift)
            if abs(correction) < tol or abs(fit.shift) < 1e-12:
                break
    return T, log


@dataclass
class StabilityResult:
    p: float
    delta: float
    T: float
    times: np.ndarray
    a3: np.ndarray
    phi_norm: np.ndarray
    shift: np.ndarray
    phi_shift_norm: np.ndarray
    diagnostics: dict
    omega: object
    exponents: dict
    a_inf: float
    shooting: ShootingLog
    reason: str

    def table(self):
        """Rows (tau, |Phi|, a3, shift, |Phi with shift fitted|) for export."""
        return np.column_stack([self.times, self.phi_norm, self.a3, self.shift, self.phi_shift_norm])


def stability_run(p, delta, weights=(1.0, 1.0, 1.0), N=24, Lmax=8, tau_max=15.0, window=(2.0, 15.0),
                  cadence=None, T0=1.0) -> StabilityResult:
    """Perturb the ODE blowup, shoot T, evolve, and fit modulation parameters per snapshot."""
    cfg = EvolutionConfig(p, "nonlinear", N=N, Lmax=Lmax, tau_max=tau_max, cadence=1)
    if cadence is None:
        cadence = max(1, int(round(0.25 / cfg.dtau)))
    cfg.cadence = cadence
    basis = cfg.basis()
    v = perturbation_mix(p, delta, weights, basis)
    T, log = shoot_blowup_time(v, cfg, T0=T0, stages=tuple(s for s in (4.0, 8.0, 12.0) if s < tau_max) + (tau_max + 1.0,))
    traj = integrate(initial_state(T, v, p, basis), cfg)
    times, a3, norms, shifts, snorms = [], [], [], [], []
    guess = None
    for tau, st in zip(traj.times, traj.states):
        fit = fit_rapidity(st, p, guess=guess, neighbourhood=None)
        guess = fit.a
        sfit = fit_modulation(st, p, guess=fit.a, with_shift=True, neighbourhood=None)
        times.append(tau)
        a3.append(fit.a[2])
        norms.append(energy.energy_norm(fit.phi))
        shifts.append(sfit.shift)
        snorms.append(energy.energy_norm(sfit.phi))
    times, a3, norms, shifts, snorms = map(np.array, (times, a3, norms, shifts, snorms))
    a_inf = float(a3[-1])
    params = BlowupParams(p, T, (0.0, 0.0, a_inf))
    diags = {k: [] for k in ("h2h1", "h1l2", "l2")}
    for tau, st in zip(traj.times, traj.states):
        d = theorem_norm_diagnostics(st, params, tau)
        for k in diags:
            diags[k].append(d[k])
    diags = {k: np.array(v_) for k, v_ in diags.items()}
    omega = rate_fit(times, norms, window=window)
    exponents = {k: rate_fit(times, diags[k], window=window) for k in diags}
    return StabilityResult(p, delta, T, times, a3, norms, shifts, snorms, diags, omega, exponents, a_inf, log, traj.reason)
