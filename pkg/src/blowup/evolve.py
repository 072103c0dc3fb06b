"""Method-of-lines integration of the similarity-coordinate system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import energy
from .errors import ConfigError, DomainError
from .family import StatePair, profile_fields
from .harmonics import ModeState, ParityBasis
from .spectral import free_operator, potential_coupling

MODES = ("linear_free", "linear_a", "nonlinear")
TAIL_LIMIT = 0.01
OVERFLOW = 1e8


@dataclass
class EvolutionConfig:
    p: float
    mode: str = "nonlinear"
    a: tuple = (0.0, 0.0, 0.0)
    N: int = 24
    Lmax: int = 8
    dtau: float | None = None
    tau_max: float = 1.0
    dealias: bool = False
    cadence: int = 10
    m: int = 0
    c_cfl: float = 1.0

    def __post_init__(self):
        if not self.p > 3:
            raise ConfigError("exponent p must exceed 3")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        self.a = tuple(float(x) for x in self.a)
        if self.a[0] or self.a[1]:
            raise DomainError("only boosts along e3 are evolved; rotate the data first")
        if self.mode == "nonlinear" and self.m != 0:
            raise ConfigError("nonlinear evolution is axisymmetric (m = 0)")
        if not 0 < self.c_cfl <= 1:
            raise ConfigError("CFL constant must lie in (0, 1]")
        if self.tau_max < 0:
            raise ConfigError("tau_max must be nonnegative")
        if self.cadence < 1:
            raise ConfigError("cadence must be at least 1")
        limit = self.dt_limit
        if self.dtau is None:
            steps = max(1, int(np.ceil(self.tau_max / limit))) if self.tau_max > 0 else 1
            self.dtau = self.tau_max / steps if self.tau_max > 0 else limit
        if not 0 < self.dtau <= limit * (1 + 1e-12):
            raise ConfigError(f"dtau = {self.dtau:.3g} violates the CFL bound {limit:.3g}")

    @property
    def dt_limit(self):
        return self.c_cfl / (self.N**2 + self.Lmax**2)

    @property
    def a3(self):
        return self.a[2]

    def basis(self) -> ParityBasis:
        kw = {}
        if self.dealias:
            kw["radial_points"] = int(np.ceil(1.5 * (2 * self.N + self.Lmax + 8)))
        return ParityBasis(self.N, self.Lmax, self.m, **kw)

    @property
    def angular_points(self):
        q = 2 * (self.Lmax + 1)
        return int(np.ceil(1.5 * q)) if self.dealias else q


class System:
    """Precomputed linear part and nonlinearity for a configuration."""

    def __init__(self, config: EvolutionConfig, basis: ParityBasis | None = None):
        self.config = config
        self.basis = basis or config.basis()
        p = config.p
        A = free_operator(p, self.basis)
        n = self.basis.size
        if config.mode == "linear_a":
            A[n:, :n] += potential_coupling(p, config.a3, self.basis.N, self.basis.ells, self.basis.m)
        self.A = A
        self.n = n

    def nonlinear_term(self, c1):
        b = self.basis
        q = self.config.angular_points
        F = b.synthesize_axis(c1, order=q)
        return b.analyze_axis(F * np.abs(F) ** (self.config.p - 1), order=q)

    def __call__(self, y):
        d = self.A @ y
        if self.config.mode == "nonlinear":
            c1 = y[: self.n].reshape(self.basis.shape)
            d[self.n :] += self.nonlinear_term(c1).ravel()
        return d


def rhs(state, config: EvolutionConfig):
    """Time derivative of a state; ModeState uses the modal system, StatePair the grid."""
    if isinstance(state, ModeState):
        sys = System(config, state.basis)
        return ModeState.from_vector(state.basis, sys(state.vector))
    if isinstance(state, StatePair):
        return _grid_rhs(state, config)
    raise ConfigError("state must be a ModeState or a StatePair")


def _grid_rhs(u: StatePair, config: EvolutionConfig) -> StatePair:
    p = config.p
    g = u.grid
    out = energy.apply_Ltilde_grid(u, p)
    if config.mode == "nonlinear":
        extra = u.psi1 * np.abs(u.psi1) ** (p - 1)
    elif config.mode == "linear_a":
        f1, _ = profile_fields(p, config.a)
        extra = p * np.abs(g.sample(f1)) ** (p - 1) * u.psi1
    else:
        extra = 0.0
    if not (out.is_finite() and np.all(np.isfinite(extra))):
        raise FloatingPointError("non-finite right-hand side")
    return StatePair(g, out.psi1, out.psi2 + extra)



@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    norm_total: list = field(default_factory=list)
    norm_sobolev: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    tail: list = field(default_factory=list)
    reason: str = "horizon"

    @property
    def final(self):
        return self.states[-1]

    def as_arrays(self):
        return np.array(self.times), np.array(self.norm_total), np.array(self.norm_sobolev)


def mode_amplitudes(state: ModeState):
    """Per-l coefficient norm of both components."""
    return np.sqrt(np.sum(state.c1**2, axis=1) + np.sum(state.c2**2, axis=1))


def tail_fraction(state: ModeState):
    """Share of coefficient energy in the top l block and top quarter of Chebyshev degrees."""
    c = np.concatenate([state.c1, state.c2], axis=0)
    nl = state.basis.n_ell
    total = np.sum(c**2)
    if total == 0:
        return 0.0
    k = max(1, (state.basis.N + 1) // 4)
    mask = np.zeros(state.c1.shape, dtype=bool)
    mask[:, -k:] = True
    if nl > 1:
        mask[-1, :] = True
    mask = np.concatenate([mask, mask], axis=0)
    return float(np.sum(c[mask] ** 2) / total)


def _record(traj, tau, state, reference):
    diff = state if reference is None else state - reference
    traj.times.append(float(tau))
    traj.states.append(state)
    traj.norm_total.append(energy.energy_norm(diff))
    traj.norm_sobolev.append(energy.sobolev_norm(diff))
    traj.amplitudes.append(mode_amplitudes(diff))
    traj.tail.append(tail_fraction(state))


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(initial, config: EvolutionConfig, reference: ModeState | None = None, diagnostics=True) -> Trajectory:
    """Classical RK4 from tau = 0 to tau_max; snapshots every ``cadence`` steps.

    ``initial`` is a ModeState or a pair of callables of xi. Norms are taken
    of the state minus ``reference`` when given. The run stops early on
    non-finite or huge values (``overflow``) or when the tail share of the
    state exceeds 1% (``tail_blowup``).
    """
    if isinstance(initial, ModeState):
        basis = initial.basis
        if basis.m != config.m:
            raise ConfigError("initial state lives in a different sector")
        state = initial
    else:
        basis = config.basis()
        state = ModeState.from_functions(basis, *initial)
    sys = System(config, basis)
    steps = int(round(config.tau_max / config.dtau)) if config.tau_max > 0 else 0
    h = config.dtau
    traj = Trajectory()
    record = _record if diagnostics else _record_light
    record(traj, 0.0, state, reference)
    y = state.vector
    tail_base = traj.tail[-1] if diagnostics else 0.0
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            y = rk4_step(sys, y, h)
        if not np.all(np.isfinite(y)) or np.abs(y).max() > OVERFLOW:
            traj.reason = "overflow"
            break
        if k % config.cadence == 0 or k == steps:
            st = ModeState.from_vector(basis, y)
            record(traj, k * h, st, reference)
            if diagnostics and traj.tail[-1] > max(TAIL_LIMIT, 2 * tail_base):
                # data that start under-resolved are only flagged once they get worse
                traj.reason = "tail_blowup"
                break
    return traj


def _record_light(traj, tau, state, reference):
    traj.times.append(float(tau))
    traj.states.append(state)


@dataclass(frozen=True)
class RateFit:
    rate: float
    stderr: float
    window: tuple
    truncated: bool


def linear_decay_rate(traj: Trajectory, floor=1e-13) -> RateFit:
    """Least-squares slope of log norm over the second half of the recorded times."""
    t, n, _ = traj.as_arrays()
    if len(t) < 10 or np.any(n <= 0):
        raise ConfigError("need at least 10 positive recorded norms")
    return fit_log_slope(t[len(t) // 2 :], n[len(n) // 2 :], floor=floor * n.max())


def fit_log_slope(t, y, floor=0.0) -> RateFit:
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    keep = y > floor
    truncated = not keep.all()
    if truncated:
        # stop at the first sample that touches the floor
        stop = np.argmin(keep)
        t, y = t[:stop], y[:stop]
    if len(t) < 3:
        raise ConfigError("too few samples above the numerical floor")
    A = np.vstack([t, np.ones_like(t)]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    resid = np.log(y) - A @ coef
    dof = max(len(t) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return RateFit(float(coef[0]), float(np.sqrt(cov[0, 0])), (float(t[0]), float(t[-1])), truncated)
