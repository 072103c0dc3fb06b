"""Energy inner products on H^2 x H^1 of the unit ball, and their dissipation.

Every quantity has two independent evaluations. States sampled on a
``BallGrid`` are handled with Cartesian derivatives and volume quadrature.
States in a ``ParityBasis`` are handled per mode with exact Gauss
quadrature, where the Hessian term is reduced to the Laplacian term plus
boundary terms on the unit sphere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .family import StatePair
from .geometry import coefficient_derivative, gradient_on_ball, laplacian_matrix, transport_matrix
from .harmonics import ModeState

FORMS = ("form1", "form2", "form3", "total")


# ---------------------------------------------------------------------------
# grid route


def _grad(grid, f):
    return gradient_on_ball(grid, f)


def _grid_pieces(u: StatePair):
    g = u.grid
    d1 = _grad(g, u.psi1)
    hess = np.array([_grad(g, d1[i]) for i in range(3)])
    d2 = _grad(g, u.psi2)
    outer = -1
    omega = g.sphere.points
    radial = np.einsum("j...,...j->...", d1[:, outer], omega)
    return {
        "u1": u.psi1,
        "u2": u.psi2,
        "grad1": d1,
        "hess1": hess,
        "lap1": np.trace(hess, axis1=0, axis2=1),
        "grad2": d2,
        "trace3": radial + u.psi1[outer] + u.psi2[outer],
    }


def _grid_forms(u: StatePair, v: StatePair):
    if u.grid.shape != v.grid.shape or u.grid.radius != v.grid.radius:
        raise ConfigError("states live on different grids")
    g = u.grid
    a, b = _grid_pieces(u), _grid_pieces(v)
    vol = g.integrate
    surf = lambda f: g.integrate_surface(f)  # noqa: E731
    grad2 = vol(np.sum(a["grad2"] * b["grad2"], axis=0))
    f1 = (
        vol(np.sum(a["hess1"] * b["hess1"], axis=(0, 1)))
        + grad2
        + surf(np.sum(a["grad1"][:, -1] * b["grad1"][:, -1], axis=0))
    )
    f2 = vol(a["lap1"] * b["lap1"]) + grad2 + surf(a["u2"][-1] * b["u2"][-1])
    f3 = surf(a["trace3"]) * surf(b["trace3"])
    return {"form1": f1, "form2": f2, "form3": f3, "total": f1 + f2 + f3}


def _grid_sobolev(u: StatePair):
    g = u.grid
    p = _grid_pieces(u)
    return {
        "l2_1": g.integrate(p["u1"] ** 2),
        "h1_1": g.integrate(np.sum(p["grad1"] ** 2, axis=0)),
        "h2_1": g.integrate(np.sum(p["hess1"] ** 2, axis=(0, 1))),
        "l2_2": g.integrate(p["u2"] ** 2),
        "h1_2": g.integrate(np.sum(p["grad2"] ** 2, axis=0)),
    }


def apply_Ltilde_grid(u: StatePair, p) -> StatePair:
    g = u.grid
    d1 = _grad(g, u.psi1)
    lap = sum(_grad(g, d1[j])[j] for j in range(3))
    x = g.nodes
    t1 = np.einsum("j...,...j->...", d1, x)
    t2 = np.einsum("j...,...j->...", _grad(g, u.psi2), x)
    return StatePair(
        g,
        -t1 - 2.0 / (p - 1) * u.psi1 + u.psi2,
        lap - t2 - (p + 1) / (p - 1) * u.psi2,
    )


# ---------------------------------------------------------------------------
# modal route


def _sectors(u):
    if isinstance(u, ModeState):
        return [u]
    return list(u)


def _radial_data(s: ModeState, comp):
    b = s.basis
    c = s.c1 if comp == 1 else s.c2
    D = coefficient_derivative(b.N)
    dc = c @ D.T
    d2c = dc @ D.T
    T = b.T
    return c @ T.T, dc @ T.T, d2c @ T.T, c.sum(axis=1), dc.sum(axis=1), d2c.sum(axis=1)


class _ModeData:
    """Values of u, u', u'', Laplacian at Gauss nodes and at rho = 1, per l."""

    def __init__(self, s: ModeState):
        b = s.basis
        self.basis = b
        r = b.r
        z = r**2
        ells = np.array(b.ells)[:, None]
        rl = b._rpow()
        v, dv, d2v, v1, dv1, d2v1 = _radial_data(s, 1)
        w, dw, _, w1, dw1, _ = _radial_data(s, 2)
        L = ells[:, 0]
        # u1 pieces; inner terms carry rho^l, the ball measure rho^2 is added in integrals
        self.lap = rl * (4 * z * d2v + (4 * ells + 6) * dv)
        self.drad = rl * (ells * v + 2 * z * dv)  # rho * u1'
        self.val = rl * v
        self.val2 = rl * w
        self.drad2 = rl * (ells * w + 2 * z * dw)
        # boundary values at rho = 1
        self.b_u = v1
        self.b_du = L * v1 + 2 * dv1
        self.b_d2u = L * (L - 1) * v1 + (4 * L + 2) * dv1 + 4 * d2v1
        self.b_lap = 4 * d2v1 + (4 * L + 6) * dv1
        self.b_u2 = w1
        self.L = L
        self.m = b.m


def _check_pair(a: ModeState, b: ModeState):
    if a.basis.key() != b.basis.key():
        raise ConfigError("modal states use different bases")


def _mode_forms_sector(a: _ModeData, b: _ModeData):
    B = a.basis
    wr, r = B.wr, B.r
    L = a.L
    ll = L * (L + 1)
    vol = lambda f: float(np.sum(f * wr * r**2))  # noqa: E731
    lap = vol(a.lap * b.lap)
    # gradient of u2: rho^2 (u' w' + l(l+1) u w / rho^2) = (rho u')(rho w') + l(l+1) u w
    grad2 = float(np.sum((a.drad2 * b.drad2 + ll[:, None] * a.val2 * b.val2) * wr))
    hess_bdry = 0.5 * np.sum(
        a.b_du * b.b_d2u + b.b_du * a.b_d2u + ll * (a.b_u * b.b_du + b.b_u * a.b_du - 2 * a.b_u * b.b_u)
    ) - 0.5 * np.sum(a.b_du * b.b_lap + b.b_du * a.b_lap)
    surf1 = np.sum(a.b_du * b.b_du + ll * a.b_u * b.b_u)
    f1 = lap + hess_bdry + grad2 + surf1
    f2 = lap + grad2 + np.sum(a.b_u2 * b.b_u2)
    return f1, f2


def _trace3(d: _ModeData):
    if d.m != 0:
        return 0.0
    # only l = 0 survives the sphere integral; int Y_00 = sqrt(4 pi)
    return np.sqrt(4 * np.pi) * (d.b_du[0] + d.b_u[0] + d.b_u2[0])


def _mode_forms(u, v):
    us, vs = _sectors(u), _sectors(v)
    if len(us) != len(vs):
        raise ConfigError("states have different sector layouts")
    f1 = f2 = 0.0
    t_u = t_v = 0.0
    for a, b in zip(us, vs):
        _check_pair(a, b)
        da, db = _ModeData(a), _ModeData(b)
        x1, x2 = _mode_forms_sector(da, db)
        f1 += x1
        f2 += x2
        t_u += _trace3(da)
        t_v += _trace3(db)
    f3 = t_u * t_v
    f1, f2, f3 = float(f1), float(f2), float(f3)
    return {"form1": f1, "form2": f2, "form3": f3, "total": f1 + f2 + f3}


def _mode_sobolev(u):
    out = dict(l2_1=0.0, h1_1=0.0, h2_1=0.0, l2_2=0.0, h1_2=0.0)
    for s in _sectors(u):
        d = _ModeData(s)
        B = d.basis
        wr, r = B.wr, B.r
        ll = d.L * (d.L + 1)
        out["l2_1"] += float(np.sum(d.val**2 * wr * r**2))
        out["h1_1"] += float(np.sum((d.drad**2 + ll[:, None] * d.val**2) * wr))
        hess = float(np.sum(d.lap**2 * wr * r**2)) + 0.5 * np.sum(
            2 * d.b_du * d.b_d2u + ll * (2 * d.b_u * d.b_du - 2 * d.b_u**2)
        ) - np.sum(d.b_du * d.b_lap)
        out["h2_1"] += float(hess)
        out["l2_2"] += float(np.sum(d.val2**2 * wr * r**2))
        out["h1_2"] += float(np.sum((d.drad2**2 + ll[:, None] * d.val2**2) * wr))
    return out


def apply_Ltilde_modes(u, p):
    """Free similarity generator in coefficient space (exact on polynomial data)."""
    out = []
    for s in _sectors(u):
        B = s.basis
        c1 = np.empty_like(s.c1)
        c2 = np.empty_like(s.c2)
        for i, ell in enumerate(B.ells):
            T = transport_matrix(ell, B.N)
            c1[i] = -T @ s.c1[i] - 2.0 / (p - 1) * s.c1[i] + s.c2[i]
            c2[i] = laplacian_matrix(ell, B.N) @ s.c1[i] - T @ s.c2[i] - (p + 1) / (p - 1) * s.c2[i]
        out.append(ModeState(B, c1, c2))
    return out[0] if isinstance(u, ModeState) else out


# ---------------------------------------------------------------------------
# public interface


def all_forms(u, v) -> dict:
    if isinstance(u, StatePair) and isinstance(v, StatePair):
        return _grid_forms(u, v)
    if isinstance(u, StatePair) or isinstance(v, StatePair):
        raise ConfigError("cannot pair a grid state with a modal state")
    return _mode_forms(u, v)


def inner(u, v, form: str = "total") -> float:
    if form not in FORMS:
        raise ConfigError(f"unknown form {form!r}")
    return all_forms(u, v)[form]


def energy_norm(u) -> float:
    return float(np.sqrt(max(inner(u, u), 0.0)))


def apply_Ltilde(u, p):
    if isinstance(u, StatePair):
        return apply_Ltilde_grid(u, p)
    return apply_Ltilde_modes(u, p)


def sobolev_pieces(u) -> dict:
    """Squared L2, gradient and Hessian norms of both components."""
    return _grid_sobolev(u) if isinstance(u, StatePair) else _mode_sobolev(u)


def sobolev_norm(u) -> float:
    """H^2 x H^1 norm."""
    s = sobolev_pieces(u)
    return float(np.sqrt(s["l2_1"] + s["h1_1"] + s["h2_1"] + s["l2_2"] + s["h1_2"]))


def seminorms(u) -> dict:
    """Homogeneous seminorms (H^2 x H^1, H^1 x L^2, L^2 of the first component)."""
    s = sobolev_pieces(u)
    return {
        "h2h1": float(np.sqrt(max(s["h2_1"] + s["h1_2"], 0.0))),
        "h1l2": float(np.sqrt(max(s["h1_1"] + s["l2_2"], 0.0))),
        "l2": float(np.sqrt(max(s["l2_1"], 0.0))),
    }


@dataclass(frozen=True)
class DissipativityReport:
    margins: tuple
    norms: tuple
    rates: tuple

    def relative(self):
        # a form that vanishes up to roundoff is measured against the total instead
        floor = max(1e-12 * sum(self.norms), 1e-300)
        return tuple(m / max(n, floor) for m, n in zip(self.margins, self.norms))

    def violations(self, tol=1e-8):
        return sum(1 for m, n in zip(self.margins, self.norms) if m > tol * max(n, 1.0))


def dissipativity_report(u, p) -> DissipativityReport:
    """Re(L u | u)_j + rate_j (u | u)_j for the three forms."""
    Lu = apply_Ltilde(u, p)
    a = all_forms(Lu, u)
    n = all_forms(u, u)
    r12 = 2.0 / (p - 1) + 0.5
    rates = (r12, r12, 2.0 / (p - 1))
    keys = ("form1", "form2", "form3")
    margins = tuple(a[k] + r * n[k] for k, r in zip(keys, rates))
    return DissipativityReport(margins, tuple(n[k] for k in keys), rates)


def norm_equivalence_sample(u) -> float:
    s = sobolev_norm(u)
    if s == 0.0:
        raise ConfigError("norm ratio undefined for the zero state")
    return energy_norm(u) / s
