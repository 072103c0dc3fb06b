"""Discretised linearisation around the boosted profiles, its spectrum and spectral projections.

Operators act on stacked Chebyshev-in-z coefficients (see ``ParityBasis``):
the first half of a state vector holds psi1 for every l of the sector, the
second half psi2. On polynomial data the transport and Laplacian parts are
exact, so the only discretisation error is truncation in degree.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, DomainError, NumericalError
from .family import boost_coefficients, potential_constant
from .geometry import laplacian_matrix, transport_matrix
from .harmonics import ModeState, ParityBasis, cos_recurrence

AXISYM_CAP = 0.3
_EXTRA_ELLS = 24


@dataclass(eq=False)
class ModeOperator:
    """Dense generator on one m-sector, with metadata."""

    matrix: np.ndarray
    basis: ParityBasis
    p: float
    a3: float

    @property
    def N(self):
        return self.basis.N

    @property
    def Lmax(self):
        return self.basis.Lmax

    @property
    def m(self):
        return self.basis.m

    @property
    def ells(self):
        return self.basis.ells

    @property
    def size(self):
        return self.matrix.shape[0]

    def apply(self, state: ModeState) -> ModeState:
        return ModeState.from_vector(self.basis, self.matrix @ state.vector)

    def coupling_norm(self):
        """Largest entry linking different l (zero for the unboosted operator)."""
        n = self.basis.N + 1
        nl = self.basis.n_ell
        M = self.matrix
        worst = 0.0
        for i in range(nl):
            for k in range(nl):
                if i == k:
                    continue
                for bi in (0, nl):
                    for bk in (0, nl):
                        blk = M[(bi + i) * n : (bi + i + 1) * n, (bk + k) * n : (bk + k + 1) * n]
                        worst = max(worst, float(np.abs(blk).max()))
        return worst


def _cheb_gauss(Nq):
    k = np.arange(Nq)
    x = np.cos(np.pi * (k + 0.5) / Nq)
    j = np.arange(Nq)[:, None]
    fwd = (2.0 / Nq) * np.cos(j * np.pi * (k[None, :] + 0.5) / Nq)
    fwd[0] *= 0.5
    return (x + 1) / 2, fwd


def potential_coupling(p, a3, N, ells, m=0):
    """Coefficient-space matrix of u -> K (A0 - A3 xi^3)^{-2} u on one m-sector.

    At each radius, multiplication by xi^3 is the three-term recurrence in l
    (with a z factor on the downward entry), so the potential is a matrix
    function of that recurrence. It is evaluated on an enlarged l range, then
    restricted, at Chebyshev points in z, and mapped back to coefficients.
    """
    K = potential_constant(p)
    nl = len(ells)
    if a3 == 0.0:
        return K * np.eye(nl * (N + 1))
    A = boost_coefficients((0.0, 0.0, a3))
    big = list(range(abs(m), ells[-1] + _EXTRA_ELLS + 1))
    off = ells[0] - big[0]
    Nq = 2 * N + 16
    zq, fwd = _cheb_gauss(Nq)
    Tq = np.polynomial.chebyshev.chebvander(2 * zq - 1, N)  # (Nq, N+1)
    nb = len(big)
    vals = np.empty((Nq, nl, nl))
    eye = np.eye(nb)
    for k, z in enumerate(zq):
        J = np.zeros((nb, nb))
        for i, ell in enumerate(big):
            up, down = cos_recurrence(ell, m)
            if i + 1 < nb:
                J[i + 1, i] = up
            if i > 0:
                J[i - 1, i] = down * z
        M = A.A0 * eye - A.A3 * J
        Minv = np.linalg.solve(M, eye)
        V = K * Minv @ Minv
        vals[k] = V[off : off + nl, off : off + nl]
    out = np.zeros((nl * (N + 1), nl * (N + 1)))
    fw = fwd[: N + 1]  # (N+1, Nq)
    for i in range(nl):
        for j in range(nl):
            out[i * (N + 1) : (i + 1) * (N + 1), j * (N + 1) : (j + 1) * (N + 1)] = fw @ (vals[:, i, j, None] * Tq)
    return out


def free_operator(p, basis: ParityBasis) -> np.ndarray:
    """The potential-free similarity generator on a sector."""
    N = basis.N
    n = N + 1
    nl = basis.n_ell
    dim = nl * n
    r, q = 2.0 / (p - 1), (p + 1) / (p - 1)
    M = np.zeros((2 * dim, 2 * dim))
    I = np.eye(n)
    for i, ell in enumerate(basis.ells):
        a = slice(i * n, (i + 1) * n)
        b = slice(dim + i * n, dim + (i + 1) * n)
        T = transport_matrix(ell, N)
        M[a, a] = -T - r * I
        M[a, b] = I
        M[b, a] = laplacian_matrix(ell, N)
        M[b, b] = -T - q * I
    return M


def _check_p(p):
    if not p > 3:
        raise ConfigError("exponent p must exceed 3")


def assemble_mode_operator(p, ell: int, N: int, m: int = 0) -> ModeOperator:
    """Linearisation at the ODE profile on the single mode l."""
    _check_p(p)
    if abs(m) > ell:
        raise ConfigError("|m| must not exceed l")
    basis = ParityBasis(N, ell, m, ell_min=ell)
    return _assemble(p, 0.0, basis)


def assemble_axisym_operator(p, a3: float, N: int, Lmax: int, m: int = 0) -> ModeOperator:
    """Linearisation at the profile boosted along e3, on the sector m."""
    _check_p(p)
    if abs(a3) > AXISYM_CAP + 1e-15:
        raise DomainError(f"|a3| = {abs(a3)} exceeds the cap {AXISYM_CAP}")
    return _assemble(p, float(a3), ParityBasis(N, Lmax, m))


def _assemble(p, a3, basis):
    M = free_operator(p, basis)
    dim = basis.size
    M[dim:, :dim] += potential_coupling(p, a3, basis.N, basis.ells, basis.m)
    if not np.all(np.isfinite(M)):
        raise NumericalError("operator has non-finite entries")
    return ModeOperator(M, basis, p, a3)


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class Eigensystem:
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray


def eigenpairs(op, left=False):
    """Full discrete spectrum, sorted by descending real part."""
    M = op.matrix if isinstance(op, ModeOperator) else np.asarray(op)
    try:
        if left:
            w, vl, vr = sla.eig(M, left=True, right=True)
        else:
            w, vr = sla.eig(M)
            vl = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed (cond estimate {np.linalg.cond(M):.3g})") from exc
    order = np.lexsort((-w.imag, -w.real))
    return Eigensystem(w[order], vr[:, order], None if vl is None else vl[:, order])


@dataclass
class SpectrumReport:
    p: float
    stable: np.ndarray
    discarded: np.ndarray
    tol: float
    symmetry: tuple = (0.0, 1.0)
    gap_margin: float = field(init=False)

    def __post_init__(self):
        rest = [lam for lam in self.stable if min(abs(lam - s) for s in self.symmetry) > 1e-6]
        top = max((lam.real for lam in rest), default=-np.inf)
        self.gap_margin = float(top + 1.5 / (self.p - 1))

    def contains(self, lam, tol=1e-6):
        return bool(np.any(np.abs(self.stable - lam) < tol))

    def above(self, threshold):
        """Stable eigenvalues with real part above threshold, symmetry values excluded."""
        return [lam for lam in self.stable if lam.real > threshold and min(abs(lam - s) for s in self.symmetry) > 1e-6]


def filter_spurious(eigs_coarse, eigs_fine, tol=1e-7, p=None) -> SpectrumReport:
    """Keep eigenvalues reproduced at the finer resolution within tol (scaled by max(1, |lambda|))."""
    a = np.asarray(eigs_coarse, dtype=complex)
    b = np.asarray(eigs_fine, dtype=complex)
    keep, drop = [], []
    for lam in a:
        d = np.abs(b - lam).min() if b.size else np.inf
        (keep if d <= tol * max(1.0, abs(lam)) else drop).append(lam)
    keep = np.array(keep, dtype=complex)
    if keep.size:
        keep = keep[np.lexsort((-keep.imag, -keep.real))]
    return SpectrumReport(p if p is not None else np.nan, keep, np.array(drop, dtype=complex), tol)


def finer(N):
    M = int(np.ceil(1.5 * N))
    return M + (M % 2)


def spectrum_report(p, N, ell=None, a3=0.0, Lmax=None, m=0, tol=1e-7) -> SpectrumReport:
    """Resolution-verified spectrum from the pair (N, 3N/2)."""
    if ell is not None:
        ops = [assemble_mode_operator(p, ell, n, m) for n in (N, finer(N))]
    else:
        ops = [assemble_axisym_operator(p, a3, n, Lmax, m) for n in (N, finer(N))]
    w1 = np.linalg.eigvals(ops[0].matrix)
    w2 = np.linalg.eigvals(ops[1].matrix)
    return filter_spurious(w1, w2, tol, p)


# ---------------------------------------------------------------------------
# projections


@dataclass
class RieszProjection:
    """Spectral projection R (L^H R)^{-1} L^H onto an isolated eigenvalue group."""

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    matrix: np.ndarray

    @property
    def rank(self):
        return len(self.eigenvalues)

    def __call__(self, vec):
        return (self.matrix @ vec).real

    def numerical_rank(self, rel=1e-8):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > rel * s[0])) if s[0] > 0 else 0


def _projection(es: Eigensystem, idx):
    R = es.right[:, idx]
    L = es.left[:, idx]
    G = L.conj().T @ R
    P = R @ np.linalg.solve(G, L.conj().T)
    return RieszProjection(es.values[idx], R, L, P)


def contours(p):
    """(centre, radius) of the circles isolating the eigenvalues 0 and 1."""
    return (0.0, 1.0 / (p - 1)), (1.0, 0.5)


def _inside(es, centre, radius, guard=1e-3):
    d = np.abs(es.values - centre)
    if np.any(np.abs(d - radius) < guard):
        raise ConfigError("an eigenvalue lies on the projection contour")
    return np.flatnonzero(d < radius)


@dataclass
class ProjectionSet:
    """P onto the eigenvalue 1 and the boost projections (one per sector) onto 0."""

    P: RieszProjection
    Q: dict  # sector m -> RieszProjection, or a single entry for a one-sector operator
    complement: np.ndarray


def riesz_projections(op) -> tuple:
    """(P, Q, complement) for a single sector operator.

    P is None if the eigenvalue 1 does not occur in the sector, likewise Q.
    """
    es = eigenpairs(op, left=True)
    p = op.p
    (c0, r0), (c1, r1) = contours(p)
    i1 = _inside(es, c1, r1)
    i0 = _inside(es, c0, r0)
    P = _projection(es, i1) if i1.size else None
    Q = _projection(es, i0) if i0.size else None
    n = op.size
    comp = np.eye(n, dtype=complex)
    for X in (P, Q):
        if X is not None:
            comp = comp - X.matrix
    return P, Q, comp


def contour_projection(op: ModeOperator, centre, radius, nodes=16) -> np.ndarray:
    """(2 pi i)^{-1} times the contour integral of the resolvent, by the trapezoidal rule."""
    M = op.matrix
    n = M.shape[0]
    out = np.zeros((n, n), dtype=complex)
    I = np.eye(n)
    for k in range(nodes):
        e = np.exp(2j * np.pi * k / nodes)
        lam = centre + radius * e
        out += radius * e * np.linalg.solve(lam * I - M, I)
    return out / nodes


@dataclass
class SectorSystem:
    """Block-diagonal generator over several m-sectors (boost along e3)."""

    ops: dict  # m -> ModeOperator

    @property
    def sizes(self):
        return {m: op.size for m, op in self.ops.items()}

    @property
    def matrix(self):
        return sla.block_diag(*[op.matrix for op in self.ops.values()])

    @property
    def p(self):
        return next(iter(self.ops.values())).p

    def split(self, vec):
        out, i = {}, 0
        for m, op in self.ops.items():
            out[m] = vec[i : i + op.size]
            i += op.size
        return out

    def join(self, parts):
        return np.concatenate([parts[m] for m in self.ops])

    def states(self, vec):
        parts = self.split(vec)
        return {m: ModeState.from_vector(self.ops[m].basis, parts[m]) for m in self.ops}

    def vector(self, states):
        return self.join({m: states[m].vector for m in self.ops})


def assemble_sector_system(p, a3, N, Lmax, ms=(-1, 0, 1)) -> SectorSystem:
    return SectorSystem({m: assemble_axisym_operator(p, a3, N, Lmax, m) for m in ms})


# sector carrying each boost direction when the boost points along e3
BOOST_SECTOR = {1: 1, 2: -1, 3: 0}


@dataclass
class SystemProjections:
    system: SectorSystem
    P: np.ndarray
    Q: dict  # j -> matrix on the full stacked vector
    complement: np.ndarray

    @property
    def Q_total(self):
        return sum(self.Q.values())


def system_projections(system: SectorSystem) -> SystemProjections:
    sizes = system.sizes
    offsets, i = {}, 0
    for m in system.ops:
        offsets[m] = i
        i += sizes[m]
    n = i

    def embed(m, mat):
        out = np.zeros((n, n), dtype=complex)
        o = offsets[m]
        out[o : o + sizes[m], o : o + sizes[m]] = mat
        return out

    P = np.zeros((n, n), dtype=complex)
    Q = {}
    for m, op in system.ops.items():
        Pm, Qm, _ = riesz_projections(op)
        if Pm is not None:
            P = P + embed(m, Pm.matrix)
        if Qm is not None:
            j = {v: k for k, v in BOOST_SECTOR.items()}.get(m)
            if j is None or Qm.rank != 1:
                raise NumericalError(f"unexpected eigenvalue-0 group of rank {Qm.rank} in sector {m}")
            Q[j] = embed(m, Qm.matrix)
    comp = np.eye(n) - P - sum(Q.values())
    return SystemProjections(system, P, Q, comp)
