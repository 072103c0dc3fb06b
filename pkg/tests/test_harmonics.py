import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup.errors import ConfigError
from blowup.geometry import ball_grid, sphere_quadrature
from blowup.harmonics import (
    ModalField,
    ModeState,
    ParityBasis,
    analyze,
    complex_to_real,
    laplace_beltrami_check,
    real_sph_harm,
    real_to_complex,
    synthesize,
)

GRID = ball_grid(12, 8)


def _angles(x):
    r = np.linalg.norm(x, axis=-1)
    th = np.arccos(np.clip(np.where(r > 0, x[..., 2] / np.where(r > 0, r, 1), 1.0), -1, 1))
    ph = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)
    return r, th, ph


def test_single_dipole_mode():
    r, th, ph = _angles(GRID.nodes)
    modal = analyze(r * real_sph_harm(1, 0, th, ph), GRID, 4)
    assert np.abs(modal.mode(1, 0) - GRID.radial.nodes).max() < 1e-13
    modal.coeffs[1][1] = 0
    assert max(np.abs(c).max() for c in modal.coeffs) < 1e-13


def test_constant_field():
    modal = analyze(np.ones(GRID.shape), GRID, 4)
    assert np.allclose(modal.mode(0, 0), np.sqrt(4 * np.pi), atol=1e-13)
    assert max(np.abs(c).max() for c in modal.coeffs[1:]) < 1e-13


def test_analysis_limited_by_quadrature():
    with pytest.raises(ConfigError):
        analyze(np.ones(GRID.shape), GRID, 9)


def test_zero_and_single_mode_synthesis():
    z = ModalField.zeros(6, GRID.radial.nodes.size)
    assert np.abs(synthesize(z, GRID)).max() == 0
    z.coeffs[2][1 + 2] = GRID.radial.nodes**2
    r, th, ph = _angles(GRID.nodes)
    assert np.abs(synthesize(z, GRID) - r**2 * real_sph_harm(2, 1, th, ph)).max() < 1e-12


@given(st.integers(0, 2**31))
def test_polynomial_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = GRID.nodes
    c = rng.standard_normal(35)
    mons = [x[..., 0] ** i * x[..., 1] ** j * x[..., 2] ** k
            for i in range(5) for j in range(5) for k in range(5) if i + j + k <= 4]
    f = sum(ci * m for ci, m in zip(c, mons))
    assert np.abs(synthesize(analyze(f, GRID, 4), GRID) - f).max() < 1e-10


def test_parseval_on_shells():
    rng = np.random.default_rng(3)
    modal = ModalField.zeros(5, GRID.radial.nodes.size)
    for l in range(6):
        modal.coeffs[l][:] = rng.standard_normal(modal.coeffs[l].shape) * GRID.radial.nodes**l
    f = synthesize(modal, GRID)
    shell = np.array([GRID.sphere.integrate(f[k] ** 2) for k in range(f.shape[0])])
    coeff = sum(np.sum(c**2, axis=0) for c in modal.coeffs)
    assert np.abs(shell - coeff).max() < 1e-10 * max(1.0, coeff.max())


def test_complex_conversion_round_trip():
    rng = np.random.default_rng(4)
    modal = ModalField.zeros(4, 5)
    for l in range(5):
        modal.coeffs[l][:] = rng.standard_normal(modal.coeffs[l].shape)
    c = real_to_complex(modal)
    # real fields: u_{l,-m} = (-1)^m conj(u_{l,m})
    for l in range(1, 5):
        for m in range(1, l + 1):
            assert np.allclose(c.mode(l, -m), (-1) ** m * np.conj(c.mode(l, m)), atol=1e-14)
    back = complex_to_real(c)
    assert max(np.abs(a - b).max() for a, b in zip(modal.coeffs, back.coeffs)) < 1e-14


@pytest.mark.parametrize("l,m,tol", [(0, 0, 1e-12), (1, 0, 1e-10), (3, 2, 1e-8), (6, -4, 1e-8)])
def test_laplace_beltrami(l, m, tol):
    assert laplace_beltrami_check(l, m, sphere_quadrature(10)) < tol


def test_mode_regularity_at_centre():
    grid = ball_grid(16, 8)
    f = np.exp(grid.nodes[..., 2]) * np.cos(grid.nodes[..., 0])
    modal = analyze(f, grid, 6)
    rho = grid.radial.nodes
    for l in range(1, 7):
        for u in modal.coeffs[l]:
            ratio = np.abs(u[1:6]) / rho[1:6] ** l
            assert np.all(ratio < 10.0)


def test_truncation_error_decreases():
    def err(n):
        b = ParityBasis(16, n)
        f = lambda x: 1.0 / (2.0 - x[..., 2])  # noqa: E731
        c = b.project_axisymmetric(f)
        x = np.random.default_rng(5).uniform(-0.57, 0.57, (300, 3))
        return np.abs(b.values(c, x) - f(x)).max()

    errs = [err(n) for n in (2, 4, 6, 8, 10)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


class TestParityBasis:
    def test_projection_reproduces_bandlimited_field(self):
        b = ParityBasis(10, 4, 1)
        f = lambda x: x[..., 0] * (1 + x[..., 2] ** 2) + x[..., 0] * x[..., 2]  # noqa: E731
        c = b.project(f)
        x = np.random.default_rng(6).uniform(-0.5, 0.5, (50, 3))
        assert np.abs(b.values(c, x) - f(x)).max() < 1e-12

    def test_axisymmetric_projection_matches_full(self):
        b = ParityBasis(10, 6)
        f = lambda x: np.exp(x[..., 2]) * (1 + np.sum(x**2, axis=-1))  # noqa: E731
        assert np.abs(b.project(f) - b.project_axisymmetric(f)).max() < 1e-10

    def test_axisymmetric_projection_needs_m0(self):
        with pytest.raises(ConfigError):
            ParityBasis(8, 4, 1).project_axisymmetric(lambda x: x[..., 0])

    def test_rejects_bad_sizes(self):
        with pytest.raises(ConfigError):
            ParityBasis(1, 4)
        with pytest.raises(ConfigError):
            ParityBasis(8, 2, 3)

    def test_state_arithmetic(self):
        b = ParityBasis(6, 2)
        rng = np.random.default_rng(7)
        s = ModeState(b, rng.standard_normal(b.shape), rng.standard_normal(b.shape))
        assert np.array_equal(ModeState.from_vector(b, s.vector).vector, s.vector)
        assert np.allclose((s + s - 2 * s).vector, 0)
        with pytest.raises(ConfigError):
            s + ModeState.zeros(ParityBasis(6, 3))
