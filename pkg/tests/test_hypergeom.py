import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from blowup.errors import ConfigError, DomainError
from blowup.hypergeom import (
    ModeODE,
    analytic_point_spectrum,
    connection_condition,
    eigensolution_pair,
    gauss_2f1,
    gauss_2f1_derivative,
    numerical_wronskian,
    resolvent_mode_solve,
    resolvent_wronskian,
    singular_connection_weight,
)


def mp_2f1(a, b, c, z):
    return complex(mpmath.hyp2f1(a, b, c, z))


def test_value_at_zero():
    assert gauss_2f1(0.3, -1.7, 2.2, 0.0) == 1.0


def test_log_identity():
    assert abs(gauss_2f1(1.0, 1.0, 2.0, 0.5) - 1.3862943611198906) < 1e-14
    z = np.linspace(0.01, 0.99, 99)
    assert np.abs(gauss_2f1(1.0, 1.0, 2.0, z) + np.log1p(-z) / z).max() < 1e-12


@pytest.mark.parametrize("b,c", [(0.7, 1.5), (-2.5, 3.0), (4.0, 0.5)])
def test_terminating_linear(b, c):
    z = np.linspace(0, 0.99, 30)
    assert np.abs(gauss_2f1(-1.0, b, c, z) - (1 - b * z / c)).max() < 1e-15


def test_parameter_errors():
    with pytest.raises(ConfigError):
        gauss_2f1(1.0, 1.0, -2.0, 0.3)
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, 2.0, 1.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 5), st.floats(0, 0.97))
def test_against_mpmath(a, b, c, z):
    ref = mp_2f1(a, b, c, z)
    s = c - a - b
    if z > 0.5 and abs(s - round(s)) < 1e-6:
        return  # logarithmic branch covered separately
    kappa = connection_condition(a, b, c, z) if z > 0.5 else 1.0
    tol = 1e-12 * max(1.0, abs(ref)) * max(1.0, float(np.real(kappa)))
    assert abs(gauss_2f1(a, b, c, z) - ref.real) < tol


@pytest.mark.parametrize("a,b,c", [(0.5, 0.5, 1.0), (1.0, 2.0, 3.0), (0.25, 0.75, 2.0), (0.3, 0.7, 1.0 + 1e-8)])
def test_logarithmic_branch(a, b, c):
    z = np.array([0.6, 0.8, 0.95, 0.99])
    ref = np.array([mp_2f1(a, b, c, x).real for x in z])
    assert np.abs(gauss_2f1(a, b, c, z) - ref).max() < 1e-10 * np.abs(ref).max()


def test_complex_parameters():
    a, b, c = 0.3 + 0.4j, 1.1 - 0.2j, 2.5
    for z in (0.2, 0.7, 0.9):
        assert abs(gauss_2f1(a, b, c, z) - mp_2f1(a, b, c, z)) < 1e-12


def test_derivative():
    a, b, c, z = 0.7, -1.3, 2.1, 0.6
    ref = complex(mpmath.diff(lambda t: mpmath.hyp2f1(a, b, c, t), z)).real
    assert abs(gauss_2f1_derivative(a, b, c, z) - ref) < 1e-12


def test_series_and_connection_agree_mid_interval():
    rng = np.random.default_rng(0)
    n = 2000
    a, b = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
    c, z = rng.uniform(0.2, 5, n), rng.uniform(0.4, 0.6, n)
    s = c - a - b
    keep = (np.abs(s - np.round(s)) > 0.05) & (connection_condition(a, b, c, z) <= 1e3)
    a, b, c, z = a[keep], b[keep], c[keep], z[keep]
    ser = gauss_2f1(a, b, c, z, method="series")
    con = gauss_2f1(a, b, c, z, method="connection")
    assert np.max(np.abs(ser - con) / np.maximum(1, np.abs(ser))) < 1e-11


class TestModeSolutions:
    def test_dipole_boost_mode_is_linear(self):
        pair = eigensolution_pair(ModeODE(1, 0.0, 7.0))
        rho = np.linspace(0.1, 0.9, 9)
        u, _ = pair.radial(0, rho)
        assert np.allclose(u / rho, u[0] / rho[0], rtol=1e-13)

    def test_time_translation_mode_is_constant(self):
        pair = eigensolution_pair(ModeODE(0, 1.0, 5.0))
        assert pair.alpha == 0
        assert np.allclose(pair.phi0(np.linspace(0, 0.9, 10)), 1.0)

    @pytest.mark.parametrize("ell,lam", [(0, 0.3), (2, -0.7), (3, 0.1 + 0.5j)])
    def test_ode_residual(self, ell, lam):
        mode = ModeODE(ell, lam, 7.0)
        pair = eigensolution_pair(mode)
        a, b, c = mode.params()
        z = np.linspace(0.05, 0.95, 20)
        # second derivatives through the contiguous relation, in z and in 1 - z
        c1 = a + b + 1 - c
        d2_0 = a * b / c * gauss_2f1_derivative(a + 1, b + 1, c + 1, z)
        d2_1 = a * b / c1 * gauss_2f1_derivative(a + 1, b + 1, c1 + 1, 1 - z)
        for phi, dphi, d2 in ((pair.phi0, pair.dphi0, d2_0), (pair.phi1, pair.dphi1, d2_1)):
            v = phi(z)
            r = mode.residual(v, dphi(z), d2, z)
            assert np.abs(r).max() < 1e-9 * max(1.0, np.abs(v).max())

    def test_requires_supercritical_exponent(self):
        with pytest.raises(ConfigError):
            eigensolution_pair(ModeODE(0, 1.0, 3.0))


class TestPointSpectrum:
    def test_spherical_mode(self):
        spec = analytic_point_spectrum(0, 7.0, -4)
        assert {1.0, -1.0, -3.0} <= set(spec)
        # the second family starts at -2/(p-1) - 2p/(p-1) = -8/3 for p = 7
        assert any(abs(x + 8.0 / 3.0) < 1e-14 for x in spec)
        assert len(spec) == 4

    def test_dipole_mode(self):
        assert analytic_point_spectrum(1, 7.0, -3) == [0.0, -2.0]

    def test_second_family_head(self):
        assert -3.0 in analytic_point_spectrum(0, 5.0, -3.0)
        assert -2.0 / 4 - 10.0 / 4 == -3.0

    @pytest.mark.parametrize("p", [4.0, 5.0, 7.0])
    @pytest.mark.parametrize("ell", [0, 1, 2, 3])
    def test_eigenvalues_cancel_singular_branch(self, p, ell):
        for lam in analytic_point_spectrum(ell, p, -6):
            assert abs(singular_connection_weight(ell, lam, p)) < 1e-12
        assert abs(singular_connection_weight(ell, 0.37, p)) > 1e-3

    @pytest.mark.parametrize("ell,n", [(0, 1), (1, 2), (2, 1)])
    def test_eigenfunctions_are_polynomials(self, ell, n):
        lam = 1 - ell - 2 * n
        pair = eigensolution_pair(ModeODE(ell, lam, 7.0))
        rho = np.linspace(0.0, 0.99, 40)
        u, _ = pair.radial(0, rho)
        coef = np.polynomial.polynomial.polyfit(rho, u, ell + 2 * n + 4)
        assert np.abs(coef[ell + 2 * n + 1:]).max() < 1e-9
        assert abs(coef[ell + 2 * n]) > 1e-3


def test_mode_ode_reduces_to_hypergeometric_equation():
    rho, z, ell = sp.symbols("rho z ell", positive=True)
    v = sp.Function("v")
    u = rho**ell * v(rho**2)
    lhs = (-(1 - rho**2) * sp.diff(u, rho, 2) - 2 / rho * sp.diff(u, rho) + 5 * rho * sp.diff(u, rho)
           + ell * (ell + 1) / rho**2 * u + sp.Rational(15, 4) * u)
    a, b, c = (3 + 2 * ell) / 4, (5 + 2 * ell) / 4, (3 + 2 * ell) / 2
    V = v(z)
    hyp = z * (1 - z) * sp.diff(V, z, 2) + (c - (a + b + 1) * z) * sp.diff(V, z) - a * b * V
    expr = (lhs / rho**ell).subs(rho, sp.sqrt(z)).doit()
    assert sp.simplify(expr + 4 * hyp) == 0


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_wronskian(ell):
    rho = np.linspace(0.2, 0.9, 8)
    assert np.abs(numerical_wronskian(ell, rho) / resolvent_wronskian(ell, rho) - 1).max() < 1e-10


def test_resolvent_of_zero():
    rho = np.linspace(0, 1, 7)
    assert np.abs(resolvent_mode_solve(2, lambda r: 0 * r, rho)).max() == 0


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
@pytest.mark.parametrize("profile", ["cos", "poly", "rational"])
def test_resolvent_manufactured_symbolic(ell, profile):
    r = sp.symbols("r", positive=True)
    f = {"cos": sp.cos(r**2), "poly": 1 + 3 * r**2 - r**4, "rational": 1 / (3 - r**2)}[profile]
    u = r**ell * f
    g = (-(1 - r**2) * sp.diff(u, r, 2) - 2 / r * sp.diff(u, r) + 5 * r * sp.diff(u, r)
         + ell * (ell + 1) / r**2 * u + sp.Rational(15, 4) * u)
    g_num = sp.lambdify(r, sp.simplify(g), "numpy")
    u_num = sp.lambdify(r, u, "numpy")
    rho = np.linspace(0.05, 0.95, 9)
    sol = resolvent_mode_solve(ell, lambda s: g_num(np.asarray(s, dtype=float)) + 0 * s, rho)
    assert np.abs(sol - u_num(rho)).max() < 1e-8


def test_resolvent_domain():
    with pytest.raises(DomainError):
        resolvent_mode_solve(0, lambda r: r, np.array([1.2]))
