import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blowup.errors import ConfigError
from blowup.geometry import ball_grid, chebyshev_lobatto_grid, gradient_on_ball, sphere_quadrature
from blowup.harmonics import real_sph_harm


def test_lobatto_degree_two_nodes():
    g = chebyshev_lobatto_grid(2)
    assert np.allclose(g.nodes, [0.0, 0.5, 1.0], atol=1e-15)


@pytest.mark.parametrize("N", [3, 7, 0, 2.5])
def test_lobatto_rejects_bad_orders(N):
    with pytest.raises(ConfigError):
        chebyshev_lobatto_grid(N)


def test_derivative_of_square():
    g = chebyshev_lobatto_grid(16)
    assert np.abs(g.D1 @ g.nodes**2 - 2 * g.nodes).max() < 1e-12


def test_weights_integrate_one():
    g = chebyshev_lobatto_grid(16)
    assert abs(g.integrate(np.ones(17)) - 1.0) < 1e-12
    assert np.all(g.weights > 0)
    assert np.all(np.diff(g.nodes) > 0)


@pytest.mark.parametrize("N", [8, 16, 24])
def test_derivative_exactness(N):
    g = chebyshev_lobatto_grid(N)
    r = g.nodes
    assert np.abs(g.D1 @ np.ones(N + 1)).max() < 1e-12
    for m in range(1, N):
        assert np.abs(g.D1 @ r**m - m * r ** (m - 1)).max() < 1e-10
    for m in range(2, N - 1):
        assert np.abs(g.D2 @ r**m - m * (m - 1) * r ** (m - 2)).max() < 1e-8


def test_sphere_area_and_orthonormality():
    q = sphere_quadrature(8)
    assert q.weights.shape == (9, 17)
    assert abs(q.weights.sum() - 4 * np.pi) < 1e-12
    th, ph = q.theta[:, None], q.phi[None, :]
    y10 = real_sph_harm(1, 0, th, ph)
    y21 = real_sph_harm(2, 1, th, ph)
    assert abs(q.integrate(y10 * y10) - 1.0) < 1e-12
    assert abs(q.integrate(y21 * y10)) < 1e-12


def test_sphere_gram_matrix():
    L = 6
    q = sphere_quadrature(L)
    th, ph = q.theta[:, None], q.phi[None, :]
    ys = [real_sph_harm(l, m, th, ph) for l in range(L + 1) for m in range(-l, l + 1)]
    G = np.array([[q.integrate(a * b) for b in ys] for a in ys])
    assert np.abs(G - np.eye(len(ys))).max() < 1e-12


def test_ball_volume():
    assert abs(ball_grid(12, 6).integrate(np.ones(ball_grid(12, 6).shape)) - 4 * np.pi / 3) < 1e-10


def test_gradient_polynomials():
    grid = ball_grid(12, 8)
    x = grid.nodes
    g = gradient_on_ball(grid, x[..., 2])
    assert np.abs(g[0]).max() < 1e-10 and np.abs(g[1]).max() < 1e-10
    assert np.abs(g[2] - 1).max() < 1e-10
    g = gradient_on_ball(grid, np.sum(x**2, axis=-1))
    assert np.abs(g - 2 * np.moveaxis(x, -1, 0)).max() < 1e-10
    assert np.abs(gradient_on_ball(grid, np.full(grid.shape, 3.0))).max() < 1e-10


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_divergence_theorem(c):
    grid = ball_grid(12, 8)
    x = grid.nodes
    f = c[0] + c[1] * x[..., 0] + c[2] * x[..., 1] * x[..., 2] + c[3] * x[..., 2] ** 2 + c[4] * x[..., 0] ** 3 + c[5]
    div = sum(gradient_on_ball(grid, x[..., j] * f)[j] for j in range(3))
    surface = grid.integrate_surface(f[-1])
    assert abs(grid.integrate(div) - surface) < 1e-8
