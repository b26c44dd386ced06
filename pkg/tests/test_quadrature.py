import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulseforge.quadrature import adaptive_simpson, bracketed_solve, gauss_legendre


def test_adaptive_simpson_pieces():
    edges = np.linspace(0, math.pi, 7)
    pieces = adaptive_simpson(np.sin, edges, tol=1e-13)
    np.testing.assert_allclose(pieces, np.cos(edges[:-1]) - np.cos(edges[1:]), atol=1e-13)
    assert adaptive_simpson(np.sin, [1.0]).size == 0


def test_adaptive_simpson_steep_integrand():
    total = adaptive_simpson(lambda x: np.exp(-x * x), [-8.0, 0.0, 8.0], tol=1e-12).sum()
    assert abs(total - math.sqrt(math.pi)) < 1e-11


def test_adaptive_simpson_noisy_integrand_terminates():
    rng = np.random.default_rng(0)
    noisy = lambda x: np.cos(x) * (1 + 1e-13 * rng.standard_normal(x.shape))
    total = adaptive_simpson(noisy, np.linspace(0, 1, 11), tol=1e-15).sum()
    assert abs(total - math.sin(1)) < 1e-11


def test_gauss_legendre_polynomial_exact():
    val = gauss_legendre(lambda x: x ** 7, np.array([0.0, 1.0]), np.array([1.0, 2.0]), n=4)
    np.testing.assert_allclose(val, [1 / 8, (2 ** 8 - 1) / 8], rtol=1e-14)


@given(st.floats(-0.99, 0.99))
def test_bracketed_solve_inverts_monotone(y):
    x = bracketed_solve(lambda t: np.tanh(t) - y, lambda t: 1 / np.cosh(t) ** 2,
                        np.array([-10.0]), np.array([10.0]))
    assert abs(x[0] - math.atanh(y)) < 1e-12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_bracketed_solve_nan_at_endpoint():
    # g(lo) is 0/0; the solver must still bracket using g(hi)
    g = lambda t: np.where(t == 0, np.nan, np.sin(t) / t) - 0.5
    x = bracketed_solve(g, lambda t: (t * np.cos(t) - np.sin(t)) / t ** 2, np.array([0.0]), np.array([3.0]))
    assert abs(math.sin(x[0]) / x[0] - 0.5) < 1e-13
