import math

import numpy as np
import pytest
from scipy import special as sp

from anomaly.grids import Grid1D
from anomaly.operators import (
    BoundaryPolicyError,
    OrderField,
    OrderRangeError,
    SingularOrderError,
    caputo_l1,
    caputo_l1_series,
    gl_derivative,
    gl_matrix,
    gl_weights,
    graded_mesh,
    l1_relaxation,
    l1_weights,
    riesz_apply,
    riesz_caputo,
    spectral_frac_laplacian,
    vo_caputo_l1,
)
from anomaly.special import ml1


def test_gl_weights_match_binomials():
    a = 1.37
    g = np.array(gl_weights(a, 30))
    j = np.arange(31)
    ref = (-1.0) ** j * sp.binom(a, j)
    np.testing.assert_allclose(g, ref, atol=1e-15)
    assert g.sum() == pytest.approx(0.0, abs=0.05)


def test_weights_are_read_only():
    with pytest.raises(ValueError):
        gl_weights(0.5, 4)[0] = 2.0
    with pytest.raises(ValueError):
        l1_weights(0.5, 4)[0] = 2.0


def test_gl_order_two_is_second_difference():
    g = Grid1D.centered(2.0, 0.01, "Absorbing")
    u = g.x**2
    d = gl_derivative(u, g, 2.0)
    assert np.max(np.abs(d[1:-1] - 2.0)) < 1e-6


def test_gl_left_derivative_of_power():
    # left RL derivative of x^2 from 0 is 2 x^(2-a)/Gamma(3-a)
    a = 0.6
    h = 1e-3
    n = 2001
    x = h * np.arange(n)
    d = gl_matrix(n, h, a, "Left", shift=0) @ (x**2)
    ref = 2.0 * x ** (2 - a) / math.gamma(3 - a)
    assert abs(d[-1] - ref[-1]) / ref[-1] < 1e-3


def test_left_right_are_transposes():
    L = gl_matrix(7, 0.1, 1.4, "Left")
    R = gl_matrix(7, 0.1, 1.4, "Right")
    np.testing.assert_array_equal(L.T, R)


@pytest.mark.parametrize("a", [1.3, 1.7])
def test_riesz_matches_spectral_on_periodic_sine(a):
    # shifted GL is first order: the error halves with the grid spacing
    errs = []
    for n in (256, 512):
        g = Grid1D.periodic(2 * math.pi, n, 0.0)
        u = np.sin(g.x)
        np.testing.assert_allclose(spectral_frac_laplacian(u, g, a), u, atol=1e-11)
        errs.append(np.max(np.abs(riesz_apply(u, g, a) - u)))
    assert errs[1] < 0.01
    assert math.log2(errs[0] / errs[1]) == pytest.approx(1.0, abs=0.1)


def test_riesz_singular_and_range():
    g = Grid1D.periodic(1.0, 16)
    with pytest.raises(SingularOrderError):
        riesz_apply(np.zeros(16), g, 1.0)
    with pytest.raises(OrderRangeError):
        riesz_apply(np.zeros(16), g, 2.0)


def test_free_space_edge_check():
    g = Grid1D.centered(1.0, 0.1)
    with pytest.raises(BoundaryPolicyError):
        riesz_apply(np.ones(g.n), g, 1.5)


@pytest.mark.parametrize("a", [0.3, 0.5, 0.7])
def test_caputo_l1_of_linear_is_exact(a):
    dt = 0.01
    t = dt * np.arange(101)
    d = caputo_l1(t, dt, a)
    assert d == pytest.approx(t[-1] ** (1 - a) / math.gamma(2 - a), rel=1e-12)


def test_caputo_l1_series_matches_pointwise():
    dt = 0.05
    u = np.sin(dt * np.arange(40)) ** 2
    s = caputo_l1_series(u, dt, 0.4)
    for n in (1, 10, 39):
        assert s[n - 1] == caputo_l1(u[: n + 1], dt, 0.4)


def test_caputo_of_t_squared_convergence():
    a = 0.5
    ref = 2.0 / math.gamma(3 - a)
    errs = []
    for n in (50, 100, 200):
        dt = 1.0 / n
        t = dt * np.arange(n + 1)
        errs.append(abs(caputo_l1(t**2, dt, a) - ref))
    order = math.log2(errs[1] / errs[2])
    assert order > 2 - a - 0.1


def test_order_field_range_checks():
    f = OrderField(lambda x, t: 0.5 + 0.6 * x, 0.0, 1.0)
    with pytest.raises(OrderRangeError):
        f(np.array([0.0, 1.0]), 0.0)
    c = OrderField.const(0.4)
    assert c.constant == 0.4
    np.testing.assert_array_equal(c(np.zeros(3), 1.0), 0.4)


def test_vo_caputo_with_constant_order_is_identical():
    dt = 0.02
    u = np.cos(dt * np.arange(30))
    assert vo_caputo_l1(u, dt, OrderField.const(0.35)) == caputo_l1(u, dt, 0.35)


def test_riesz_caputo_properties():
    g = Grid1D(0.0, 0.01, 201, "Absorbing")
    d, flags = riesz_caputo(np.ones(g.n), g, 0.5, return_flags=True)
    assert np.all(d == 0.0)
    assert flags[0] and flags[-1] and not flags[1:-1].any()
    # even input gives odd output about the centre
    x = g.x - 1.0
    d = riesz_caputo(x**2, g, 0.4)
    np.testing.assert_allclose(d, -d[::-1], atol=1e-10)


def test_graded_mesh():
    t = graded_mesh(2.0, 4, 2.0)
    np.testing.assert_allclose(t, 2.0 * (np.arange(5) / 4) ** 2)
    with pytest.raises(ValueError):
        graded_mesh(1.0, 4, 0.5)


def test_l1_relaxation_uniform_matches_caputo_l1():
    # on a uniform mesh the nonuniform stencil is the classical L1 scheme
    a, dt = 0.4, 0.05
    u = l1_relaxation(a, 2.0, dt * np.arange(21))
    for n in (1, 7, 20):
        assert caputo_l1(u[: n + 1], dt, a) == pytest.approx(-2.0 * u[n], rel=1e-10)


def test_l1_relaxation_graded_order_without_roundoff_floor():
    a = 0.3
    errs = [abs(l1_relaxation(a, 1.0, graded_mesh(1.0, n, (2 - a) / a))[-1] - ml1(a, -1.0)) for n in (512, 1024, 2048)]
    assert math.log2(errs[1] / errs[2]) > 1.6
