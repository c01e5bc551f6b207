import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqctwistor import ad

# sympy at (7/10, -13/10)
GRAD = np.array([-0.72966381441041536, 0.017642905154395790])
HESS = np.array([[-0.64701055762080886, -0.21288955698142243],
                 [-0.21288955698142243, 0.15534723488475621]])
D_XXY = -1.2345269831560633
P0 = np.array([0.7, -1.3])


def f(p):
    x, y = p[0], p[1]
    return x**3 * y / (1 + x**2 * y**2)


def test_gradient_matches_symbolic():
    np.testing.assert_allclose(ad.jacobian(f, P0), GRAD, rtol=0, atol=1e-14)


def test_nested_hessian_matches_symbolic():
    H = ad.jacobian(lambda p: ad.jacobian(f, p), P0)
    np.testing.assert_allclose(H, HESS, rtol=0, atol=1e-14)


def test_third_derivative():
    ex, ey = np.eye(2)
    d = ad.derivative(lambda p: ad.derivative(lambda q: ad.derivative(f, q, ex), p, ex), P0, ey)
    assert abs(d - D_XXY) < 1e-13


def test_no_perturbation_confusion():
    # d/dx [x * d/dy (x + y)] = 1; confusing the tags gives 2
    def inner(x):
        return x * ad.derivative(lambda y: x + y, 1.0, 1.0)

    assert ad.derivative(inner, 1.0, 1.0) == 1.0


def test_solve_and_lstsq_derivatives():
    rng = np.random.default_rng(1)
    A0, B = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    b = rng.normal(size=4)

    def sol(t):
        return ad.solve(A0 + t * B, b)

    h = 1e-6
    fd = (np.linalg.solve(A0 + h * B, b) - np.linalg.solve(A0 - h * B, b)) / (2 * h)
    np.testing.assert_allclose(ad.derivative(sol, 0.0, 1.0), fd, atol=1e-7)
    M0, Mb = rng.normal(size=(7, 3)), rng.normal(size=(7, 3))
    r = rng.normal(size=7)

    def ls(t):
        return ad.lstsq(M0 + t * Mb, r)

    fd = (np.linalg.lstsq(M0 + h * Mb, r, rcond=None)[0] - np.linalg.lstsq(M0 - h * Mb, r, rcond=None)[0]) / (2 * h)
    np.testing.assert_allclose(ad.derivative(ls, 0.0, 1.0), fd, atol=1e-7)


def test_einsum_product_rule():
    rng = np.random.default_rng(2)
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
    d = ad.derivative(lambda t: ad.einsum("ij,jk->ik", A * t, B * t), 2.0, 1.0)
    np.testing.assert_allclose(d, 4.0 * A @ B, atol=1e-13)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_jvp_is_linear_in_direction(x, v):
    x, v = np.array(x), np.array(v)

    def g(p):
        return ad.stack([p[0] * p[1] ** 2, p[2] / (2.0 + p[0] ** 2)])

    J = ad.jacobian(g, x)
    np.testing.assert_allclose(ad.derivative(g, x, v), J @ v, atol=1e-12)


def test_value_strips_all_levels():
    y = ad.jvp(lambda p: ad.jvp(lambda q: q * q, p, 1.0)[1], 3.0, 1.0)
    assert y == (6.0, 2.0)
    assert ad.value(3.0) == 3.0


@pytest.mark.parametrize("k", [2, 3, -1])
def test_power(k):
    assert abs(ad.derivative(lambda x: x**k, 1.5, 1.0) - k * 1.5 ** (k - 1)) < 1e-12
