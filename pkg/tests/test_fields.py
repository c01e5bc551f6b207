import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqctwistor import fields
from pqctwistor.fields import Chart, Polynomial

pts = st.lists(st.floats(-2, 2), min_size=3, max_size=3).map(np.array)


def theta(p):
    x, y, z = p[0], p[1], p[2]
    return fields.ad.stack([y * z * z, x * x * y, x * y * z])


def test_exterior_derivative_closed_form():
    p = np.array([0.3, -1.1, 0.7])
    x, y, z = p
    # d(yz^2 dx + x^2 y dy + xyz dz)
    want = np.zeros((3, 3))
    want[0, 1] = 2 * x * y - z * z
    want[0, 2] = y * z - 2 * y * z
    want[1, 2] = x * z
    want = want - want.T
    np.testing.assert_allclose(fields.exterior_derivative_at(theta, p), want, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(pts)
def test_dd_is_zero(p):
    def f(q):
        return q[0] ** 2 * q[1] + q[2] / (1.0 + q[1] ** 2)

    d_df = fields.exterior_derivative(fields.exterior_derivative(f, 0))(p)
    assert np.abs(d_df).max() < 1e-12


def test_lie_bracket_coordinate_example():
    # [d/dx, x d/dy] = d/dy
    A = fields.constant_field([1.0, 0.0, 0.0])

    def B(p):
        return fields.ad.stack([0.0 * p[0], p[0], 0.0 * p[0]])

    np.testing.assert_allclose(fields.lie_bracket_at(A, B, np.array([0.2, 0.5, 1.0])), [0, 1, 0])


@settings(max_examples=30, deadline=None)
@given(pts)
def test_jacobi_identity(p):
    A = lambda q: fields.ad.stack([q[1], q[2] * q[0], 1.0 + 0 * q[0]])
    B = lambda q: fields.ad.stack([q[2] ** 2, q[0], q[1] * q[0]])
    C = lambda q: fields.ad.stack([q[0] * q[1], 1.0 + 0 * q[0], q[2]])
    br = fields.lie_bracket
    total = br(A, br(B, C))(p) + br(B, br(C, A))(p) + br(C, br(A, B))(p)
    assert np.abs(total).max() < 1e-11


@settings(max_examples=30, deadline=None)
@given(pts)
def test_cartan_formula_for_d(p):
    # d theta(A, B) = A theta(B) - B theta(A) - theta([A, B])
    A = lambda q: fields.ad.stack([q[1], q[2] * q[0], 1.0 + 0 * q[0]])
    B = lambda q: fields.ad.stack([q[2] ** 2, q[0], q[1] * q[0]])
    lhs = fields.pair(fields.exterior_derivative_at(theta, p), A(p), B(p))
    rhs = (fields.directional(lambda q: theta(q) @ B(q), p, A(p))
           - fields.directional(lambda q: theta(q) @ A(q), p, B(p))
           - theta(p) @ fields.lie_bracket_at(A, B, p))
    assert abs(lhs - rhs) < 1e-10


def test_wedge_and_interior():
    a, b = np.array([1.0, 2.0, 0.0]), np.array([0.0, 1.0, 3.0])
    W = fields.wedge(a, b)
    X, Y = np.array([1.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0])
    assert fields.pair(W, X, Y) == pytest.approx((a @ X) * (b @ Y) - (a @ Y) * (b @ X))
    np.testing.assert_allclose(fields.interior(X, W) @ Y, fields.pair(W, X, Y))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(1, 2 ** 32 - 1))
def test_signature_agrees_with_ldl_inertia(p, m, seed):
    rng = np.random.default_rng(seed)
    d = np.concatenate([rng.uniform(0.5, 2, p), -rng.uniform(0.5, 2, m), np.zeros(1)])
    Qm, _ = np.linalg.qr(rng.normal(size=(len(d), len(d))))
    S = Qm @ np.diag(d) @ Qm.T
    S = (S + S.T) / 2
    sig = fields.signature(S)
    assert sig.as_tuple() == (p, m, 1)
    assert fields.inertia_ldl(S) == (p, m, 1)


def test_signature_rejects_asymmetric():
    with pytest.raises(fields.AsymmetricMatrixError):
        fields.signature(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_polynomial_parse_and_eval():
    f = Polynomial.parse("poly:1,0.5,-2;0:2:3", 3)
    p = np.array([2.0, 1.0, -1.0])
    assert f(p) == pytest.approx(1 + 0.5 * 2 - 2 * 1 + 3 * 2 * -1)
    assert not f.is_constant
    c = Polynomial.parse("const:2.5", 3)
    assert c.is_constant and c(p) == 2.5


@pytest.mark.parametrize("text", ["poly:", "exp:1", "poly:1;0:9:1", "poly:1,2,3,4,5", "const:x"])
def test_polynomial_parse_errors(text):
    with pytest.raises(ValueError):
        Polynomial.parse(text, 3)


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart(0)
    with pytest.raises(ValueError):
        Chart(2, ("a",))
    c = Chart(2, ("a", "b"))
    assert c.index("b") == 1
    with pytest.raises(ValueError):
        c.point([1.0, 2.0, 3.0])
