import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pqctwistor import ad, bundle as bd, pqc
from pqctwistor.algebra import EPS, im_inner
from pqctwistor.errors import ConstraintError, OutsideDomainError
from pqctwistor.fields import Polynomial

MODEL = pqc.heisenberg_model(1)
Q = bd.QBundle(MODEL)
F = Polynomial(7, 1.0, (0.1,))
QC = bd.QBundle(pqc.conformal_change(MODEL, F))


def v(x):
    return np.asarray(ad.value(x), float)


def q_points(seed, k, scale=0.5):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < k:
        x = rng.normal(size=3)
        if abs(im_inner(x, x)) > 0.05:
            out.append(np.concatenate([rng.normal(scale=scale, size=7), x]))
    return out


points = st.tuples(
    st.lists(st.floats(-1, 1), min_size=7, max_size=7),
    st.lists(st.floats(-2, 2), min_size=3, max_size=3),
).filter(lambda p: abs(im_inner(np.array(p[1]), np.array(p[1]))) > 0.05).map(lambda p: np.array(p[0] + p[1]))


@pytest.mark.parametrize("bundle", [Q, QC], ids=["flat", "conformal"])
def test_d_eta_lemma(bundle):
    for y in q_points(0, 10):
        np.testing.assert_allclose(v(bd.d_eta_numeric(bundle, y)), v(bd.d_eta_analytic(bundle.local(y))), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(points)
def test_corollary_identities(y):
    L = Q.local(y)
    assert abs(float(v(bd.canonical_eta(L) @ bd.chi(L))) - float(EPS @ (L.x**2))) < 1e-10
    D = v(bd.d_eta_analytic(L))
    np.testing.assert_allclose(v(bd.chi(L)) @ D, np.concatenate([np.zeros(7), -EPS * L.x]), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(points, st.lists(st.floats(-3, 3), min_size=10, max_size=10))
def test_decomposition_roundtrip(y, T):
    L = Q.local(y)
    T = np.array(T)
    np.testing.assert_allclose(v(bd.recompose(L, *bd.decompose(L, T))), T, atol=1e-10)


def test_phi_kills_lifts_and_opposite_sign_does_not():
    y = q_points(1, 1)[0]
    L = QC.local(y)
    A = np.random.default_rng(2).normal(size=7)
    assert np.abs(v(bd.phi_forms(L) @ bd.lift(L, A))).max() < 1e-12
    assert np.abs(v(bd.phi_forms_opposite_sign(L) @ bd.lift(L, A))).max() > 1e-3


@pytest.mark.parametrize("bundle", [Q, QC], ids=["flat", "conformal"])
def test_J_and_levi_form(bundle):
    for y in q_points(3, 10):
        K = bundle.k_frame(y)
        np.testing.assert_allclose(K.J @ K.J, -K.norm2 * np.eye(K.rank), atol=1e-10)
        np.testing.assert_allclose(K.gram, K.gram.T, atol=1e-12)
        np.testing.assert_allclose(K.J.T @ K.gram, -K.gram @ K.J, atol=1e-10)
        assert K.closure < 1e-10
        L = bundle.local(y)
        for b in K.basis[-4:]:
            np.testing.assert_allclose(v(bd.apply_J_split(L, b)), v(bd.apply_J(L, b)), atol=1e-10)


def levi_block(P, u, x):
    K = bd.QBundle(P).k_frame(np.concatenate([u, x]))
    return K.gram[4:, 4:], np.abs(K.gram[:4, 4:]).max()


@pytest.mark.parametrize("scal", [0.0, 48 * 0.3, -48 * 1.7])
@pytest.mark.parametrize("lam", [0.8, -1.6])
def test_levi_matrix_at_lambda_I3(scal, lam):
    h, l = scal / 48.0, 1.0 / (2.0 * lam)
    block, off = levi_block(pqc.with_scal(MODEL, scal), np.full(7, 0.3), [0.0, 0.0, lam])
    want = np.array([[h, 0, 0, l], [0, h, -l, 0], [0, -l, 0, 0], [l, 0, 0, 0]])
    np.testing.assert_allclose(block, want, atol=1e-13)
    assert off < 1e-13
    eig = np.sort(np.linalg.eigvalsh(block))
    r = np.sqrt(h * h + 4 * l * l)
    np.testing.assert_allclose(eig, np.sort([(h - r) / 2] * 2 + [(h + r) / 2] * 2), atol=1e-12)


@pytest.mark.parametrize("scal", [0.0, 48 * 0.3])
def test_levi_matrix_at_lambda_I1(scal):
    h, lam = scal / 48.0, 0.8
    l = 1.0 / (2.0 * lam)
    block, off = levi_block(pqc.with_scal(MODEL, scal), np.full(7, -0.2), [lam, 0.0, 0.0])
    # l entries carry the sign the explicit Levi formula produces
    want = np.array([[h, 0, 0, -l], [0, -h, l, 0], [0, l, 0, 0], [-l, 0, 0, 0]])
    np.testing.assert_allclose(block, want, atol=1e-13)
    assert off < 1e-13
    r = np.sqrt(h * h + 4 * l * l)
    want_eig = [(h + r) / 2, (-h + r) / 2, (h - r) / 2, (-h - r) / 2]
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(block)), np.sort(want_eig), atol=1e-12)


def test_levi_definition_route():
    y = q_points(4, 1)[0]
    L = QC.local(y)
    K = QC.k_frame(y)
    Gd = np.array([[float(v(bd.levi_G_from_d_eta(L, a, b))) for b in K.basis] for a in K.basis])
    np.testing.assert_allclose(Gd, K.gram, atol=1e-10)


def test_k_basis_lies_in_k():
    y = q_points(5, 1)[0]
    L = QC.local(y)
    for b in QC.k_frame(y).basis:
        bd.check_in_k(L, b)
    with pytest.raises(ConstraintError):
        bd.check_in_k(L, v(bd.chi(L)))
    with pytest.raises(ConstraintError):
        bd.apply_J(L, v(bd.chi(L)))


def test_null_cone_is_rejected():
    with pytest.raises(OutsideDomainError):
        Q.k_frame(np.concatenate([np.zeros(7), [1.0, 0.0, 1.0]]))


def test_lift_commutator_is_zero_on_flat_model():
    rng = np.random.default_rng(6)
    c1, c2 = rng.normal(size=(7, 7)), rng.normal(size=(7, 7))
    A = lambda u: c1 @ u
    B = lambda u: c2 @ (u * u)
    for y in q_points(7, 5):
        assert np.abs(v(Q.lift_commutator_defect(A, B, y))).max() < 1e-10


class TestConformalLifts:
    C = bd.ConformalLifts(MODEL, F)

    def test_lift_routes(self):
        rng = np.random.default_rng(8)
        for y in q_points(9, 5):
            X = v(MODEL.frame(y[:7]) @ rng.normal(size=4))
            np.testing.assert_allclose(v(self.C.bar_lift(y, X)), v(self.C.bar_lift_direct(y, X)), atol=1e-12)
            for s in range(3):
                np.testing.assert_allclose(v(self.C.bar_reeb_lift(y, s)), v(self.C.bar_reeb_lift_direct(y, s)),
                                           atol=1e-12)
            np.testing.assert_allclose(v(self.C.bar_chi(y)), v(self.C.bar_chi_assembled(y)), atol=1e-12)

    def test_unscaled_lift_is_off_by_f(self):
        y = q_points(10, 1)[0]
        X = v(MODEL.frame(y[:7]) @ np.array([1.0, 0.5, -0.3, 0.2]))
        Xh = v(bd.lift(self.C.base.local(y), X))
        good = v(self.C.bar_lift(y, X)) - Xh
        bad = v(self.C.bar_lift_unscaled(y, X)) - Xh
        assert np.abs(good).max() > 1e-3
        np.testing.assert_allclose(bad, F(y[:7]) * good, atol=1e-13)

    def test_weight_one_chi_misses(self):
        y = q_points(11, 1)[0]
        assert np.abs(v(self.C.bar_chi_unit_weight(y)) - v(self.C.bar_chi_assembled(y))).max() > 1e-3
