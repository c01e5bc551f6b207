import numpy as np
import pytest

from pqctwistor import bundle as bd, pqc, twistor as tw
from pqctwistor.algebra import im_inner, random_so12
from pqctwistor.errors import DegenerateStructureError, PqcError
from pqctwistor.fields import Polynomial

MODEL = pqc.heisenberg_model(1)
F = Polynomial(7, 1.0, (0.1,))
Q = bd.QBundle(MODEL)
QC = bd.QBundle(pqc.conformal_change(MODEL, F))


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("sigma", [tw.TWISTOR, tw.REFLECTOR])
def test_hyperboloid_points(sigma):
    r = rng(1)
    for _ in range(20):
        q = tw.random_hyperboloid_point(r, sigma, 7)
        assert tw.sphere_residual(q) < 1e-12
        # tangent directions of the fiber keep <I,I> fixed to first order
        for w in q.fiber_tangents():
            assert abs(2 * im_inner(q.x, w)) < 1e-12


@pytest.mark.parametrize("sigma,variant", [(tw.TWISTOR, "Z"), (tw.REFLECTOR, "R")])
@pytest.mark.parametrize("bundle,tol", [(Q, 1e-9), (QC, 1e-8)], ids=["flat", "conformal"])
def test_nijenhuis_vanishes(sigma, variant, bundle, tol):
    r = rng(2)
    for _ in range(3):
        q = tw.random_hyperboloid_point(r, sigma, 7)
        s = tw.nijenhuis(bundle, q.y, r.normal(size=8), r.normal(size=8), variant)
        assert s.norm < tol


def test_mutated_J_is_caught():
    Qm = bd.QBundle(MODEL, mutate_J=True)
    r = rng(3)
    q = tw.random_hyperboloid_point(r, tw.TWISTOR, 7)
    assert tw.nijenhuis(Qm, q.y, r.normal(size=8), r.normal(size=8), "Z").norm > 1e-2


def test_unknown_variant():
    q = tw.random_hyperboloid_point(rng(), tw.TWISTOR, 7)
    with pytest.raises(ValueError):
        tw.nijenhuis_vector(Q, Q.reeb_lift(0), Q.reeb_lift(1), q.y, "X")


def test_tensoriality():
    r = rng(4)
    q = tw.random_hyperboloid_point(r, tw.TWISTOR, 7)
    assert tw.tensoriality_gap(Q, q.y, r.normal(size=8), r.normal(size=8), r) < 1e-9


@pytest.mark.parametrize("sigma", [tw.TWISTOR, tw.REFLECTOR])
def test_levi_signature_and_contact(sigma):
    r = rng(5)
    for _ in range(5):
        q = tw.random_hyperboloid_point(r, sigma, 7)
        s = tw.levi_signature_check(Q, q.y)
        assert s.signature.as_tuple() == (4, 4, 0)
        assert s.signature.margin > 1e-7
        assert s.consistency < 1e-10
        assert tw.contact_margin(Q, q.y) > 1e-7
        a, b, c = tw.reeb_property_values(Q, q)
        assert max(a, b, c) < 1e-10


def test_sheets_have_equal_levi_spectra():
    r = rng(6)
    for _ in range(5):
        q = tw.random_hyperboloid_point(r, tw.TWISTOR, 7)
        e1 = np.linalg.eigvalsh(Q.k_frame(q.y).gram)
        e2 = np.linalg.eigvalsh(Q.k_frame(np.concatenate([q.u, -q.x])).gram)
        np.testing.assert_allclose(np.sort(e1), np.sort(e2), atol=1e-12)


def test_frobenius_on_reflector():
    q = tw.random_hyperboloid_point(rng(7), tw.REFLECTOR, 7)
    s = tw.frobenius_para(Q, q.y)
    assert s.dims == (4, 4)
    assert s.closed < 1e-9 and s.out_of_k < 1e-9
    assert s.mixed_eta > 1e-3


def test_frobenius_needs_reflector_point():
    q = tw.random_hyperboloid_point(rng(8), tw.TWISTOR, 7)
    with pytest.raises(PqcError):
        tw.frobenius_para(Q, q.y)


def test_eigen_dimensions_rejects_twistor_J():
    q = tw.random_hyperboloid_point(rng(9), tw.TWISTOR, 7)
    with pytest.raises(DegenerateStructureError):
        tw.eigen_dimensions(Q.k_frame(q.y))


def test_conformal_invariance():
    r = rng(10)
    for _ in range(5):
        q = tw.random_hyperboloid_point(r, tw.TWISTOR, 7)
        s = tw.conformal_invariance(MODEL, F, q.y)
        assert s.angle < 1e-8 and s.operator < 1e-8
        c = tw.conformal_invariance(MODEL, 1.7, q.y)
        assert c.angle < 1e-12 and c.operator < 1e-12


def test_rotation_invariance():
    r = rng(11)
    for _ in range(5):
        q = tw.random_hyperboloid_point(r, tw.REFLECTOR, 7)
        s = tw.rotation_invariance(MODEL, random_so12(r, 0.5), q.y, 1.3)
        assert max(s.angle, s.operator, s.horizontal_angle) < 1e-10


def test_principal_angle_detects_different_subspaces():
    A = np.eye(3)[:2]
    B = np.array([[1.0, 0, 0], [0, 0, 1.0]])
    assert tw.max_principal_angle(A, B) == pytest.approx(np.pi / 2)
    assert tw.max_principal_angle(A, A[::-1]) < 1e-12
