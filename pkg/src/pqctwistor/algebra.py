"""Split quaternions and the linear algebra built on them.

Basis ``1, j1, j2, j3`` with ``j1^2 = j2^2 = 1`` and ``j1 j2 = -j2 j1 = j3``.
Imaginary parts are handled as length-3 arrays carrying the indefinite inner
product of signature ``(-, -, +)``.  Coefficients are generic scalars, so the
same code runs on floats and on :class:`~pqctwistor.ad.Dual` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.linalg

from . import ad
from .errors import RelationError

EPS = np.array([-1.0, -1.0, 1.0])
CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
MINKOWSKI = np.diag(EPS)

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SplitQuaternion:
    a0: Any = 0.0
    a1: Any = 0.0
    a2: Any = 0.0
    a3: Any = 0.0

    @classmethod
    def from_array(cls, v) -> "SplitQuaternion":
        return cls(v[0], v[1], v[2], v[3])

    @classmethod
    def imaginary(cls, v) -> "SplitQuaternion":
        return cls(0.0, v[0], v[1], v[2])

    def coefficients(self):
        return ad.stack([self.a0, self.a1, self.a2, self.a3])

    def __add__(self, o):
        o = _coerce(o)
        return SplitQuaternion(self.a0 + o.a0, self.a1 + o.a1, self.a2 + o.a2, self.a3 + o.a3)

    __radd__ = __add__

    def __neg__(self):
        return SplitQuaternion(-self.a0, -self.a1, -self.a2, -self.a3)

    def __sub__(self, o):
        return self + (-_coerce(o))

    def __rsub__(self, o):
        return _coerce(o) - self

    def __mul__(self, o):
        if not isinstance(o, SplitQuaternion):
            return SplitQuaternion(self.a0 * o, self.a1 * o, self.a2 * o, self.a3 * o)
        return sq_mul(self, o)

    def __rmul__(self, c):
        return SplitQuaternion(c * self.a0, c * self.a1, c * self.a2, c * self.a3)

    def conj(self) -> "SplitQuaternion":
        return SplitQuaternion(self.a0, -self.a1, -self.a2, -self.a3)

    @property
    def re(self):
        return self.a0

    @property
    def im(self):
        return ad.stack([self.a1, self.a2, self.a3])

    def norm2(self):
        """``a * conj(a)``, a real number of either sign."""
        return self.a0 * self.a0 - self.a1 * self.a1 - self.a2 * self.a2 + self.a3 * self.a3

    def __repr__(self):
        return f"SplitQuaternion({self.a0!r}, {self.a1!r}, {self.a2!r}, {self.a3!r})"


def _coerce(x) -> SplitQuaternion:
    return x if isinstance(x, SplitQuaternion) else SplitQuaternion(x)


ONE = SplitQuaternion(1.0)
J1 = SplitQuaternion(0.0, 1.0)
J2 = SplitQuaternion(0.0, 0.0, 1.0)
J3 = SplitQuaternion(0.0, 0.0, 0.0, 1.0)
BASIS = (ONE, J1, J2, J3)


def sq_mul(a: SplitQuaternion, b: SplitQuaternion) -> SplitQuaternion:
    return SplitQuaternion(
        a.a0 * b.a0 + a.a1 * b.a1 + a.a2 * b.a2 - a.a3 * b.a3,
        a.a0 * b.a1 + a.a1 * b.a0 - a.a2 * b.a3 + a.a3 * b.a2,
        a.a0 * b.a2 + a.a2 * b.a0 + a.a1 * b.a3 - a.a3 * b.a1,
        a.a0 * b.a3 + a.a3 * b.a0 + a.a1 * b.a2 - a.a2 * b.a1,
    )


def sq_conj_re_im(a: SplitQuaternion):
    return a.conj(), a.re, a.im


def im_inner(a, b):
    """``<a, b> = -a1 b1 - a2 b2 + a3 b3`` on imaginary parts."""
    return -a[0] * b[0] - a[1] * b[1] + a[2] * b[2]


def im_cross(a, b):
    """Cross product of imaginary parts; ``(a x b)_i = eps_i (a_j b_k - a_k b_j)``."""
    return ad.stack([EPS[i] * (a[j] * b[k] - a[k] * b[j]) for i, j, k in CYCLIC])


def im_cross_matrix(a):
    """Matrix ``C`` with ``C @ b == im_cross(a, b)``."""
    z = 0.0 * a[0]
    return ad.stack([
        ad.stack([z, -a[2] * EPS[0], a[1] * EPS[0]]),
        ad.stack([a[2] * EPS[1], z, -a[0] * EPS[1]]),
        ad.stack([-a[1] * EPS[2], a[0] * EPS[2], z]),
    ])


# -- SO(1,2) and triples of split quaternions --------------------------------

def so12_residual(M) -> float:
    M = np.asarray(M, dtype=float)
    return max(float(np.abs(M.T @ MINKOWSKI @ M - MINKOWSKI).max()),
               abs(float(np.linalg.det(M)) - 1.0))


def is_so12(M, tol: float = DEFAULT_TOL) -> bool:
    return so12_residual(M) < tol


def random_so12(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Exponential of a random element of so(1,2)."""
    k = rng.normal(scale=scale, size=3)
    K = np.array([[0.0, k[0], k[1]], [-k[0], 0.0, k[2]], [-k[1], -k[2], 0.0]])
    return scipy.linalg.expm(MINKOWSKI @ K)


def triple_relations(g1, g2, g3) -> dict[str, float]:
    def size(q):
        return float(np.abs(ad.value(q.coefficients())).max())

    return {
        "g1^2 = 1": size(g1 * g1 - ONE),
        "g2^2 = 1": size(g2 * g2 - ONE),
        "g1 g2 = g3": size(g1 * g2 - g3),
        "g2 g1 = -g3": size(g2 * g1 + g3),
    }


def _check_triple(gammas, tol):
    for name, r in triple_relations(*gammas).items():
        if r > tol:
            raise RelationError(name, r)


def gammas_from_so12(M, tol: float = DEFAULT_TOL):
    """``g_s = sum_t M[s, t] j_t``; raises :class:`RelationError` unless M is in SO(1,2)."""
    gammas = tuple(SplitQuaternion.imaginary(M[s]) for s in range(3))
    _check_triple(gammas, tol)
    return gammas


def so12_from_gammas(g1, g2, g3, tol: float = DEFAULT_TOL) -> np.ndarray:
    gammas = (g1, g2, g3)
    re = max(abs(float(ad.value(g.re))) for g in gammas)
    if re > tol:
        raise RelationError("g_s purely imaginary", re)
    _check_triple(gammas, tol)
    return np.array([ad.value(g.im) for g in gammas], dtype=float)


# -- 2x2 matrix model ---------------------------------------------------------

_MAT2 = np.array([
    [[1.0, 0.0], [0.0, 1.0]],
    [[1.0, 0.0], [0.0, -1.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, 1.0], [-1.0, 0.0]],
])


def mat2_rep(a: SplitQuaternion) -> np.ndarray:
    return np.einsum("k,kij->ij", np.array([a.a0, a.a1, a.a2, a.a3], dtype=float), _MAT2)


# -- real matrices of left/right multiplication -------------------------------

def left_mul_matrix(q: SplitQuaternion) -> np.ndarray:
    """Real 4x4 matrix of ``x -> q x`` in the basis ``1, j1, j2, j3``."""
    return np.array([np.array(ad.value((q * e).coefficients()), float) for e in BASIS]).T


def right_mul_matrix(q: SplitQuaternion) -> np.ndarray:
    """Real 4x4 matrix of ``x -> x q``."""
    return np.array([np.array(ad.value((e * q).coefficients()), float) for e in BASIS]).T


# -- B^n and the Sp(n,B)Sp(1,B) action ---------------------------------------

def bn_inner(x: Sequence[SplitQuaternion], y: Sequence[SplitQuaternion]):
    """``Re(conj(x)^T y)``; signature (2n, 2n) on B^n = R^4n."""
    total = 0.0
    for xa, ya in zip(x, y):
        total = total + (xa.conj() * ya).re
    return total


def _matvec(A, x):
    return [sum((A[a][b] * x[b] for b in range(len(x))), SplitQuaternion()) for a in range(len(A))]


def sp_residual(A) -> float:
    """``max |conj(A)^T A - 1|`` over all entries and coefficients."""
    n = len(A)
    worst = 0.0
    for a in range(n):
        for b in range(n):
            s = sum((A[c][a].conj() * A[c][b] for c in range(n)), SplitQuaternion())
            target = ONE if a == b else SplitQuaternion()
            worst = max(worst, float(np.abs(ad.value((s - target).coefficients())).max()))
    return worst


def sp_action(A, z: SplitQuaternion, x, tol: float = DEFAULT_TOL):
    """``(A, z) . x = A x conj(z)`` for ``A in Sp(n,B)`` and unit ``z``."""
    r = abs(float(ad.value(z.norm2())) - 1.0)
    if r > tol:
        raise RelationError("z0^2 - z1^2 - z2^2 + z3^2 = 1", r)
    r = sp_residual(A)
    if r > tol:
        raise RelationError("conj(A)^T A = 1", r)
    zc = z.conj()
    return [xa * zc for xa in _matvec(A, x)]


# -- Casimir decomposition of endomorphisms -----------------------------------

def triple_residuals(I1, I2, I3) -> dict[str, float]:
    eye = np.eye(I1.shape[0])

    def m(X):
        return float(np.abs(X).max())

    return {
        "I1^2 = id": m(I1 @ I1 - eye),
        "I2^2 = id": m(I2 @ I2 - eye),
        "I1 I2 = I3": m(I1 @ I2 - I3),
        "I2 I1 = -I3": m(I2 @ I1 + I3),
    }


def casimir(Psi, I1, I2, I3):
    return I1 @ Psi @ I1 + I2 @ Psi @ I2 - I3 @ Psi @ I3


def casimir_split(Psi, I1, I2, I3, tol: float = DEFAULT_TOL):
    """Split ``Psi`` into the parts ``(+++, +--, -+-, --+)``.

    The signs record commutation (+) or anticommutation (-) with I1, I2, I3.
    """
    for name, r in triple_residuals(I1, I2, I3).items():
        if r > tol:
            raise RelationError(name, r)
    a = I1 @ Psi @ I1
    b = I2 @ Psi @ I2
    c = I3 @ Psi @ I3
    return (
        (Psi + a + b - c) / 4.0,
        (Psi + a - b + c) / 4.0,
        (Psi - a + b + c) / 4.0,
        (Psi - a - b - c) / 4.0,
    )
