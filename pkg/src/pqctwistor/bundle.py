"""The bundle Q of endomorphisms ``I = sum_s x_s I_s`` over a pqc chart.

Points of Q are ``y = (u, x)`` with ``u`` in the base chart and ``x`` in
Im(B).  Tangent vectors have ``4n + 6`` components in the ``(d/du, d/dx)``
basis.  Everything here is evaluated pointwise from a :class:`Local` snapshot
of the base data, so fields on Q are plain callables ``y -> vector`` and can be
differentiated by :mod:`pqctwistor.ad`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import ad
from . import pqc
from .algebra import CYCLIC, EPS, im_cross, im_inner
from .errors import ConstraintError, OutsideDomainError
from .fields import exterior_derivative, lie_bracket, wedge

Q_GATE = 1e-6
K_TOL = 1e-8


@dataclass(frozen=True)
class QPoint:
    u: np.ndarray
    x: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.u, float), np.asarray(self.x, float)])

    @property
    def norm2(self) -> float:
        """``<I, I> = sum_s eps_s x_s^2``."""
        return float(im_inner(self.x, self.x))

    @classmethod
    def from_y(cls, y, dim: int) -> "QPoint":
        y = np.asarray(y, float)
        return cls(y[:dim], y[dim:])


def require_q0(x, gate: float = Q_GATE) -> None:
    c = float(ad.value(im_inner(x, x)))
    if abs(c) <= gate:
        raise OutsideDomainError(f"<I,I> = {c:.3e} lies on the null cone (|<I,I>| <= {gate})")


@dataclass
class Local:
    """Base data at ``pi(y)`` together with the fiber coordinates of ``y``."""

    n: int
    u: object
    x: object
    eta: object
    xi: object
    alpha: object
    E: object
    Einv: object
    PH: object
    I: object
    G: object
    scal_fn: Optional[Callable] = None

    @cached_property
    def scal(self):
        return 0.0 if self.scal_fn is None else self.scal_fn(self.u)

    @property
    def dim(self) -> int:
        return 4 * self.n + 3

    @property
    def norm2(self):
        return im_inner(self.x, self.x)

    def pad(self, v):
        """Pull back a covector on M or push a vector of M into the u-block."""
        return ad.concatenate([v, np.zeros(3)])

    def fiber(self, w):
        return ad.concatenate([np.zeros(self.dim), w])

    def pad2(self, W):
        """Pull back a 2-form on M to Q."""
        D = self.dim + 3
        top = ad.concatenate([W, np.zeros((self.dim, 3))], axis=1)
        return ad.concatenate([top, np.zeros((3, D))], axis=0)


class QBundle:
    """Q over a structure ``P`` with connection forms ``alpha`` (``u -> (3, dim)``)."""

    def __init__(self, P: pqc.PqcStructure, alpha: Optional[Callable] = None,
                 xi: Optional[Callable] = None, mutate_J: bool = False):
        self.P = P
        self.xi_fn = xi if xi is not None else (lambda u: pqc.reeb(P, u))
        self.alpha_fn = alpha if alpha is not None else pqc.connection_forms(P)
        self.mutate_J = mutate_J

    @property
    def dim(self) -> int:
        return self.P.dim

    @property
    def total_dim(self) -> int:
        return self.P.dim + 3

    # -- pointwise data -------------------------------------------------------

    def local(self, y) -> Local:
        P = self.P
        u, x = y[: P.dim], y[P.dim:]
        eta = P.eta(u)
        xi = self.xi_fn(u)
        E = P.frame(u)
        return Local(
            n=P.n, u=u, x=x, eta=eta, xi=xi, alpha=self.alpha_fn(u), E=E,
            Einv=pqc.frame_pinv(E), PH=pqc.horizontal_projector(eta, xi),
            I=P.endos(u), G=P.metric(u), scal_fn=P.scal,
        )

    def point(self, q: QPoint) -> Local:
        return self.local(q.y)

    # -- fields on Q -----------------------------------------------------------

    def field(self, fn: Callable) -> Callable:
        """Turn ``(Local) -> vector`` into a vector field ``y -> vector`` on Q."""
        return lambda y: fn(self.local(y))

    def lifted(self, A: Callable) -> Callable:
        """Horizontal lift of a vector field ``u -> (dim,)`` on M."""
        return lambda y: lift(self.local(y), A(y[: self.dim]))

    def reeb_lift(self, s: int) -> Callable:
        return self.field(lambda L: lift(L, L.xi[s]))

    def frame_lift(self, a: int) -> Callable:
        return self.field(lambda L: lift(L, L.E[:, a]))

    def chi_field(self) -> Callable:
        return self.field(chi)

    def normal_field(self) -> Callable:
        return self.field(normal)

    def u_field(self, s: int) -> Callable:
        """``xi_s^h - (eps_s x_s / <I,I>) chi``, a section of U."""
        return self.field(lambda L: u_extension(L, s))

    def w_field(self, s: int) -> Callable:
        """``d/dx_s - (eps_s x_s / <I,I>) N``, a section of W."""
        return self.field(lambda L: w_extension(L, s))

    def k_fields(self, x0) -> list[Callable]:
        """Extension fields spanning K near a point with fiber coordinates ``x0``.

        The index with the largest ``|x_m|`` is dropped from the U and W
        families; it stays fixed on the whole neighbourhood.
        """
        m = dropped_index(x0)
        fields = [self.frame_lift(a) for a in range(self.P.rank)]
        fields += [self.u_field(s) for s in range(3) if s != m]
        fields += [self.w_field(s) for s in range(3) if s != m]
        return fields

    def k_combination(self, x0, coeffs, with_J: bool = False) -> Callable:
        """``sum_a c_a F_a`` over :meth:`k_fields` (or its image under J), from one base evaluation."""
        m = dropped_index(x0)
        c = np.asarray(coeffs, float)
        mut = self.mutate_J

        def F(y):
            L = self.local(y)
            v = c @ k_basis(L, m)
            return apply_J(L, v, mutate=mut, check=False) if with_J else v

        return F

    def J_field(self, A: Callable) -> Callable:
        mut = self.mutate_J
        return lambda y: apply_J(self.local(y), A(y), mutate=mut, check=False)

    def canonical_eta_field(self) -> Callable:
        return self.field(canonical_eta)

    # -- pointwise conveniences ------------------------------------------------

    def k_frame(self, y) -> "KFrame":
        require_q0(y[self.dim:])
        L = self.local(y)
        B = k_basis(L, dropped_index(np.asarray(ad.value(L.x))))
        return KFrame.build(L, B, self.mutate_J)

    def lift_commutator_defect(self, A: Callable, B: Callable, y):
        """``[A^h, B^h] - [A, B]^h`` at ``y``."""
        Ah, Bh = self.lifted(A), self.lifted(B)
        lhs = lie_bracket(Ah, Bh)(y)
        AB = lie_bracket(A, B)(y[: self.dim])
        return lhs - lift(self.local(y), AB)


# -- pointwise formulas ----------------------------------------------------------

def lift(L: Local, A):
    """``A^h = A + sum_(ijk) eps_i (x_j alpha_k(A) - x_k alpha_j(A)) d/dx_i``."""
    return ad.concatenate([A, im_cross(L.x, L.alpha @ A)])


def phi_forms(L: Local):
    """``(3, dim + 3)``: ``phi_i = eps_i dx_i - x_j alpha_k + x_k alpha_j``."""
    x, a = L.x, L.alpha
    rows = [None, None, None]
    for i, j, k in CYCLIC:
        e = np.zeros(3)
        e[i] = EPS[i]
        rows[i] = ad.concatenate([-(x[j] * a[k]) + x[k] * a[j], e])
    return ad.stack(rows)


def phi_forms_opposite_sign(L: Local):
    """The variant ``eps_i dx_i - x_j alpha_k - x_k alpha_j``; kept to show it fails on lifts."""
    x, a = L.x, L.alpha
    rows = [None, None, None]
    for i, j, k in CYCLIC:
        e = np.zeros(3)
        e[i] = EPS[i]
        rows[i] = ad.concatenate([-(x[j] * a[k]) - x[k] * a[j], e])
    return ad.stack(rows)


def pulled_eta(L: Local):
    """``(3, dim + 3)``: ``pi^* eta_s``."""
    return ad.stack([L.pad(L.eta[s]) for s in range(3)])


def canonical_eta(L: Local):
    """``eta = sum_s x_s pi^* eta_s``."""
    return L.pad(L.x @ L.eta)


def omega_forms(L: Local):
    """``(3, dim, dim)``: ``omega_s(A, B) = g(I_s A_H, B_H)`` on M."""
    C = L.Einv @ L.PH  # frame coordinates of the H-part
    return ad.stack([ad.transpose(C) @ (ad.transpose(L.I[s]) @ L.G) @ C for s in range(3)])


def d_eta_analytic(L: Local):
    """``sum_(ijk) 2 x_i omega_i + eps_i phi_i ^ eta_i - Scal/(8n(n+2)) eps_i x_i eta_j ^ eta_k``."""
    om = omega_forms(L)
    ph = phi_forms(L)
    et = pulled_eta(L)
    c = L.scal / (8.0 * L.n * (L.n + 2))
    total = 0.0
    for i, j, k in CYCLIC:
        total = total + 2.0 * L.x[i] * L.pad2(om[i])
        total = total + EPS[i] * wedge(ph[i], et[i])
        total = total - (c * EPS[i]) * L.x[i] * wedge(et[j], et[k])
    return total


def d_eta_numeric(bundle: QBundle, y):
    return exterior_derivative(bundle.canonical_eta_field())(y)


def chi(L: Local):
    return sum(L.x[s] * lift(L, L.xi[s]) for s in range(3))


def normal(L: Local):
    return L.fiber(L.x)


def decompose(L: Local, T):
    """Horizontal part on M, ``eta_s(T)`` and ``phi_s(T)``; ``T`` is rebuilt by :func:`recompose`."""
    TM = T[: L.dim]
    return L.PH @ TM, L.eta @ TM, phi_forms(L) @ T


def recompose(L: Local, XH, etas, phis):
    """``(X_H)^h + sum_s eps_s (eta_s xi_s^h + phi_s d/dx_s)``."""
    out = lift(L, XH)
    for s in range(3):
        out = out + (EPS[s] * etas[s]) * lift(L, L.xi[s])
    return out + L.fiber(EPS * phis)


def k_constraints(L: Local, T):
    """``(eta(T), sum_s x_s phi_s(T))``; both vanish exactly on K."""
    return canonical_eta(L) @ T, L.x @ (phi_forms(L) @ T)


def check_in_k(L: Local, T, tol: float = K_TOL) -> None:
    e, p = (float(abs(ad.value(v))) for v in k_constraints(L, T))
    scale = 1.0 + float(np.abs(np.asarray(ad.value(T))).max())
    if e > tol * scale:
        raise ConstraintError("eta(T) = 0", e)
    if p > tol * scale:
        raise ConstraintError("sum_s x_s phi_s(T) = 0", p)


def endo_on_H(L: Local, s: int, XH):
    """``I_s`` applied to a coordinate vector lying in H."""
    return L.E @ (L.I[s] @ (L.Einv @ XH))


def apply_J(L: Local, T, mutate: bool = False, check: bool = True):
    """``J T`` by the coordinate expansion on K.

    ``mutate`` flips the sign of the W-part (a deliberately wrong J for control checks).
    """
    if check:
        check_in_k(L, T)
    XH, etas, phis = decompose(L, T)
    x = L.x
    IX = sum(x[s] * endo_on_H(L, s, XH) for s in range(3))
    out = lift(L, IX)
    for i, j, k in CYCLIC:
        out = out + (EPS[j] * x[j] * etas[k] - EPS[k] * x[k] * etas[j]) * lift(L, L.xi[i])
    fib = ad.stack([EPS[j] * x[j] * phis[k] - EPS[k] * x[k] * phis[j] for i, j, k in CYCLIC])
    if mutate:
        fib = -fib
    return out + L.fiber(fib)


def apply_J_split(L: Local, T):
    """``J(X + U + W) = (I X)^h + chi x U + N x W`` from the splitting of K.

    ``U = sum_s a_s xi_s^h`` and ``W = sum_s b_s d/dx_s``; the cross products act
    on the coefficient vectors.
    """
    XH, etas, phis = decompose(L, T)
    a = EPS * etas
    b = EPS * phis
    IX = sum(L.x[s] * endo_on_H(L, s, XH) for s in range(3))
    ca = im_cross(L.x, a)
    out = lift(L, IX) + sum(ca[s] * lift(L, L.xi[s]) for s in range(3))
    return out + L.fiber(im_cross(L.x, b))


def levi_G(L: Local, A, B):
    """The Levi form by its explicit expansion on K."""
    n = L.n
    x = L.x
    etaA, etaB = L.eta @ A[: L.dim], L.eta @ B[: L.dim]
    ph = phi_forms(L)
    phA, phB = ph @ A, ph @ B
    C = L.Einv @ L.PH
    gh = (C @ A[: L.dim]) @ (L.G @ (C @ B[: L.dim]))
    h = L.scal / (16.0 * n * (n + 2))
    out = gh - h * sum(EPS[s] * etaA[s] * etaB[s] for s in range(3))
    mixed = 0.0
    for i, j, k in CYCLIC:
        mixed = mixed + EPS[i] * x[i] * (
            phA[j] * etaB[k] + etaA[k] * phB[j] - phA[k] * etaB[j] - etaA[j] * phB[k]
        )
    return out - mixed / (2.0 * L.norm2)


def levi_G_from_d_eta(L: Local, A, B, mutate: bool = False):
    """``G(A, B) = -d eta(J A, B) / (2 <I,I>)``."""
    JA = apply_J(L, A, mutate=mutate, check=False)
    return -(JA @ (d_eta_analytic(L) @ B)) / (2.0 * L.norm2)


def dropped_index(x0) -> int:
    return int(np.argmax(np.abs(np.asarray(ad.value(x0), float))))


def u_extension(L: Local, s: int):
    return lift(L, L.xi[s]) - (EPS[s] * L.x[s] / L.norm2) * chi(L)


def w_extension(L: Local, s: int):
    e = np.zeros(3)
    e[s] = 1.0
    return L.fiber(e) - (EPS[s] * L.x[s] / L.norm2) * normal(L)


def k_basis(L: Local, m: int):
    """``(4n + 4, dim + 3)``: lifted frame, then two U and two W vectors."""
    rows = [lift(L, L.E[:, a]) for a in range(4 * L.n)]
    rows += [u_extension(L, s) for s in range(3) if s != m]
    rows += [w_extension(L, s) for s in range(3) if s != m]
    return ad.stack(rows)


@dataclass(frozen=True)
class KFrame:
    """A basis of K at one point with the matrices of J and of the Levi form."""

    basis: np.ndarray  # (k, dim + 3), rows are basis vectors
    J: np.ndarray  # J basis[b] = sum_a J[a, b] basis[a]
    gram: np.ndarray
    norm2: float
    closure: float  # how far J maps the basis out of its own span

    @property
    def rank(self) -> int:
        return self.basis.shape[0]

    def coordinates(self, T) -> tuple[np.ndarray, float]:
        """Least-squares coordinates of ``T`` and the norm of its part outside the span."""
        T = np.asarray(T, float)
        c, *_ = np.linalg.lstsq(self.basis.T, T, rcond=None)
        return c, float(np.linalg.norm(self.basis.T @ c - T))

    def frame_norm(self, T) -> float:
        """Frame-Euclidean norm of ``T`` plus its component outside K."""
        c, out = self.coordinates(T)
        return float(np.linalg.norm(c)) + out

    @classmethod
    def build(cls, L: Local, B, mutate: bool = False) -> "KFrame":
        B = np.asarray(ad.value(B), float)
        JB = np.array([np.asarray(ad.value(apply_J(L, b, mutate=mutate, check=False)), float) for b in B])
        coeffs, *_ = np.linalg.lstsq(B.T, JB.T, rcond=None)
        closure = float(np.abs(B.T @ coeffs - JB.T).max())
        gram = np.array([[float(ad.value(levi_G(L, a, b))) for b in B] for a in B])
        return cls(B, coeffs, gram, float(ad.value(L.norm2)), closure)


# -- conformal change on Q ---------------------------------------------------------

class ConformalLifts:
    """Lifts with respect to ``g / 2f`` expressed through the data of ``g``."""

    def __init__(self, P: pqc.PqcStructure, f):
        self.P = P
        self.f = f
        self.bar = pqc.conformal_change(P, f)
        self.base = QBundle(P)
        self.barred = QBundle(self.bar)
        self.constant = pqc._is_constant(f)
        self.ff = pqc._as_field(f)

    def data(self, u) -> pqc.ConformalData:
        return pqc.conformal_data(self.P, self.ff, u, self.constant)

    def df_I(self, L: Local, X, cd) -> object:
        """``(df(I_1 X), df(I_2 X), df(I_3 X))`` for ``X`` in H."""
        return ad.stack([endo_on_H(L, t, X) @ cd.df for t in range(3)])

    def bar_lift(self, y, X):
        """``X^h + (1/f) N x sum_t eps_t df(I_t X) d/dx_t`` for ``X`` in H."""
        L = self.base.local(y)
        cd = self.data(L.u)
        corr = im_cross(L.x, EPS * self.df_I(L, X, cd)) / cd.f
        return lift(L, X) + L.fiber(corr)

    def bar_lift_unscaled(self, y, X):
        """Same correction without the factor ``1/f``."""
        L = self.base.local(y)
        cd = self.data(L.u)
        return lift(L, X) + L.fiber(im_cross(L.x, EPS * self.df_I(L, X, cd)))

    def bar_lift_direct(self, y, X):
        """Lift of ``X`` using the connection forms of the new structure."""
        return lift(self.barred.local(y), X)

    def bar_reeb_lift(self, y, s: int):
        """Lift of ``xi_bar_s`` through ``xi^h``, ``(I_s grad f)^h`` and fiber corrections."""
        L = self.base.local(y)
        cd = self.data(L.u)
        n = self.P.n
        x = L.x
        Igrad = L.E @ (L.I[s] @ cd.grad)
        dfxi = L.xi @ cd.df
        e = np.zeros(3)
        e[s] = 1.0
        diag = -cd.laplacian / (2.0 * n) + cd.grad_norm2 / (n * cd.f)
        fib = 2.0 * (x @ dfxi) * e - (2.0 * EPS[s] * x[s]) * (EPS * dfxi) + diag * im_cross(x, e)
        return 2.0 * cd.f * lift(L, L.xi[s]) + lift(L, Igrad) + L.fiber(fib)

    def bar_reeb_lift_direct(self, y, s: int):
        Lb = self.barred.local(y)
        return lift(Lb, Lb.xi[s])

    def bar_chi(self, y, chi_weight=None):
        """``2f chi + 2 df(pi_* chi) N + J(grad f)^h - 2 <I,I> sum_t eps_t df(xi_t) d/dx_t``.

        ``chi_weight=1.0`` replaces the ``2f`` in front of ``chi``.
        """
        L = self.base.local(y)
        cd = self.data(L.u)
        grad = L.E @ cd.grad
        dfxi = L.xi @ cd.df
        JG = apply_J(L, lift(L, grad), check=False)
        w = 2.0 * cd.f if chi_weight is None else chi_weight
        return (w * chi(L) + 2.0 * (L.x @ dfxi) * normal(L) + JG
                - 2.0 * L.norm2 * L.fiber(EPS * dfxi))

    def bar_chi_unit_weight(self, y):
        return self.bar_chi(y, chi_weight=1.0)

    def bar_chi_assembled(self, y):
        """``sum_s x_s xi_bar_s^(h bar)`` with the lifts taken directly."""
        Lb = self.barred.local(y)
        return chi(Lb)
