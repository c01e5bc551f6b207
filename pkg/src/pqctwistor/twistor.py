"""Twistor space Z (``<I,I> = 1``) and reflector space R (``<I,I> = -1``).

Integrability is checked through Nijenhuis tensors of J evaluated on
extension fields of a K-frame; on R the real eigendistributions of J are also
tested for involutivity directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import ad
from . import pqc
from .algebra import im_inner
from .bundle import (
    ConformalLifts,
    KFrame,
    QBundle,
    apply_J,
    canonical_eta,
    chi,
    d_eta_analytic,
    dropped_index,
    k_basis,
    lift,
    phi_forms,
    require_q0,
)
from .errors import DegenerateStructureError, PqcError
from .fields import Signature, lie_bracket, signature
from .report import VerificationReport, upper

TWISTOR = 1
REFLECTOR = -1
VARIANTS = ("ambient", "Z", "R")


@dataclass(frozen=True)
class HyperboloidPoint:
    u: np.ndarray
    r: float
    theta: float
    sigma: int
    sheet: int = 1

    @property
    def x(self) -> np.ndarray:
        r, th = self.r, self.theta
        if self.sigma == TWISTOR:
            return np.array([np.sinh(r) * np.cos(th), np.sinh(r) * np.sin(th), self.sheet * np.cosh(r)])
        return np.array([np.cosh(r) * np.cos(th), np.cosh(r) * np.sin(th), np.sinh(r)])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.u, float), self.x])

    def fiber_tangents(self) -> np.ndarray:
        """``d x / d r`` and ``d x / d theta``."""
        r, th = self.r, self.theta
        if self.sigma == TWISTOR:
            dr = [np.cosh(r) * np.cos(th), np.cosh(r) * np.sin(th), self.sheet * np.sinh(r)]
            dth = [-np.sinh(r) * np.sin(th), np.sinh(r) * np.cos(th), 0.0]
        else:
            dr = [np.sinh(r) * np.cos(th), np.sinh(r) * np.sin(th), np.cosh(r)]
            dth = [-np.cosh(r) * np.sin(th), np.cosh(r) * np.cos(th), 0.0]
        return np.array([dr, dth])

    def tangent_basis(self) -> np.ndarray:
        """Rows span the tangent space of Z or R at this point (coordinate directions of M plus the fiber)."""
        dim = len(self.u)
        base = np.concatenate([np.eye(dim), np.zeros((dim, 3))], axis=1)
        fib = np.concatenate([np.zeros((2, dim)), self.fiber_tangents()], axis=1)
        return np.concatenate([base, fib])


def hyperboloid_point(sigma: int, u, r: float, theta: float, sheet: int = 1) -> HyperboloidPoint:
    if sigma not in (TWISTOR, REFLECTOR):
        raise ValueError("sigma must be +1 (twistor space) or -1 (reflector space)")
    if sheet not in (1, -1):
        raise ValueError("sheet must be +1 or -1")
    return HyperboloidPoint(np.asarray(u, float), float(r), float(theta), sigma, sheet)


def random_hyperboloid_point(rng: np.random.Generator, sigma: int, dim: int,
                             u_scale: float = 0.5, r_max: float = 1.2) -> HyperboloidPoint:
    u = rng.normal(scale=u_scale, size=dim)
    r = rng.uniform(-r_max, r_max) if sigma == REFLECTOR else rng.uniform(0.0, r_max)
    sheet = int(rng.choice([-1, 1])) if sigma == TWISTOR else 1
    return hyperboloid_point(sigma, u, r, rng.uniform(0.0, 2 * np.pi), sheet)


def sphere_residual(q: HyperboloidPoint) -> float:
    return abs(float(im_inner(q.x, q.x)) - q.sigma)


# -- contact data on Z and R ----------------------------------------------------------

def reeb_property_values(Q: QBundle, q: HyperboloidPoint) -> tuple[float, float, float]:
    """``eta(chi) - sigma``, ``max |chi _| d eta|`` on the tangent basis, ``max |sum x_s phi_s|`` there."""
    L = Q.local(q.y)
    c = float(ad.value(canonical_eta(L) @ chi(L)))
    T = q.tangent_basis()
    dchi = np.asarray(ad.value(chi(L) @ d_eta_analytic(L)))
    xphi = np.asarray(ad.value(L.x @ phi_forms(L)))
    return abs(c - q.sigma), float(np.abs(T @ dchi).max()), float(np.abs(T @ xphi).max())


def reeb_property_check(Q: QBundle, points: Sequence[HyperboloidPoint], tol_eta=1e-10,
                        tol_d=1e-8) -> VerificationReport:
    a, b, c = zip(*(reeb_property_values(Q, q) for q in points))
    space = "Z" if points[0].sigma == TWISTOR else "R"
    rep = VerificationReport()
    rep.add(upper(f"{space}.eta_chi", "eta(chi) = <I,I>", a, tol_eta))
    rep.add(upper(f"{space}.chi_d_eta", "chi _| d eta = 0 on the tangent space", b, tol_d))
    rep.add(upper(f"{space}.tangent_constraint", "sum x_s phi_s = 0 on the tangent space", c, tol_d))
    return rep


def contact_margin(Q: QBundle, y) -> float:
    """Smallest singular value of ``d eta`` on K relative to the largest."""
    K = Q.k_frame(y)
    L = Q.local(y)
    D = np.asarray(ad.value(d_eta_analytic(L)))
    M = K.basis @ D @ K.basis.T
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[-1] / sv[0])


# -- Levi form -----------------------------------------------------------------------

@dataclass(frozen=True)
class LeviSample:
    signature: Signature
    consistency: float  # |d eta(J A, B) + 2 <I,I> G(A, B)| over the frame
    symmetry: float
    skew: float  # |G(JA, B) + G(A, JB)|


def levi_signature_check(Q: QBundle, y, tol: float = 1e-7) -> LeviSample:
    require_q0(y[Q.dim:])
    K = Q.k_frame(y)
    L = Q.local(y)
    D = np.asarray(ad.value(d_eta_analytic(L)))
    JB = K.J.T @ K.basis  # rows: J applied to basis vectors
    cons = float(np.abs(JB @ D @ K.basis.T + 2.0 * K.norm2 * K.gram).max())
    sym = float(np.abs(K.gram - K.gram.T).max())
    skew = float(np.abs(K.J.T @ K.gram + K.gram @ K.J).max())
    sig = signature(K.gram, tol)
    return LeviSample(sig, cons, sym, skew)


# -- Nijenhuis tensor ------------------------------------------------------------------

@dataclass(frozen=True)
class NijenhuisSample:
    y: np.ndarray
    coefficients: tuple
    residual: np.ndarray
    norm: float


def combine(fields: Sequence[Callable], coeffs) -> Callable:
    coeffs = [float(c) for c in coeffs]

    def F(y):
        return sum(c * f(y) for c, f in zip(coeffs, fields) if c != 0.0)

    return F


def scaled(F: Callable, y0, direction, curvature: float = 0.0) -> Callable:
    """``(1 + <direction, y - y0> + curvature |y - y0|^2) F``: equal to ``F`` at ``y0``, different nearby."""
    y0 = np.asarray(y0, float)
    direction = np.asarray(direction, float)

    def G(y):
        dy = y - y0
        return (1.0 + dy @ direction + curvature * (dy @ dy)) * F(y)

    return G


def nijenhuis_vector(Q: QBundle, A: Callable, B: Callable, y, variant: str = "ambient",
                     JA: Optional[Callable] = None, JB: Optional[Callable] = None):
    """``-c [A,B] + [JA,JB] - J([JA,B] + [A,JB])`` at ``y``.

    ``c = <I,I>`` (ambient), ``1`` (Z) or ``-1`` (R).  ``JA`` and ``JB`` may be
    passed when a cheaper evaluation of the same fields is available.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    require_q0(y[Q.dim:])
    JA = JA if JA is not None else Q.J_field(A)
    JB = JB if JB is not None else Q.J_field(B)
    L = Q.local(y)
    c = {"ambient": float(ad.value(L.norm2)), "Z": 1.0, "R": -1.0}[variant]
    AB = lie_bracket(A, B)(y)
    JAJB = lie_bracket(JA, JB)(y)
    mixed = lie_bracket(JA, B)(y) + lie_bracket(A, JB)(y)
    return -c * AB + JAJB - apply_J(L, mixed, mutate=Q.mutate_J, check=False), mixed


def nijenhuis(Q: QBundle, y, a, b, variant: str = "ambient", K: Optional[KFrame] = None) -> NijenhuisSample:
    """Nijenhuis tensor on the K-frame extension fields combined with coefficients ``a`` and ``b``."""
    x0 = y[Q.dim:]
    A, B = Q.k_combination(x0, a), Q.k_combination(x0, b)
    JA, JB = Q.k_combination(x0, a, True), Q.k_combination(x0, b, True)
    N, _ = nijenhuis_vector(Q, A, B, y, variant, JA, JB)
    K = K if K is not None else Q.k_frame(y)
    N = np.asarray(ad.value(N), float)
    return NijenhuisSample(np.asarray(y), (tuple(a), tuple(b)), N, K.frame_norm(N))


def mixed_bracket_in_k(Q: QBundle, y, a, b) -> float:
    """``eta`` and ``sum x_s phi_s`` of ``[JA,B] + [A,JB]`` (both vanish when it lies in K)."""
    x0 = y[Q.dim:]
    A, B = Q.k_combination(x0, a), Q.k_combination(x0, b)
    JA, JB = Q.k_combination(x0, a, True), Q.k_combination(x0, b, True)
    mixed = lie_bracket(JA, B)(y) + lie_bracket(A, JB)(y)
    L = Q.local(y)
    e = canonical_eta(L) @ mixed
    p = L.x @ (phi_forms(L) @ mixed)
    return max(abs(float(ad.value(e))), abs(float(ad.value(p))))


def tensoriality_gap(Q: QBundle, y, a, b, rng: np.random.Generator, variant: str = "ambient") -> float:
    """Difference of N between two extensions of the same pair of vectors at ``y``."""
    x0 = y[Q.dim:]
    A, B = Q.k_combination(x0, a), Q.k_combination(x0, b)
    D = len(y)
    A2 = scaled(A, y, rng.normal(size=D), rng.normal())
    B2 = scaled(B, y, rng.normal(size=D), rng.normal())
    N1, _ = nijenhuis_vector(Q, A, B, y, variant)
    N2, _ = nijenhuis_vector(Q, A2, B2, y, variant)
    return float(np.abs(np.asarray(ad.value(N1 - N2))).max())


# -- eigendistributions on R -------------------------------------------------------------

@dataclass(frozen=True)
class FrobeniusSample:
    dims: tuple[int, int]
    closed: float  # worst K_- component of [K_+, K_+] and K_+ component of [K_-, K_-]
    out_of_k: float
    mixed_eta: float  # largest |eta([K_+, K_-])| over the frame pairs


def eigen_dimensions(K: KFrame, tol: float = 1e-8) -> tuple[int, int]:
    """Dimensions of the ``+1`` and ``-1`` eigenspaces of J on K (needs ``J^2 = id``)."""
    k = K.rank
    eye = np.eye(k)
    if np.abs(K.J @ K.J - eye).max() > 1e-6:
        raise DegenerateStructureError("J does not square to the identity here; not a reflector point")
    dp = k - np.linalg.matrix_rank(K.J - eye, tol)
    dm = k - np.linalg.matrix_rank(K.J + eye, tol)
    if dp + dm != k:
        raise DegenerateStructureError("J is not diagonalizable on K at this point")
    return int(dp), int(dm)


def frobenius_para(Q: QBundle, y, pairs: Optional[Sequence[tuple[int, int]]] = None) -> FrobeniusSample:
    """Involutivity of the ``+-1`` eigendistributions of J on the reflector space."""
    require_q0(y[Q.dim:])
    K = Q.k_frame(y)
    if K.norm2 > 0:
        raise PqcError("frobenius_para needs a point with <I,I> < 0")
    dims = eigen_dimensions(K)
    x0 = y[Q.dim:]
    unit = np.eye(K.rank)
    plus = [_half(Q, x0, unit[a], +1) for a in range(K.rank)]
    minus = [_half(Q, x0, unit[a], -1) for a in range(K.rank)]
    L = Q.local(y)
    eta = np.asarray(ad.value(canonical_eta(L)))
    xphi = np.asarray(ad.value(L.x @ phi_forms(L)))
    k = K.rank
    if pairs is None:
        pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    closed = out = mixed = 0.0
    for a, b in pairs:
        for fam, sign in ((plus, +1), (minus, -1)):
            T = np.asarray(ad.value(lie_bracket(fam[a], fam[b])(y)), float)
            c, res = K.coordinates(T)
            wrong = (c - sign * (K.J @ c)) / 2.0
            closed = max(closed, float(np.linalg.norm(wrong)))
            out = max(out, res, abs(float(eta @ T)), abs(float(xphi @ T)))
        T = np.asarray(ad.value(lie_bracket(plus[a], minus[b])(y)), float)
        mixed = max(mixed, abs(float(eta @ T)))
    return FrobeniusSample(dims, closed, out, mixed)


def _half(Q: QBundle, x0, coeffs, sign: int) -> Callable:
    """``(F + sign J F) / 2`` for a combination ``F`` of the K-frame extension fields."""
    m = dropped_index(x0)

    def F(y):
        L = Q.local(y)
        v = coeffs @ k_basis(L, m)
        return (v + sign * apply_J(L, v, mutate=Q.mutate_J, check=False)) / 2.0

    return F


# -- independence of the choice of g -----------------------------------------------------

@dataclass(frozen=True)
class InvarianceSample:
    angle: float  # largest principal angle between the two K
    operator: float  # max |J_bar b - J b| over a basis (relative to the basis scale)
    horizontal_angle: float = 0.0


def max_principal_angle(A, B) -> float:
    """Largest principal angle between the row spaces of ``A`` and ``B``."""
    return float(np.max(scipy.linalg.subspace_angles(np.asarray(A).T, np.asarray(B).T)))


def conformal_invariance(P: pqc.PqcStructure, f, y) -> InvarianceSample:
    """Compare K and J built from ``g`` with those built from ``g / 2f`` at ``y``."""
    require_q0(y[P.dim:])
    C = ConformalLifts(P, f)
    L = C.base.local(y)
    Lb = C.barred.local(y)
    m = dropped_index(y[P.dim:])
    B = np.asarray(ad.value(k_basis(L, m)), float)
    Bb = np.asarray(ad.value(k_basis(Lb, m)), float)
    angle = max_principal_angle(B, Bb)
    JBb = np.array([np.asarray(ad.value(apply_J(Lb, b, check=False)), float) for b in B])
    JB = np.array([np.asarray(ad.value(apply_J(L, b, check=False)), float) for b in B])
    scale = max(1.0, float(np.abs(JB).max()))
    return InvarianceSample(angle, float(np.abs(JBb - JB).max()) / scale)


def rotation_invariance(P: pqc.PqcStructure, S, y, f: float = 1.0) -> InvarianceSample:
    """Compare K, J and the horizontal distribution with those of ``rotate_structure(P, S, f)``.

    Fiber coordinates transform as ``x = S x'``.
    """
    S = np.asarray(S, float)
    Pr = pqc.rotate_structure(P, S, f)
    dim = P.dim
    Phi = scipy.linalg.block_diag(np.eye(dim), S)
    x = np.asarray(y[dim:], float)
    yr = np.concatenate([y[:dim], np.linalg.solve(S, x)])
    require_q0(x)
    Q, Qr = QBundle(P), QBundle(Pr)
    L, Lr = Q.local(y), Qr.local(yr)
    B = np.asarray(ad.value(k_basis(L, dropped_index(x))), float)
    Br = np.asarray(ad.value(k_basis(Lr, dropped_index(yr[dim:]))), float) @ Phi.T
    angle = max_principal_angle(B, Br)
    Phinv = np.linalg.inv(Phi)
    JB = np.array([np.asarray(ad.value(apply_J(L, b, check=False)), float) for b in B])
    JBr = np.array([Phi @ np.asarray(ad.value(apply_J(Lr, Phinv @ b, check=False)), float) for b in B])
    scale = max(1.0, float(np.abs(JB).max()))
    D = np.array([np.asarray(ad.value(lift(L, e)), float) for e in np.eye(dim)])
    Dr = np.array([Phi @ np.asarray(ad.value(lift(Lr, e)), float) for e in np.eye(dim)])
    return InvarianceSample(angle, float(np.abs(JBr - JB).max()) / scale, max_principal_angle(D, Dr))
