"""Fields on a coordinate chart and the calculus on them.

Fields are plain callables on chart points:

* scalar field: ``p -> scalar``
* vector field: ``p -> (dim,)`` components in the coordinate basis
* 1-form: ``p -> (dim,)`` covector
* 2-form: ``p -> (dim, dim)`` antisymmetric matrix, ``w(A, B) = A @ W @ B``

Derivatives come from :mod:`pqctwistor.ad`, so they are exact to rounding and
nest to any order.  The convention for the exterior derivative is
``dθ(A, B) = A θ(B) - B θ(A) - θ([A, B])`` (no factor 1/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import ad
from .errors import PqcError

ScalarField = Callable
VectorField = Callable
OneForm = Callable
TwoForm = Callable

ZERO_EIG_TOL = 1e-7


@dataclass(frozen=True)
class Chart:
    dim: int
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be positive")
        if self.labels and len(self.labels) != self.dim:
            raise ValueError("need exactly one label per coordinate")

    def point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise ValueError(f"expected a point of shape ({self.dim},), got {p.shape}")
        return p

    def basis(self, k: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[k] = 1.0
        return e

    def index(self, label: str) -> int:
        return self.labels.index(label)


def constant_field(v) -> VectorField:
    v = np.asarray(v, dtype=float)
    return lambda p: v


def directional(F: Callable, p, v):
    """Derivative of any field ``F`` at ``p`` along the vector ``v``."""
    return ad.derivative(F, p, v)


def differential(f: ScalarField) -> OneForm:
    return lambda p: ad.jacobian(f, p)


def exterior_derivative(omega: Callable, degree: int = 1) -> Callable:
    """``d`` of a scalar field (degree 0) or of a 1-form (degree 1)."""
    if degree == 0:
        return differential(omega)
    if degree != 1:
        raise ValueError("only degrees 0 and 1 are supported")

    def d_omega(p):
        # Jac[nu, mu] = d_mu omega_nu
        jac = ad.jacobian(omega, p)
        return ad.transpose(jac) - jac

    return d_omega


def exterior_derivative_at(omega: OneForm, p):
    return exterior_derivative(omega, 1)(p)


def lie_bracket(A: VectorField, B: VectorField) -> VectorField:
    """``[A, B]^m = A(B^m) - B(A^m)``."""

    def bracket(p):
        a = A(p)
        b = B(p)
        return ad.derivative(B, p, a) - ad.derivative(A, p, b)

    return bracket


def lie_bracket_at(A: VectorField, B: VectorField, p):
    return lie_bracket(A, B)(p)


def wedge(a, b):
    """2-form matrix of ``a ∧ b`` for covectors, ``(a∧b)(X, Y) = a(X)b(Y) - a(Y)b(X)``."""
    return ad.einsum("i,j->ij", a, b) - ad.einsum("i,j->ij", b, a)


def pair(W, A, B):
    """Evaluate a 2-form (or any bilinear form) matrix on two vectors."""
    return A @ (W @ B)


def interior(A, W):
    """``(A ⌟ w)(B) = w(A, B)`` as a covector."""
    return A @ W


# -- signature of symmetric matrices -------------------------------------------

@dataclass(frozen=True)
class Signature:
    positive: int
    negative: int
    zero: int
    eigenvalues: tuple[float, ...] = field(default=(), compare=False)

    @property
    def margin(self) -> float:
        """Smallest absolute eigenvalue."""
        return min((abs(e) for e in self.eigenvalues), default=0.0)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.positive, self.negative, self.zero)


class AsymmetricMatrixError(PqcError):
    pass


def signature(S, tol: float = ZERO_EIG_TOL) -> Signature:
    S = np.asarray(ad.value(S), dtype=float)
    asym = float(np.abs(S - S.T).max()) if S.size else 0.0
    if asym > tol:
        raise AsymmetricMatrixError(f"matrix is not symmetric (residual {asym:.3e})")
    w = np.linalg.eigvalsh((S + S.T) / 2.0)
    return Signature(
        positive=int((w > tol).sum()),
        negative=int((w < -tol).sum()),
        zero=int((np.abs(w) <= tol).sum()),
        eigenvalues=tuple(float(e) for e in w),
    )


def inertia_ldl(S, tol: float = ZERO_EIG_TOL) -> tuple[int, int, int]:
    """Inertia from a Bunch-Kaufman LDL^T factorisation (no eigenvalues involved)."""
    S = np.asarray(S, dtype=float)
    _, D, _ = scipy.linalg.ldl(S)
    pos = neg = zero = 0
    i = 0
    n = D.shape[0]
    while i < n:
        if i + 1 < n and abs(D[i + 1, i]) > 0.0:
            a, b, c = D[i, i], D[i + 1, i], D[i + 1, i + 1]
            half, root = (a + c) / 2.0, np.hypot((a - c) / 2.0, b)
            diag = (half - root, half + root)
            i += 2
        else:
            diag = (D[i, i],)
            i += 1
        for d in diag:
            if d > tol:
                pos += 1
            elif d < -tol:
                neg += 1
            else:
                zero += 1
    return pos, neg, zero


# -- polynomial scalar fields ----------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """``c0 + sum_a c_a u_a + sum_(a,b) c_ab u_a u_b`` on a chart of dimension ``dim``."""

    dim: int
    constant: float = 0.0
    linear: tuple[float, ...] = ()
    quadratic: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if len(self.linear) > self.dim:
            raise ValueError("more linear coefficients than coordinates")
        for a, b, _ in self.quadratic:
            if not (0 <= a < self.dim and 0 <= b < self.dim):
                raise ValueError(f"quadratic term index ({a}, {b}) outside the chart")

    @property
    def is_constant(self) -> bool:
        return not any(self.linear) and not any(c for _, _, c in self.quadratic)

    def __call__(self, p):
        lin = np.zeros(self.dim)
        lin[: len(self.linear)] = self.linear
        out = self.constant + lin @ p
        for a, b, c in self.quadratic:
            out = out + c * (p[a] * p[b])
        return out

    @classmethod
    def parse(cls, text: str, dim: int) -> "Polynomial":
        """Parse ``const:<c>`` or ``poly:<c0>,<c1>,...[;a:b:c;...]``."""
        kind, _, body = text.partition(":")
        if kind == "const":
            return cls(dim, float(body))
        if kind != "poly":
            raise ValueError(f"unknown scalar field spec {text!r}")
        head, *quads = body.split(";")
        coeffs = [float(c) for c in head.split(",") if c.strip()]
        if not coeffs:
            raise ValueError("poly: needs at least a constant coefficient")
        quad = []
        for q in quads:
            a, b, c = q.split(":")
            quad.append((int(a), int(b), float(c)))
        return cls(dim, coeffs[0], tuple(coeffs[1:]), tuple(quad))
