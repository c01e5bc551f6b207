"""Tagged forward-mode dual numbers over numpy arrays.

A :class:`Dual` carries a primal array ``val`` and a tangent array ``eps`` of
the same shape, both of which may themselves be duals of an older tag.  Every
perturbation gets a fresh tag and the newest tag always sits outermost, which
keeps nested derivatives free of perturbation confusion.

Only the handful of operations the geometry code needs are supported:
arithmetic, ``@``, indexing, transposes, reductions, stacking, ``einsum`` and
dense ``solve``/``lstsq``.
"""

from __future__ import annotations

import itertools
from typing import Any, Callable

import numpy as np

_tags = itertools.count(1)


class Dual:
    __slots__ = ("tag", "val", "eps")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, tag: int, val: Any, eps: Any = None):
        self.tag = tag
        self.val = val
        self.eps = eps  # None means an exactly zero tangent

    # -- structural -----------------------------------------------------
    @property
    def shape(self):
        return shape(self.val)

    @property
    def ndim(self):
        return len(self.shape)

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        return Dual(self.tag, self.val[idx], None if self.eps is None else self.eps[idx])

    @property
    def T(self):
        return Dual(self.tag, self.val.T, None if self.eps is None else self.eps.T)

    def reshape(self, *newshape):
        e = None if self.eps is None else self.eps.reshape(*newshape)
        return Dual(self.tag, self.val.reshape(*newshape), e)

    def sum(self, axis=None):
        e = None if self.eps is None else self.eps.sum(axis=axis)
        return Dual(self.tag, self.val.sum(axis=axis), e)

    def __repr__(self):
        return f"Dual(tag={self.tag}, val={self.val!r}, eps={self.eps!r})"

    # -- arithmetic -----------------------------------------------------
    def __neg__(self):
        return Dual(self.tag, -self.val, None if self.eps is None else -self.eps)

    def __pos__(self):
        return self

    def __add__(self, other):
        return _add(self, other)

    def __radd__(self, other):
        return _add(other, self)

    def __sub__(self, other):
        return _add(self, -other)

    def __rsub__(self, other):
        return _add(other, -self)

    def __mul__(self, other):
        return _mul(self, other)

    def __rmul__(self, other):
        return _mul(other, self)

    def __matmul__(self, other):
        return _matmul(self, other)

    def __rmatmul__(self, other):
        return _matmul(other, self)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(other, self)

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers of duals are supported")
        if k == 0:
            return Dual(self.tag, self.val * 0 + 1.0)
        e = None if self.eps is None else (k * self.val ** (k - 1)) * self.eps
        return Dual(self.tag, self.val**k, e)


def _top(*xs) -> int:
    t = 0
    for x in xs:
        if isinstance(x, Dual) and x.tag > t:
            t = x.tag
    return t


def _split(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.val, x.eps
    return x, None


def _eadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _add(a, b):
    t = _top(a, b)
    av, ae = _split(a, t)
    bv, be = _split(b, t)
    return Dual(t, av + bv, _eadd(ae, be))


def _mul(a, b):
    t = _top(a, b)
    av, ae = _split(a, t)
    bv, be = _split(b, t)
    return Dual(t, av * bv, _eadd(None if ae is None else ae * bv, None if be is None else av * be))


def _matmul(a, b):
    t = _top(a, b)
    av, ae = _split(a, t)
    bv, be = _split(b, t)
    return Dual(t, av @ bv, _eadd(None if ae is None else ae @ bv, None if be is None else av @ be))


def _div(a, b):
    t = _top(a, b)
    av, ae = _split(a, t)
    bv, be = _split(b, t)
    q = av / bv
    e = _eadd(ae, None if be is None else -(q * be))
    return Dual(t, q, None if e is None else e / bv)


# -- free functions ---------------------------------------------------------

def shape(x) -> tuple:
    if isinstance(x, Dual):
        return x.shape
    return np.shape(x)


def value(x):
    """Strip every perturbation and return the plain float array."""
    while isinstance(x, Dual):
        x = x.val
    return x


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def _zeros(x):
    return np.zeros(shape(x))


def stack(items, axis=0):
    items = list(items)
    t = _top(*items)
    if t == 0:
        return np.stack([np.asarray(v, dtype=float) for v in items], axis=axis)
    parts = [_split(v, t) for v in items]
    vals = stack([p[0] for p in parts], axis=axis)
    if all(p[1] is None for p in parts):
        return Dual(t, vals)
    eps = stack([_zeros(p[0]) if p[1] is None else p[1] for p in parts], axis=axis)
    return Dual(t, vals, eps)


def concatenate(items, axis=0):
    items = list(items)
    t = _top(*items)
    if t == 0:
        return np.concatenate([np.asarray(v, dtype=float) for v in items], axis=axis)
    parts = [_split(v, t) for v in items]
    vals = concatenate([p[0] for p in parts], axis=axis)
    if all(p[1] is None for p in parts):
        return Dual(t, vals)
    eps = concatenate([_zeros(p[0]) if p[1] is None else p[1] for p in parts], axis=axis)
    return Dual(t, vals, eps)


def transpose(x, axes=None):
    if isinstance(x, Dual):
        e = None if x.eps is None else transpose(x.eps, axes)
        return Dual(x.tag, transpose(x.val, axes), e)
    return np.transpose(x, axes)


def einsum(subscripts: str, *operands):
    t = _top(*operands)
    if t == 0:
        return np.einsum(subscripts, *operands, optimize=False)
    parts = [_split(op, t) for op in operands]
    vals = [p[0] for p in parts]
    out = einsum(subscripts, *vals)
    eps = None
    for i, (_, e) in enumerate(parts):
        if e is None:
            continue
        ops = vals[:i] + [e] + vals[i + 1:]
        eps = _eadd(eps, einsum(subscripts, *ops))
    return Dual(t, out, eps)


def solve(A, b):
    """Dense square solve, differentiable in both arguments."""
    t = _top(A, b)
    if t == 0:
        return np.linalg.solve(A, b)
    Av, Ae = _split(A, t)
    bv, be = _split(b, t)
    x = solve(Av, bv)
    rhs = be
    if Ae is not None:
        rhs = _eadd(rhs, -(Ae @ x))
    if rhs is None:
        return Dual(t, x)
    return Dual(t, x, solve(Av, rhs))


def lstsq(A, b):
    """Least-squares solution for full column rank ``A`` (differentiable)."""
    t = _top(A, b)
    if t == 0:
        return np.linalg.lstsq(A, b, rcond=None)[0]
    Av, Ae = _split(A, t)
    bv, be = _split(b, t)
    x = lstsq(Av, bv)
    rhs = None
    if be is not None:
        rhs = transpose(Av) @ be
    if Ae is not None:
        r = bv - Av @ x
        rhs = _eadd(rhs, transpose(Ae) @ r - transpose(Av) @ (Ae @ x))
    if rhs is None:
        return Dual(t, x)
    return Dual(t, x, solve(transpose(Av) @ Av, rhs))


# -- derivatives ------------------------------------------------------------

def tangent(y, tag, like=None):
    if isinstance(y, Dual) and y.tag == tag:
        if y.eps is None:
            return _zeros(y.val)
        return y.eps
    return np.zeros(shape(y if like is None else like))


def primal(y, tag):
    if isinstance(y, Dual) and y.tag == tag:
        return y.val
    return y


def jvp(f: Callable, x, v):
    """Return ``(f(x), Df(x)[v])``; ``x`` and ``v`` may carry older tags."""
    t = next(_tags)
    y = f(Dual(t, x, v))
    return primal(y, t), tangent(y, t)


def derivative(f: Callable, x, v):
    return jvp(f, x, v)[1]


def jacobian(f: Callable, x):
    """``J[..., m] = d f(x)[...] / d x_m`` for a vector argument ``x``."""
    m = shape(x)[0]
    cols = []
    for k in range(m):
        e = np.zeros(m)
        e[k] = 1.0
        cols.append(derivative(f, x, e))
    return stack(cols, axis=-1)
