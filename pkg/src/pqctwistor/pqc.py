"""Local paraquaternionic contact structures.

A structure lives on a chart of dimension ``4n + 3``.  The distribution ``H``
is described by an explicit basis (``frame``), and the endomorphisms ``I_s``
and the metric ``g`` are given as matrices in that basis.  Reeb fields and
connection 1-forms are derived pointwise; the conformal change stores its own
closed-form replacements for both.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import ad
from .algebra import CYCLIC, EPS, J1, J2, J3, right_mul_matrix
from .errors import DegenerateStructureError, PqcError, UnsupportedInputError
from .fields import Chart, Polynomial, pair, signature
from .report import VerificationReport, upper

REEB_RESIDUAL_GATE = 1e-8
RANK_TOL = 1e-10


@dataclass(frozen=True)
class PqcStructure:
    """``(eta_s, I_s, g, Scal)`` on a chart of dimension ``4n + 3``.

    ``eta(u)`` is ``(3, dim)``, ``frame(u)`` is a ``(dim, 4n)`` basis of H,
    ``endos(u)`` is ``(3, 4n, 4n)`` with ``I_s e_a = sum_c endos[s][c, a] e_c``
    and ``metric(u)`` is the ``(4n, 4n)`` Gram matrix of g in the frame.
    """

    n: int
    eta: Callable
    frame: Callable
    endos: Callable
    metric: Callable
    scal: Optional[Callable]
    parallel_frame: bool = False
    reeb_fn: Optional[Callable] = None
    alpha_fn: Optional[Callable] = None
    name: str = "pqc"

    @property
    def dim(self) -> int:
        return 4 * self.n + 3

    @property
    def rank(self) -> int:
        return 4 * self.n

    @property
    def chart(self) -> Chart:
        return Chart(self.dim)

    @property
    def scal_factor(self) -> float:
        """``16 n (n + 2)``, the normalisation of Scal in the connection forms."""
        return 16.0 * self.n * (self.n + 2)


# -- pointwise derived objects --------------------------------------------------

def d_eta(P: PqcStructure, u):
    """``(3, dim, dim)``: ``d eta_s`` as antisymmetric matrices."""
    jac = ad.jacobian(P.eta, u)  # [s, nu, mu] = d_mu eta_s,nu
    return ad.transpose(jac, (0, 2, 1)) - jac


def frame_pinv(E):
    """Left inverse of the frame: coordinates of a vector of H in the frame."""
    Et = ad.transpose(E)
    return ad.solve(Et @ E, Et)


def horizontal_projector(eta, xi):
    """Projection of TM onto H along the span of the Reeb fields."""
    dim = ad.shape(eta)[1]
    return np.eye(dim) - ad.einsum("sa,s,sb->ab", xi, EPS, eta)


def endo_matrices(P: PqcStructure, u, xi=None):
    """``(3, dim, dim)``: ``A -> I_s (A_H)`` as matrices on TM."""
    E = P.frame(u)
    Einv = frame_pinv(E)
    if xi is None:
        xi = reeb(P, u)
    PH = horizontal_projector(P.eta(u), xi)
    I = P.endos(u)
    return ad.stack([E @ (I[s] @ (Einv @ PH)) for s in range(3)])


def horizontal_gradient(P: PqcStructure, u, df):
    """Frame coordinates of the horizontal gradient: ``g(grad f, X) = df(X)`` on H."""
    E = P.frame(u)
    return ad.solve(P.metric(u), ad.transpose(E) @ df)


@dataclass(frozen=True)
class ReebSolution:
    xi: object  # (3, dim), rows are the Reeb vectors
    residual: float
    condition: float


def reeb_system(P: PqcStructure, u):
    """Linear system ``M z = b`` for ``z = (xi_1, xi_2, xi_3)`` stacked.

    Rows: the 9 normalisation equations ``eta_s(xi_t) = eps_s delta_st`` and
    the ``6 * 4n`` symmetry equations ``d eta_s(xi_t, e_a) + d eta_t(xi_s, e_a) = 0``.
    """
    dim, r = P.dim, P.rank
    eta = P.eta(u)
    deta = d_eta(P, u)
    E = P.frame(u)
    I3 = np.eye(3)
    norm = ad.einsum("tT,sm->stTm", I3, eta).reshape(9, 3 * dim)
    De = ad.einsum("snm,ma->san", deta, E)  # De[s, a] = d eta_s(., e_a)
    sym = ad.einsum("tT,sam->stTam", I3, De) + ad.einsum("sT,tam->stTam", I3, De)
    sym = ad.transpose(sym, (0, 1, 3, 2, 4)).reshape(9, r, 3 * dim)
    upper_pairs = [3 * s + t for s in range(3) for t in range(s, 3)]
    sym = ad.stack([sym[k] for k in upper_pairs]).reshape(6 * r, 3 * dim)
    rhs = np.concatenate([np.eye(3).ravel() * np.repeat(EPS, 3), np.zeros(6 * r)])
    return ad.concatenate([norm, sym]), rhs


def solve_reeb(P: PqcStructure, u, gate: float = REEB_RESIDUAL_GATE) -> ReebSolution:
    M, b = reeb_system(P, u)
    Mv = np.asarray(ad.value(M), float)
    sv = np.linalg.svd(Mv, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise DegenerateStructureError(
            "Reeb system is rank deficient; existence of Reeb fields is an extra condition here"
        )
    z = ad.lstsq(M, b)
    residual = float(np.abs(Mv @ np.asarray(ad.value(z)) - b).max())
    if residual > gate:
        raise DegenerateStructureError(f"no Reeb fields at this point (residual {residual:.3e})")
    return ReebSolution(z.reshape(3, P.dim), residual, float(sv[0] / sv[-1]))


def reeb(P: PqcStructure, u):
    """``(3, dim)`` Reeb vectors at ``u``."""
    if P.reeb_fn is not None:
        return P.reeb_fn(u)
    return solve_reeb(P, u).xi


def reeb_field(P: PqcStructure, s: int):
    return lambda u: reeb(P, u)[s]


def reeb_residuals(P: PqcStructure, u, xi=None) -> tuple[float, float]:
    """Max residuals of the normalisation and symmetry conditions."""
    if xi is None:
        xi = reeb(P, u)
    eta = np.asarray(ad.value(P.eta(u)))
    deta = np.asarray(ad.value(d_eta(P, u)))
    E = np.asarray(ad.value(P.frame(u)))
    xi = np.asarray(ad.value(xi))
    norm = float(np.abs(eta @ xi.T - np.diag(EPS)).max())
    sym = 0.0
    for s in range(3):
        for t in range(3):
            v = xi[t] @ deta[s] @ E + xi[s] @ deta[t] @ E
            sym = max(sym, float(np.abs(v).max()))
    return norm, sym


# -- connection 1-forms -----------------------------------------------------------

def coneform_values(P: PqcStructure, u, xi=None, deta=None, scal=None):
    """``A[i, s] = alpha_i(xi_s)`` and the horizontal covectors ``alpha_i(X) = d eta_k(xi_j, X)``."""
    if xi is None:
        xi = reeb(P, u)
    if deta is None:
        deta = d_eta(P, u)
    if scal is None:
        scal = P.scal(u)
    S = sum(pair(deta[i], xi[j], xi[k]) for i, j, k in CYCLIC)
    diag = scal / P.scal_factor + S / 2.0
    on_xi, horiz = {}, {}
    for i, j, k in CYCLIC:
        horiz[i] = xi[j] @ deta[k]
        on_xi[i] = ad.stack([pair(deta[s], xi[j], xi[k]) - (diag if s == i else 0.0) for s in range(3)])
    return ad.stack([on_xi[i] for i in range(3)]), ad.stack([horiz[i] for i in range(3)])


def assemble_alpha(eta, xi, on_xi, horiz):
    """Covectors on TM from values on H and on the Reeb fields."""
    PH = horizontal_projector(eta, xi)
    return horiz @ PH + on_xi @ (EPS[:, None] * eta)


def connection_forms(P: PqcStructure, xi_fn: Optional[Callable] = None) -> Callable:
    """``u -> (3, dim)`` connection 1-forms of the canonical connection.

    Uses the stored closed form when the structure carries one (conformal
    images), otherwise the expressions in terms of ``d eta_s``, the Reeb
    fields and ``Scal``.
    """
    if P.alpha_fn is not None and xi_fn is None:
        return P.alpha_fn
    if P.scal is None:
        raise UnsupportedInputError(f"structure {P.name!r} carries no Scal; connection forms unavailable")

    def alpha(u):
        xi = reeb(P, u) if xi_fn is None else xi_fn(u)
        on_xi, horiz = coneform_values(P, u, xi)
        return assemble_alpha(P.eta(u), xi, on_xi, horiz)

    return alpha


def connection_forms_from_coneforms(P: PqcStructure) -> Callable:
    """Connection forms from ``d eta_s``, Reeb fields and Scal, ignoring any closed form."""
    return connection_forms(replace(P, alpha_fn=None))


def alpha_at(P: PqcStructure, u):
    return connection_forms(P)(u)


# -- axioms -------------------------------------------------------------------------

def axiom_residuals(P: PqcStructure, u) -> dict[str, float]:
    eta = np.asarray(ad.value(P.eta(u)), float)
    E = np.asarray(ad.value(P.frame(u)), float)
    I = np.asarray(ad.value(P.endos(u)), float)
    G = np.asarray(ad.value(P.metric(u)), float)
    deta = np.asarray(ad.value(d_eta(P, u)), float)
    out = {}
    rank_ok = (np.linalg.matrix_rank(eta) == 3) and (np.linalg.matrix_rank(E) == P.rank)
    out["axiom_i"] = float(np.abs(eta @ E).max()) if rank_ok else float("inf")
    r2 = 0.0
    for s in range(3):
        # d eta_s(e_a, e_b) - 2 g(I_s e_a, e_b)
        lhs = E.T @ deta[s] @ E
        rhs = 2.0 * I[s].T @ G
        r2 = max(r2, float(np.abs(lhs - rhs).max()))
    out["axiom_ii"] = r2
    eye = np.eye(P.rank)
    out["axiom_iii"] = max(
        float(np.abs(I[0] @ I[0] - eye).max()),
        float(np.abs(I[1] @ I[1] - eye).max()),
        float(np.abs(I[0] @ I[1] - I[2]).max()),
        float(np.abs(I[1] @ I[0] + I[2]).max()),
    )
    sig = signature(G)
    out["metric_signature"] = float(abs(sig.positive - 2 * P.n) + abs(sig.negative - 2 * P.n) + sig.zero)
    out["metric_symmetry"] = float(np.abs(G - G.T).max())
    return out


def check_axioms(P: PqcStructure, points, tol: float = 1e-9) -> VerificationReport:
    """Per-axiom maximum residual over ``points``; failures are reported, never raised."""
    per = {"axiom_i": [], "axiom_ii": [], "axiom_iii": [], "metric_signature": [], "metric_symmetry": []}
    for u in points:
        try:
            res = axiom_residuals(P, np.asarray(u, float))
        except (PqcError, np.linalg.LinAlgError):
            res = {key: float("inf") for key in per}
        for key, v in res.items():
            per[key].append(v)
    rep = VerificationReport()
    rep.add(upper("pqc.axiom_i", "pqc axiom (i): H = joint kernel of eta_s", per["axiom_i"], tol))
    rep.add(upper("pqc.axiom_ii", "pqc axiom (ii): d eta_s = 2 g(I_s., .)", per["axiom_ii"], tol))
    rep.add(upper("pqc.axiom_iii", "pqc axiom (iii): split-quaternion relations", per["axiom_iii"], tol))
    rep.add(upper("pqc.metric_symmetry", "g symmetric on H", per["metric_symmetry"], tol))
    rep.add(upper("pqc.metric_signature", "g of signature (2n,2n)", per["metric_signature"], 0.5))
    return rep


# -- the flat model ---------------------------------------------------------------------

def model_matrices(n: int):
    """Constant data of the flat model on ``B^n``: the metric, the ``I_s`` and ``eta`` coefficients.

    ``g = Re(conj(x) y)`` and ``I_s x = x conj(j_s)``; the quadratic part of
    ``eta_s`` is ``-q^T C_s dq`` with ``C_s = g I_s`` (antisymmetric).
    """
    blocks_g = np.diag([1.0, -1.0, -1.0, 1.0])
    G = np.kron(np.eye(n), blocks_g)
    I = np.array([np.kron(np.eye(n), right_mul_matrix(j.conj())) for j in (J1, J2, J3)])
    C = np.array([G @ I[s] for s in range(3)])
    return G, I, C


def heisenberg_model(n: int = 1) -> PqcStructure:
    """Flat paraquaternionic Heisenberg group on ``R^(4n+3)`` with coordinates ``(q, t)``.

    ``eta_s = dt_s - q^T (g I_s) dq``.  The horizontal frame
    ``e_a = d/dq_a - sum_s eta_s(d/dq_a) d/dt_s`` is left invariant and
    parallel for the canonical connection, whose connection forms vanish.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    G, I, C = model_matrices(n)
    r = 4 * n
    T = np.eye(3)

    def eta(u):
        qC = ad.einsum("a,sab->sb", u[:r], C)
        return ad.concatenate([-qC, T], axis=1)

    def frame(u):
        qC = ad.einsum("a,sab->sb", u[:r], C)
        return ad.concatenate([np.eye(r), qC])

    return PqcStructure(
        n=n,
        eta=eta,
        frame=frame,
        endos=lambda u: I,
        metric=lambda u: G,
        scal=lambda u: 0.0,
        parallel_frame=True,
        name=f"heisenberg(n={n})",
    )


def model_labels(n: int) -> tuple[str, ...]:
    return tuple(f"q{a // 4}.{a % 4}" for a in range(4 * n)) + ("t1", "t2", "t3")


def with_scal(P: PqcStructure, scal) -> PqcStructure:
    """Same structure with different Scal data (used for purely algebraic checks)."""
    fn = scal if callable(scal) else (lambda u, c=float(scal): c)
    return replace(P, scal=fn, alpha_fn=None, name=f"{P.name}+scal")


def perturb_eta(P: PqcStructure, s: int, extra: Callable) -> PqcStructure:
    """Add the 1-form ``extra`` to ``eta_s``, keeping everything else (a deliberately broken structure)."""

    def eta(u):
        rows = [P.eta(u)[t] for t in range(3)]
        rows[s] = rows[s] + extra(u)
        return ad.stack(rows)

    return replace(P, eta=eta, reeb_fn=None, alpha_fn=None, name=f"{P.name}+perturbed")


# -- changes of structure ----------------------------------------------------------------

def _as_field(f):
    if callable(f):
        return f
    c = float(f)
    return lambda u: c


def _is_constant(f) -> bool:
    if isinstance(f, Polynomial):
        return f.is_constant
    return not callable(f)


def _constant_value(f) -> float:
    return f.constant if isinstance(f, Polynomial) else float(f)


def _checked(f, what="f"):
    def wrapped(u):
        v = f(u)
        if abs(float(ad.value(v))) < 1e-12:
            raise PqcError(f"{what} vanishes at {np.asarray(ad.value(u))}")
        return v

    return wrapped


def rotate_structure(P: PqcStructure, S, f=1.0) -> PqcStructure:
    """``(eta', I', g') = (f eta S, I S, f g)`` for an SO(1,2)-valued ``S`` and non-vanishing ``f``."""
    if not callable(S):
        S_const = np.asarray(S, float)
        S_fn = lambda u: S_const  # noqa: E731
    else:
        S_fn = S
    const_f = _is_constant(f)
    if const_f and _constant_value(f) == 0.0:
        raise PqcError("f must not vanish")
    ff = _checked(_as_field(f))

    def eta(u):
        return ff(u) * (ad.transpose(S_fn(u)) @ P.eta(u))

    def endos(u):
        return ad.einsum("ts,tab->sab", S_fn(u), P.endos(u))

    def metric(u):
        return ff(u) * P.metric(u)

    scal = None
    if const_f and P.scal is not None:
        c = _constant_value(f)
        scal = lambda u: P.scal(u) / c  # noqa: E731
    return PqcStructure(
        n=P.n, eta=eta, frame=P.frame, endos=endos, metric=metric, scal=scal,
        parallel_frame=P.parallel_frame and const_f, name=f"rotated({P.name})",
    )


@dataclass(frozen=True)
class ConformalData:
    """Pointwise ingredients of the conformal change ``g -> g / (2f)``."""

    f: object
    df: object
    grad: object  # frame coordinates of the horizontal gradient
    laplacian: object
    grad_norm2: object


def flat_laplacian(P: PqcStructure, f: Callable, u):
    """Sub-Laplacian ``sum_a Hess f(e_a, e_a*)`` with ``Hess f(e_a, e_b) = e_a(e_b f)``.

    Valid only when the frame of ``P`` is parallel for its canonical connection.
    """
    if not P.parallel_frame:
        raise UnsupportedInputError(f"structure {P.name!r} exposes no parallel horizontal frame")

    def frame_derivs(v):
        return ad.transpose(P.frame(v)) @ ad.jacobian(f, v)

    E = P.frame(u)
    H = ad.stack([ad.derivative(frame_derivs, u, E[:, a]) for a in range(P.rank)])
    Ginv = ad.solve(P.metric(u), np.eye(P.rank))
    return ad.einsum("ab,ba->", H, Ginv)


def conformal_data(P: PqcStructure, f: Callable, u, constant: bool) -> ConformalData:
    fv = f(u)
    if constant:
        df = ad.jacobian(f, u) * 0.0
        lap = 0.0
    else:
        df = ad.jacobian(f, u)
        lap = flat_laplacian(P, f, u)
    grad = horizontal_gradient(P, u, df)
    gn2 = grad @ (P.metric(u) @ grad)
    return ConformalData(fv, df, grad, lap, gn2)


def conformal_reeb(P: PqcStructure, f: Callable, constant: bool) -> Callable:
    """``xi_bar_s = 2 f xi_s + I_s grad f``."""

    def xi_bar(u):
        cd = conformal_data(P, f, u, constant)
        xi = reeb(P, u)
        E = P.frame(u)
        I = P.endos(u)
        return ad.stack([2.0 * cd.f * xi[s] + E @ (I[s] @ cd.grad) for s in range(3)])

    return xi_bar


def conformal_alpha_values(P: PqcStructure, f: Callable, u, constant: bool):
    """Values of the new connection forms on H (covectors) and on the new Reeb fields."""
    n = P.n
    cd = conformal_data(P, f, u, constant)
    xi = reeb(P, u)
    alpha = connection_forms(P)(u)
    E = P.frame(u)
    I = P.endos(u)
    Einv = frame_pinv(E)
    w = ad.transpose(E) @ cd.df  # e_a f
    horiz = ad.stack([alpha[s] + (EPS[s] / cd.f) * ((w @ I[s]) @ Einv) for s in range(3)])
    Igrad = [E @ (I[s] @ cd.grad) for s in range(3)]
    dfxi = xi @ cd.df  # df(xi_t)
    A = alpha @ ad.transpose(xi)  # A[s, t] = alpha_s(xi_t)
    entries = {}
    for i, j, k in CYCLIC:
        entries[(i, i)] = 2.0 * cd.f * A[i, i] - cd.laplacian / (2.0 * n) + cd.grad_norm2 / (n * cd.f)
        entries[(j, i)] = 2.0 * cd.f * A[j, i] + alpha[j] @ Igrad[i] - 2.0 * EPS[i] * dfxi[k]
        entries[(k, i)] = 2.0 * cd.f * A[k, i] + alpha[k] @ Igrad[i] + 2.0 * EPS[i] * dfxi[j]
    on_xi = ad.stack([ad.stack([entries[(s, t)] for t in range(3)]) for s in range(3)])
    return on_xi, horiz


def conformal_change(P: PqcStructure, f) -> PqcStructure:
    """The structure ``(eta / 2f, I_s, g / 2f)`` with its Reeb fields and connection forms.

    Scal of the new structure is recovered from the values ``alpha_i(xi_i)``
    of the new connection forms (mean over ``i``; see :func:`scal_spread`).
    """
    constant = _is_constant(f)
    if constant and _constant_value(f) == 0.0:
        raise PqcError("conformal factor must not vanish")
    if not constant and not P.parallel_frame:
        raise UnsupportedInputError(
            f"non-constant conformal factor needs a parallel horizontal frame; {P.name!r} has none"
        )
    if P.scal is None:
        raise UnsupportedInputError(f"structure {P.name!r} carries no Scal")
    ff = _checked(_as_field(f), "conformal factor")

    def eta_bar(u):
        return P.eta(u) / (2.0 * ff(u))

    def metric_bar(u):
        return P.metric(u) / (2.0 * ff(u))

    xi_bar = conformal_reeb(P, ff, constant)

    def alpha_bar(u):
        on_xi, horiz = conformal_alpha_values(P, ff, u, constant)
        return assemble_alpha(eta_bar(u), xi_bar(u), on_xi, horiz)

    bar = PqcStructure(
        n=P.n, eta=eta_bar, frame=P.frame, endos=P.endos, metric=metric_bar, scal=None,
        parallel_frame=False, reeb_fn=xi_bar, alpha_fn=alpha_bar, name=f"conformal({P.name})",
    )

    def scal_bar(u):
        return inferred_scal(bar, P, ff, u, constant).sum() / 3.0

    return replace(bar, scal=scal_bar)


def inferred_scal(bar: PqcStructure, P: PqcStructure, f, u, constant: bool):
    """Three estimates of Scal, one per ``i``, from inverting ``alpha_i(xi_i)``."""
    xi = bar.reeb_fn(u)
    deta = d_eta(bar, u)
    on_xi, _ = conformal_alpha_values(P, f, u, constant)
    S = sum(pair(deta[i], xi[j], xi[k]) for i, j, k in CYCLIC)
    est = [bar.scal_factor * (pair(deta[i], xi[j], xi[k]) - S / 2.0 - on_xi[i, i]) for i, j, k in CYCLIC]
    return ad.stack(est)
