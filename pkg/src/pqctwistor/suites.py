"""Registry of verification checks and the suite runner.

Every check group draws its samples from its own generator, seeded by
``(seed, crc32(group id))``, so adding or reordering checks never changes the
samples seen by another group.
"""

from __future__ import annotations

import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import ad, algebra, bundle as bd, pqc, twistor as tw
from .algebra import BASIS, EPS, SplitQuaternion
from .fields import Polynomial, inertia_ldl
from .report import Check, VerificationReport, lower, upper

SUITES = ("algebra", "model", "twistor", "reflector", "conformal", "all")
WORKERS_ENV = "PQCTWISTOR_WORKERS"
DEFAULT_F = "poly:1,0.1"
EXACT = 5e-324  # smallest positive double: only a zero residual passes


@dataclass(frozen=True)
class SuiteConfig:
    suite: str = "all"
    n: int = 1
    samples: int = 100
    seed: int = 0
    f: str = DEFAULT_F
    tol: Optional[float] = None
    tolerances: tuple[tuple[str, float], ...] = ()
    mutate_J: bool = False

    def __post_init__(self):
        if self.suite not in SUITES:
            raise ValueError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.n < 1:
            raise ValueError("--n must be at least 1")
        if self.samples < 1:
            raise ValueError("--samples must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("--seed must be a 64-bit unsigned integer")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("--tol must be positive")
        Polynomial.parse(self.f, 4 * self.n + 3)

    def count(self, nominal: int) -> int:
        """Sample count for a check whose nominal count (at ``samples = 100``) is ``nominal``."""
        return max(1, int(round(nominal * self.samples / 100)))

    def threshold(self, check_id: str, default: float, bound: str) -> float:
        overrides = dict(self.tolerances)
        if check_id in overrides:
            return overrides[check_id]
        if self.tol is not None and bound == "upper" and default != EXACT:
            return self.tol
        return default


@dataclass
class Ctx:
    """What a check group sees: the configuration, its generator and a result sink."""

    cfg: SuiteConfig
    rng: np.random.Generator
    out: list = field(default_factory=list)

    def upper(self, check_id: str, anchor: str, values, threshold: float) -> None:
        self.out.append(upper(check_id, anchor, values, self.cfg.threshold(check_id, threshold, "upper")))

    def lower(self, check_id: str, anchor: str, values, threshold: float) -> None:
        self.out.append(lower(check_id, anchor, values, self.cfg.threshold(check_id, threshold, "lower")))


@dataclass(frozen=True)
class Group:
    group_id: str
    suites: tuple[str, ...]
    fn: Callable[[Ctx], None]


REGISTRY: list[Group] = []


def group(group_id: str, *suites: str):
    def deco(fn):
        REGISTRY.append(Group(group_id, suites, fn))
        return fn

    return deco


def group_rng(seed: int, group_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(group_id.encode())]))


# -- cached structures ------------------------------------------------------------

@lru_cache(maxsize=None)
def model(n: int) -> pqc.PqcStructure:
    return pqc.heisenberg_model(n)


@lru_cache(maxsize=None)
def factor(n: int, spec: str) -> Polynomial:
    return Polynomial.parse(spec, 4 * n + 3)


@lru_cache(maxsize=None)
def conformal(n: int, spec: str) -> pqc.PqcStructure:
    return pqc.conformal_change(model(n), factor(n, spec))


def base_point(ctx: Ctx, scale: float = 0.5) -> np.ndarray:
    return ctx.rng.normal(scale=scale, size=4 * ctx.cfg.n + 3)


def q_point(ctx: Ctx, scale: float = 0.5) -> np.ndarray:
    """Random point of Q with ``|<I,I>|`` bounded away from zero."""
    while True:
        x = ctx.rng.normal(size=3)
        if abs(algebra.im_inner(x, x)) > 0.05:
            return np.concatenate([base_point(ctx, scale), x])


def hyper_point(ctx: Ctx, sigma: int) -> tw.HyperboloidPoint:
    return tw.random_hyperboloid_point(ctx.rng, sigma, 4 * ctx.cfg.n + 3)


def horizontal(P: pqc.PqcStructure, u, rng) -> np.ndarray:
    return np.asarray(P.frame(u) @ rng.normal(size=P.rank))


def vmax(v) -> float:
    return float(np.abs(np.asarray(ad.value(v), float)).max())


def rand_sq(rng) -> SplitQuaternion:
    return SplitQuaternion.from_array(rng.normal(size=4))


def unit_sq(rng) -> SplitQuaternion:
    while True:
        z = rand_sq(rng)
        nz = float(z.norm2())
        if nz > 0.1:
            return z * (1.0 / math.sqrt(nz))


# -- algebra --------------------------------------------------------------------------

TABLE = {
    (0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
    (1, 0): (1, 1), (1, 1): (1, 0), (1, 2): (1, 3), (1, 3): (1, 2),
    (2, 0): (1, 2), (2, 1): (-1, 3), (2, 2): (1, 0), (2, 3): (-1, 1),
    (3, 0): (1, 3), (3, 1): (-1, 2), (3, 2): (1, 1), (3, 3): (-1, 0),
}


@group("algebra.table", "algebra")
def _algebra_table(ctx: Ctx):
    worst = 0.0
    for (a, b), (sign, k) in TABLE.items():
        want = np.zeros(4)
        want[k] = sign
        worst = max(worst, float(np.abs(np.asarray((BASIS[a] * BASIS[b]).coefficients()) - want).max()))
    ctx.upper("algebra.table", "multiplication table of B", [worst], EXACT)


@group("algebra.so12", "algebra")
def _algebra_so12(ctx: Ctx):
    vals = []
    for _ in range(ctx.cfg.count(50)):
        M = algebra.random_so12(ctx.rng, 0.7)
        g = algebra.gammas_from_so12(M)
        vals.append(float(np.abs(algebra.so12_from_gammas(*g) - M).max()))
    ctx.upper("algebra.so12_roundtrip", "SO(1,2) triple lemma", vals, 1e-9)
    swap = np.eye(3)[[1, 0, 2]]
    g = tuple(SplitQuaternion.imaginary(swap[s]) for s in range(3))
    ctx.lower("algebra.so12_rejects_det_minus_one", "SO(1,2) triple lemma",
              [algebra.triple_relations(*g)["g1 g2 = g3"]], 1e-9)


@group("algebra.products", "algebra")
def _algebra_products(ctx: Ctx):
    rng = ctx.rng
    cross, hom = [], []
    for _ in range(ctx.cfg.count(100)):
        a, b, c = rng.normal(size=(3, 3))
        cross.append(abs(algebra.im_inner(algebra.im_cross(a, b), c) - np.linalg.det(np.array([a, b, c]).T)))
        p, q = rand_sq(rng), rand_sq(rng)
        hom.append(float(np.abs(algebra.mat2_rep(p * q) - algebra.mat2_rep(p) @ algebra.mat2_rep(q)).max()))
    ctx.upper("algebra.cross_triple_product", "cross product and determinant", cross, 1e-12)
    ctx.upper("algebra.mat2_homomorphism", "B is isomorphic to M_2(R)", hom, 1e-12)


@group("algebra.action", "algebra")
def _algebra_action(ctx: Ctx):
    rng = ctx.rng
    vals = []
    n = ctx.cfg.n
    for _ in range(ctx.cfg.count(100)):
        A = [[unit_sq(rng) if a == b else SplitQuaternion() for b in range(n)] for a in range(n)]
        z = unit_sq(rng)
        x = [rand_sq(rng) for _ in range(n)]
        y = [rand_sq(rng) for _ in range(n)]
        before = algebra.bn_inner(x, y)
        after = algebra.bn_inner(algebra.sp_action(A, z, x), algebra.sp_action(A, z, y))
        vals.append(abs(float(after - before)) / (1.0 + abs(float(before))))
    ctx.upper("algebra.sp_action_invariance", "Sp(n,B)Sp(1,B) preserves Re(conj(x) y)", vals, 1e-12)


@group("algebra.casimir", "algebra")
def _algebra_casimir(ctx: Ctx):
    rng = ctx.rng
    _, I, _ = pqc.model_matrices(ctx.cfg.n)
    recon, comm, eig = [], [], []
    signs = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
    for _ in range(ctx.cfg.count(100)):
        Psi = rng.normal(size=I[0].shape)
        parts = algebra.casimir_split(Psi, *I)
        recon.append(float(np.abs(sum(parts) - Psi).max()))
        w = 0.0
        for part, sg in zip(parts, signs):
            for s in range(3):
                w = max(w, float(np.abs(I[s] @ part - sg[s] * part @ I[s]).max()))
        comm.append(w)
        C = algebra.casimir(Psi, *I)
        eig.append(float(np.abs(C - (3 * parts[0] - (Psi - parts[0]))).max()))
    ctx.upper("algebra.casimir_reconstruction", "four-component split of End(H)", recon, 1e-12)
    ctx.upper("algebra.casimir_commutation", "four-component split of End(H)", comm, 1e-12)
    ctx.upper("algebra.casimir_eigenvalues", "Casimir eigenvalues 3 and -1", eig, 1e-12)


# -- model ---------------------------------------------------------------------------

@group("pqc.model_axioms", "model")
def _model_axioms(ctx: Ctx):
    P = model(ctx.cfg.n)
    pts = [base_point(ctx, 1.0) for _ in range(ctx.cfg.count(100))]
    for c in pqc.check_axioms(P, pts, 1e-9).checks:
        ctx.out.append(replace(c, threshold=ctx.cfg.threshold(c.check_id, c.threshold, c.bound)))
    G = P.metric(pts[0])
    s = inertia_ldl(G)
    ctx.upper("pqc.metric_inertia_ldl", "g of signature (2n,2n)",
              [abs(s[0] - 2 * P.n) + abs(s[1] - 2 * P.n) + s[2]], 0.5)


@group("pqc.perturbed", "model")
def _model_perturbed(ctx: Ctx):
    P = model(ctx.cfg.n)
    e2 = np.zeros(P.dim)
    e2[1] = 1.0
    Pp = pqc.perturb_eta(P, 0, lambda u: u[0] * e2)
    pts = [base_point(ctx, 1.0) for _ in range(ctx.cfg.count(20))]
    vals = [pqc.axiom_residuals(Pp, u)["axiom_ii"] for u in pts]
    ctx.lower("pqc.perturbed_axiom_ii", "pqc axiom (ii) detects a perturbed eta", vals, 0.1)


@group("pqc.reeb", "model")
def _model_reeb(ctx: Ctx):
    P = model(ctx.cfg.n)
    norm, sym, exact, cond, stab = [], [], [], [], []
    target = np.concatenate([np.zeros((3, P.rank)), np.diag(EPS)], axis=1)
    for k in range(ctx.cfg.count(50)):
        u = np.zeros(P.dim) if k == 0 else base_point(ctx, 1.0)
        sol = pqc.solve_reeb(P, u)
        a, b = pqc.reeb_residuals(P, u, sol.xi)
        norm.append(a)
        sym.append(b)
        exact.append(vmax(sol.xi - target))
        cond.append(sol.condition)
        M, rhs = pqc.reeb_system(P, u)
        delta = 1e-7 * ctx.rng.normal(size=rhs.shape)
        z0 = np.linalg.lstsq(M, rhs, rcond=None)[0]
        z1 = np.linalg.lstsq(M, rhs + delta, rcond=None)[0]
        stab.append(float(np.linalg.norm(z1 - z0) / np.linalg.norm(delta)) / sol.condition)
    ctx.upper("pqc.reeb_normalization", "Reeb condition eta_s(xi_t) = eps_s delta_st", norm, 1e-8)
    ctx.upper("pqc.reeb_symmetry", "Reeb condition d eta_s(xi_t, X) + d eta_t(xi_s, X) = 0", sym, 1e-8)
    ctx.upper("pqc.reeb_model_closed_form", "Reeb fields of the flat model", exact, 1e-9)
    ctx.upper("pqc.reeb_condition_number", "Reeb fields are unique", cond, 1e8)
    ctx.upper("pqc.reeb_perturbation", "Reeb solution depends Lipschitz on data", stab, 1.0 + 1e-6)


@group("pqc.coneforms_flat", "model")
def _model_coneforms(ctx: Ctx):
    P = model(ctx.cfg.n)
    vals = [vmax(pqc.alpha_at(P, base_point(ctx, 1.0))) for _ in range(ctx.cfg.count(100))]
    ctx.upper("pqc.coneforms_flat", "connection 1-forms of the flat model vanish", vals, 1e-9)


@group("pqc.rotate", "model")
def _model_rotate(ctx: Ctx):
    P = model(ctx.cfg.n)
    d = P.dim
    vals, scaled = [], []
    for _ in range(ctx.cfg.count(20)):
        S = algebra.random_so12(ctx.rng, 0.6)
        lin = tuple(0.1 * ctx.rng.normal(size=d))
        f = Polynomial(d, 1.5, lin, ((0, 1, 0.1),))
        Pr = pqc.rotate_structure(P, S, f)
        u = base_point(ctx, 0.5)
        r = pqc.axiom_residuals(Pr, u)
        vals.append(max(r["axiom_i"], r["axiom_ii"], r["axiom_iii"], r["metric_signature"]))
        P2 = pqc.rotate_structure(P, np.eye(3), 2.0)
        E = P.frame(u)
        de = pqc.d_eta(P2, u)
        G2 = P2.metric(u)
        worst = 0.0
        for s in range(3):
            worst = max(worst, float(np.abs(E.T @ de[s] @ E - 2.0 * P.endos(u)[s].T @ G2).max()))
        scaled.append(max(worst, float(np.abs(G2 - 2.0 * P.metric(u)).max())))
    ctx.upper("pqc.rotate_axioms", "rotated and rescaled structures are pqc", vals, 1e-8)
    ctx.upper("pqc.rotate_scaling", "rescaling eta by f rescales g by f", scaled, 1e-9)


# -- bundle on the flat model ------------------------------------------------------------

def vector_field(rng, dim: int) -> Callable:
    """Random polynomial vector field of degree two on R^dim."""
    c0 = rng.normal(size=dim)
    c1 = 0.5 * rng.normal(size=(dim, dim))
    c2 = 0.2 * rng.normal(size=(dim, dim))
    return lambda u: c0 + c1 @ u + c2 @ (u * u)


@group("bundle.basics", "model")
def _bundle_basics(ctx: Ctx):
    Q = bd.QBundle(model(ctx.cfg.n))
    _bundle_basics_on(ctx, Q, "bundle")


def _bundle_basics_on(ctx: Ctx, Q: bd.QBundle, prefix: str, nominal: int = 100, n_deta: int = 50):
    rng = ctx.rng
    dec, phi, ident, corr, cor_chi, deta = [], [], [], [], [], []
    for k in range(max(ctx.cfg.count(nominal), ctx.cfg.count(n_deta))):
        y = q_point(ctx)
        L = Q.local(y)
        T = rng.normal(size=Q.total_dim)
        dec.append(vmax(bd.recompose(L, *bd.decompose(L, T)) - T))
        A = rng.normal(size=Q.dim)
        phi.append(vmax(bd.phi_forms(L) @ bd.lift(L, A)))
        ident.append(vmax(bd.phi_forms(L)[:, Q.dim:] - np.diag(EPS)))
        D = bd.d_eta_numeric(Q, y)
        corr.append(abs(float(ad.value(bd.canonical_eta(L) @ bd.chi(L) - L.norm2))))
        cor_chi.append(vmax(bd.chi(L) @ D - L.fiber(-EPS * L.x)))
        if k < ctx.cfg.count(n_deta):
            deta.append(vmax(D - bd.d_eta_analytic(L)))
    ctx.upper(f"{prefix}.decomposition", "decomposition of tangent vectors of Q", dec, 1e-10)
    ctx.upper(f"{prefix}.phi_on_lifts", "phi_s vanish on horizontal lifts", phi, 1e-10)
    ctx.upper(f"{prefix}.phi_on_fiber", "phi_s(d/dx_t) = eps_s delta_st", ident, 1e-12)
    ctx.upper(f"{prefix}.eta_chi", "corollary: eta(chi) = sum eps_s x_s^2", corr, 1e-10)
    ctx.upper(f"{prefix}.chi_d_eta", "corollary: chi _| d eta = -sum eps_s x_s dx_s", cor_chi, 1e-10)
    ctx.upper(f"{prefix}.d_eta_lemma", "d eta lemma", deta, 1e-8)


@group("bundle.k", "model")
def _bundle_k(ctx: Ctx):
    _bundle_k_on(ctx, bd.QBundle(model(ctx.cfg.n)), "bundle")


def _bundle_k_on(ctx: Ctx, Q: bd.QBundle, prefix: str, nominal: int = 100):
    cons, J2, Jsplit, sym, skew, gdef, mixed = [], [], [], [], [], [], []
    rng = ctx.rng
    for k in range(ctx.cfg.count(nominal)):
        y = q_point(ctx)
        L = Q.local(y)
        K = Q.k_frame(y)
        B = K.basis
        cons.append(max(max(abs(float(ad.value(v))) for v in bd.k_constraints(L, b)) for b in B))
        J2.append(float(np.abs(K.J @ K.J + K.norm2 * np.eye(K.rank)).max()))
        Js = np.array([np.asarray(ad.value(bd.apply_J_split(L, b))) for b in B])
        Jc = np.array([np.asarray(ad.value(bd.apply_J(L, b))) for b in B])
        Jsplit.append(float(np.abs(Js - Jc).max()))
        sym.append(float(np.abs(K.gram - K.gram.T).max()))
        skew.append(float(np.abs(K.J.T @ K.gram + K.gram @ K.J).max()))
        Gd = np.array([[float(ad.value(bd.levi_G_from_d_eta(L, a, b))) for b in B] for a in B])
        gdef.append(float(np.abs(Gd - K.gram).max()))
        if k < ctx.cfg.count(nominal // 10):
            a, b = rng.normal(size=K.rank), rng.normal(size=K.rank)
            mixed.append(tw.mixed_bracket_in_k(Q, y, a, b))
    ctx.upper(f"{prefix}.k_constraints", "K is cut out by eta and sum x_s phi_s", cons, 1e-10)
    ctx.upper(f"{prefix}.J_square", "J^2 = -<I,I> id on K", J2, 1e-9)
    ctx.upper(f"{prefix}.J_coordinate_expansion", "coordinate expansion of J", Jsplit, 1e-9)
    ctx.upper(f"{prefix}.levi_symmetric", "Levi form lemma: G symmetric", sym, 1e-9)
    ctx.upper(f"{prefix}.levi_J_skew", "Levi form lemma: G(JA,B) = -G(A,JB)", skew, 1e-9)
    ctx.upper(f"{prefix}.levi_definition", "Levi form lemma: explicit formula", gdef, 1e-9)
    ctx.upper(f"{prefix}.mixed_bracket_in_K", "[JA,B] + [A,JB] is a section of K", mixed, 1e-7)


def levi_block_residuals(Q: bd.QBundle, u, lam: float) -> tuple[float, float]:
    """Entrywise distance of the U+W block of G from the closed forms at ``x = (0,0,lam)`` and ``(lam,0,0)``."""
    n = Q.P.n
    Lz = Q.local(np.concatenate([u, [0.0, 0.0, lam]]))
    h = float(ad.value(Lz.scal)) / (16.0 * n * (n + 2))
    l = 1.0 / (2.0 * lam)
    out = []
    for x, want in (
        ([0.0, 0.0, lam], [[h, 0, 0, l], [0, h, -l, 0], [0, -l, 0, 0], [l, 0, 0, 0]]),
        ([lam, 0.0, 0.0], [[h, 0, 0, -l], [0, -h, l, 0], [0, l, 0, 0], [-l, 0, 0, 0]]),
    ):
        K = Q.k_frame(np.concatenate([u, x]))
        r = 4 * n
        block = np.abs(K.gram[r:, r:] - np.array(want)).max()
        off = np.abs(K.gram[:r, r:]).max()
        out.append(float(max(block, off)))
    return out[0], out[1]


@group("bundle.levi_matrix", "model")
def _bundle_levi_matrix(ctx: Ctx):
    P = model(ctx.cfg.n)
    a, b = [], []
    for k in range(ctx.cfg.count(10)):
        Ps = pqc.with_scal(P, 0.0 if k == 0 else ctx.rng.normal(scale=5.0))
        r = levi_block_residuals(bd.QBundle(Ps), base_point(ctx), ctx.rng.uniform(0.3, 2.0) * ctx.rng.choice([-1, 1]))
        a.append(r[0])
        b.append(r[1])
    ctx.upper("bundle.levi_matrix_I3", "Levi form lemma: matrix at I = lambda I_3", a, 1e-12)
    ctx.upper("bundle.levi_matrix_I1", "Levi form lemma: matrix at I = lambda I_1", b, 1e-12)


@group("bundle.lift_commutator", "model")
def _bundle_commutator(ctx: Ctx):
    P = model(ctx.cfg.n)
    Q = bd.QBundle(P)
    size, horiz, anti = [], [], []
    for _ in range(ctx.cfg.count(50)):
        A, B = vector_field(ctx.rng, P.dim), vector_field(ctx.rng, P.dim)
        y = q_point(ctx)
        d1 = np.asarray(ad.value(Q.lift_commutator_defect(A, B, y)))
        d2 = np.asarray(ad.value(Q.lift_commutator_defect(B, A, y)))
        size.append(float(np.abs(d1).max()))
        horiz.append(float(np.abs(d1[: P.dim]).max()))
        anti.append(float(np.abs(d1 + d2).max()))
    ctx.upper("bundle.lift_commutator", "lift-commutator lemma (flat: no curvature term)", size, 1e-8)
    ctx.upper("bundle.lift_commutator_fiber", "lift-commutator defect is vertical", horiz, 1e-8)
    ctx.upper("bundle.lift_commutator_antisymmetry", "lift-commutator defect is antisymmetric", anti, 1e-8)


# -- twistor and reflector spaces ---------------------------------------------------------

def _space_checks(ctx: Ctx, sigma: int, P: pqc.PqcStructure, prefix: str, nominal_n: int,
                  tol_n: float):
    cfg = ctx.cfg
    Q = bd.QBundle(P, mutate_J=cfg.mutate_J)
    variant = "Z" if sigma == tw.TWISTOR else "R"
    k = 4 * cfg.n + 4
    vals, amb = [], []
    for _ in range(cfg.count(nominal_n)):
        q = hyper_point(ctx, sigma)
        a, b = ctx.rng.normal(size=k), ctx.rng.normal(size=k)
        K = Q.k_frame(q.y)
        vals.append(tw.nijenhuis(Q, q.y, a, b, variant, K).norm)
        amb.append(tw.nijenhuis(Q, q.y, a, b, "ambient", K).norm)
    name = "N^Z" if sigma == tw.TWISTOR else "N^R"
    ctx.upper(f"{prefix}.nijenhuis", f"N-vanishing proposition: {name} = 0", vals, tol_n)
    ctx.upper(f"{prefix}.nijenhuis_ambient", "N-vanishing proposition: ambient N = 0", amb, tol_n)
    if not cfg.mutate_J:
        Qm = bd.QBundle(P, mutate_J=True)
        mut = []
        for _ in range(cfg.count(nominal_n // 5)):
            q = hyper_point(ctx, sigma)
            a, b = ctx.rng.normal(size=k), ctx.rng.normal(size=k)
            mut.append(tw.nijenhuis(Qm, q.y, a, b, variant).norm)
        ctx.lower(f"{prefix}.nijenhuis_mutated_J", "control: a wrong J is not integrable", mut, 1e-2)


@group("Z.contact", "twistor")
def _z_contact(ctx: Ctx):
    _contact_checks(ctx, tw.TWISTOR, model(ctx.cfg.n), "Z")


@group("R.contact", "reflector")
def _r_contact(ctx: Ctx):
    _contact_checks(ctx, tw.REFLECTOR, model(ctx.cfg.n), "R")


def _contact_checks(ctx: Ctx, sigma: int, P: pqc.PqcStructure, prefix: str, nominal: int = 100):
    Q = bd.QBundle(P)
    pts = [hyper_point(ctx, sigma) for _ in range(ctx.cfg.count(nominal))]
    ctx.upper(f"{prefix}.hyperboloid", "fiber is a hyperboloid <I,I> = +-1",
              [tw.sphere_residual(q) for q in pts], 1e-12)
    for c in tw.reeb_property_check(Q, pts).checks:
        ctx.out.append(replace(c, check_id=f"{prefix}.{c.check_id.split('.', 1)[1]}",
                               threshold=ctx.cfg.threshold(c.check_id, c.threshold, c.bound)))
    n = ctx.cfg.n
    sig, margin, cons, contact = [], [], [], []
    for q in pts[: ctx.cfg.count(nominal // 2)]:
        s = tw.levi_signature_check(Q, q.y)
        sig.append(abs(s.signature.positive - (2 * n + 2)) + abs(s.signature.negative - (2 * n + 2)) + s.signature.zero)
        margin.append(s.signature.margin)
        cons.append(s.consistency)
        contact.append(tw.contact_margin(Q, q.y))
    ctx.upper(f"{prefix}.levi_signature", "main theorem: Levi form of signature (2n+2, 2n+2)", sig, 0.5)
    ctx.lower(f"{prefix}.levi_margin", "main theorem: Levi form nondegenerate", margin, 1e-7)
    ctx.upper(f"{prefix}.levi_d_eta", "d eta(J., .) = -2 <I,I> G", cons, 1e-9)
    ctx.lower(f"{prefix}.contact", "eta ^ d eta^2n != 0", contact, 1e-7)
    if sigma == tw.TWISTOR:
        gap = []
        for q in pts[: ctx.cfg.count(10)]:
            y2 = np.concatenate([q.u, -q.x])
            e1 = np.sort(np.linalg.eigvalsh(Q.k_frame(q.y).gram))
            e2 = np.sort(np.linalg.eigvalsh(Q.k_frame(y2).gram))
            gap.append(float(np.abs(e1 - e2).max()))
        ctx.upper(f"{prefix}.sheet_symmetry", "x -> -x exchanges the two sheets", gap, 1e-9)


@group("Z.nijenhuis", "twistor")
def _z_nijenhuis(ctx: Ctx):
    _space_checks(ctx, tw.TWISTOR, model(ctx.cfg.n), "Z", 100, 1e-6)


@group("R.nijenhuis", "reflector")
def _r_nijenhuis(ctx: Ctx):
    _space_checks(ctx, tw.REFLECTOR, model(ctx.cfg.n), "R", 100, 1e-6)


@group("Z.tensoriality", "twistor")
def _z_tensoriality(ctx: Ctx):
    Q = bd.QBundle(model(ctx.cfg.n))
    k = 4 * ctx.cfg.n + 4
    vals = []
    for _ in range(ctx.cfg.count(10)):
        q = hyper_point(ctx, tw.TWISTOR)
        vals.append(tw.tensoriality_gap(Q, q.y, ctx.rng.normal(size=k), ctx.rng.normal(size=k), ctx.rng))
    ctx.upper("Z.tensoriality", "N(fA, hB) = fh N(A, B)", vals, 1e-6)


@group("R.frobenius", "reflector")
def _r_frobenius(ctx: Ctx):
    Q = bd.QBundle(model(ctx.cfg.n), mutate_J=ctx.cfg.mutate_J)
    n = ctx.cfg.n
    dims, closed, out, mixed = [], [], [], []
    for _ in range(ctx.cfg.count(5)):
        q = hyper_point(ctx, tw.REFLECTOR)
        s = tw.frobenius_para(Q, q.y)
        dims.append(abs(s.dims[0] - (2 * n + 2)) + abs(s.dims[1] - (2 * n + 2)))
        closed.append(s.closed)
        out.append(s.out_of_k)
        mixed.append(s.mixed_eta)
    ctx.upper("R.eigen_dimensions", "+-1 eigenbundles of J of rank 2n+2", dims, 0.5)
    ctx.upper("R.frobenius", "[K_+1, K_+1] in K_+1", closed, 1e-6)
    ctx.upper("R.frobenius_in_K", "brackets of eigen-fields stay in K", out, 1e-6)
    ctx.lower("R.mixed_bracket_eta", "control: [K_+1, K_-1] leaves K", mixed, 1e-3)


# -- conformal change --------------------------------------------------------------------

@group("conf.structure", "conformal")
def _conf_structure(ctx: Ctx):
    cfg = ctx.cfg
    P, f = model(cfg.n), factor(cfg.n, cfg.f)
    Pb = conformal(cfg.n, cfg.f)
    ax, reeb, cone, alpha, spread, anti = [], [], [], [], [], []
    for _ in range(cfg.count(50)):
        u = base_point(ctx)
        r = pqc.axiom_residuals(Pb, u)
        ax.append(max(r["axiom_i"], r["axiom_ii"], r["axiom_iii"], r["metric_signature"]))
        reeb.append(vmax(pqc.solve_reeb(Pb, u).xi - Pb.reeb_fn(u)))
        cone.append(max(pqc.reeb_residuals(Pb, u)))
        alpha.append(vmax(Pb.alpha_fn(u) - pqc.connection_forms_from_coneforms(Pb)(u)))
        est = np.asarray(ad.value(pqc.inferred_scal(Pb, P, f, u, f.is_constant)))
        spread.append(float(est.max() - est.min()))
        xi = Pb.reeb_fn(u)
        de = pqc.d_eta(Pb, u)
        X = horizontal(P, u, ctx.rng)
        anti.append(max(abs(float((xi[j] @ de[k] + xi[k] @ de[j]) @ X)) for _, j, k in algebra.CYCLIC))
    ctx.upper("conf.axioms", "(eta/2f, I, g/2f) is a pqc structure", ax, 1e-9)
    ctx.upper("conf.reeb_formula", "xi_bar_s = 2f xi_s + I_s grad f", reeb, 1e-7)
    ctx.upper("conf.reeb_conditions", "Reeb conditions for the new structure", cone, 1e-8)
    ctx.upper("conf.alpha_formulas", "connection forms after a conformal change", alpha, 1e-7)
    ctx.upper("conf.scal_spread", "Scal recovered consistently from alpha_i(xi_i)", spread, 1e-7)
    ctx.upper("conf.coneform_antisymmetry", "d eta_k(xi_j, X) = -d eta_j(xi_k, X)", anti, 1e-9)


@group("conf.constant", "conformal")
def _conf_constant(ctx: Ctx):
    P = model(ctx.cfg.n)
    ident, const, group_ = [], [], []
    f = factor(ctx.cfg.n, ctx.cfg.f)
    for _ in range(ctx.cfg.count(20)):
        u = base_point(ctx)
        Ph = pqc.conformal_change(P, 0.5)
        ident.append(max(vmax(Ph.eta(u) - P.eta(u)), vmax(Ph.metric(u) - P.metric(u)),
                         vmax(Ph.reeb_fn(u) - pqc.reeb(P, u))))
        c = float(ctx.rng.uniform(0.3, 3.0) * ctx.rng.choice([-1, 1]))
        Pc = pqc.conformal_change(P, c)
        X = horizontal(P, u, ctx.rng)
        const.append(max(vmax(Pc.reeb_fn(u) - 2 * c * pqc.reeb(P, u)),
                         vmax((Pc.alpha_fn(u) - pqc.alpha_at(P, u)) @ X)))
        c2 = float(ctx.rng.uniform(0.3, 3.0))
        twice = pqc.conformal_change(conformal(ctx.cfg.n, ctx.cfg.f), c2)
        once = pqc.conformal_change(P, Polynomial(f.dim, 2 * c2 * f.constant,
                                                  tuple(2 * c2 * v for v in f.linear),
                                                  tuple((a, b, 2 * c2 * v) for a, b, v in f.quadratic)))
        group_.append(max(vmax(twice.metric(u) - once.metric(u)), vmax(twice.eta(u) - once.eta(u)),
                          vmax(twice.reeb_fn(u) - once.reeb_fn(u)),
                          vmax(twice.alpha_fn(u) - once.alpha_fn(u))))
    ctx.upper("conf.half_is_identity", "f = 1/2 leaves the structure unchanged", ident, 1e-12)
    ctx.upper("conf.constant_factor", "constant f: xi_bar = 2c xi, alpha_bar = alpha on H", const, 1e-12)
    ctx.upper("conf.composition", "successive rescalings compose", group_, 1e-7)


@group("conf.bundle", "conformal")
def _conf_bundle(ctx: Ctx):
    Q = bd.QBundle(conformal(ctx.cfg.n, ctx.cfg.f))
    _bundle_basics_on(ctx, Q, "conf", 50)
    _bundle_k_on(ctx, Q, "conf", 20)
    P = model(ctx.cfg.n)
    ph = [vmax(bd.phi_forms_opposite_sign(Q.local(y)) @ bd.lift(Q.local(y), horizontal(P, y[: P.dim], ctx.rng)))
          for y in (q_point(ctx) for _ in range(ctx.cfg.count(10)))]
    ctx.lower("conf.phi_opposite_sign_fails", "control: the other sign of phi misses the lifts", ph, 1e-3)
    lv = [max(levi_block_residuals(Q, base_point(ctx), ctx.rng.uniform(0.3, 2.0)))
          for _ in range(ctx.cfg.count(10))]
    ctx.upper("conf.levi_matrix", "Levi form lemma: matrices with h = Scal/16n(n+2)", lv, 1e-10)


@group("conf.lifts", "conformal")
def _conf_lifts(ctx: Ctx):
    cfg = ctx.cfg
    P, f = model(cfg.n), factor(cfg.n, cfg.f)
    C = bd.ConformalLifts(P, f)
    lift_, unscaled, reeb_, chi_, unit = [], [], [], [], []
    for _ in range(cfg.count(30)):
        y = q_point(ctx)
        u = y[: P.dim]
        X = horizontal(P, u, ctx.rng)
        Xh = np.asarray(ad.value(bd.lift(C.base.local(y), X)))
        direct = np.asarray(ad.value(C.bar_lift_direct(y, X)))
        lift_.append(vmax(C.bar_lift(y, X) - direct))
        unscaled.append(vmax((C.bar_lift_unscaled(y, X) - Xh) - f(u) * (direct - Xh)))
        reeb_.append(max(vmax(C.bar_reeb_lift(y, s) - C.bar_reeb_lift_direct(y, s)) for s in range(3)))
        assembled = C.bar_chi_assembled(y)
        chi_.append(vmax(C.bar_chi(y) - assembled))
        L = C.base.local(y)
        unit.append(vmax(C.bar_chi_unit_weight(y) + (2.0 * f(u) - 1.0) * bd.chi(L) - assembled))
    ctx.upper("conf.bar_lift", "lift of X in H after a conformal change", lift_, 1e-9)
    ctx.upper("conf.bar_lift_unscaled", "control: dropping 1/f scales the lift correction by f", unscaled, 1e-9)
    ctx.upper("conf.bar_reeb_lift", "lift of xi_bar_s after a conformal change", reeb_, 1e-9)
    ctx.upper("conf.bar_chi", "chi_bar = sum x_s xi_bar_s^(h bar)", chi_, 1e-7)
    ctx.upper("conf.bar_chi_unit_weight", "control: unit weight on chi misses chi_bar by (2f - 1) chi", unit, 1e-7)


@group("conf.invariance", "conformal")
def _conf_invariance(ctx: Ctx):
    cfg = ctx.cfg
    P, f = model(cfg.n), factor(cfg.n, cfg.f)
    ang, op, cang, cop = [], [], [], []
    for _ in range(cfg.count(50)):
        y = q_point(ctx)
        s = tw.conformal_invariance(P, f, y)
        ang.append(s.angle)
        op.append(s.operator)
    for _ in range(cfg.count(10)):
        y = q_point(ctx)
        s = tw.conformal_invariance(P, float(ctx.rng.uniform(0.3, 3.0)), y)
        cang.append(s.angle)
        cop.append(s.operator)
    ctx.upper("conf.K_invariance", "K does not depend on the choice of g", ang, 1e-6)
    ctx.upper("conf.J_invariance", "J does not depend on the choice of g", op, 1e-6)
    ctx.upper("conf.K_invariance_constant", "constant f: K unchanged", cang, 1e-12)
    ctx.upper("conf.J_invariance_constant", "constant f: J unchanged", cop, 1e-12)
    rang, rop, rh = [], [], []
    for _ in range(cfg.count(10)):
        S = algebra.random_so12(ctx.rng, 0.5)
        y = q_point(ctx)
        s = tw.rotation_invariance(P, S, y, float(ctx.rng.uniform(0.5, 2.0)))
        rang.append(s.angle)
        rop.append(s.operator)
        rh.append(s.horizontal_angle)
    ctx.upper("conf.rotation_K", "K unchanged under a constant SO(1,2) rotation", rang, 1e-9)
    ctx.upper("conf.rotation_J", "J unchanged under a constant SO(1,2) rotation", rop, 1e-9)
    ctx.upper("conf.rotation_lifts", "horizontal lifts unchanged under a constant rotation", rh, 1e-9)


@group("conf.twistor", "conformal")
def _conf_twistor(ctx: Ctx):
    P = conformal(ctx.cfg.n, ctx.cfg.f)
    _contact_checks(ctx, tw.TWISTOR, P, "conf.Z", 20)
    _space_checks(ctx, tw.TWISTOR, P, "conf.Z", 20, 1e-5)


@group("conf.reflector", "conformal")
def _conf_reflector(ctx: Ctx):
    P = conformal(ctx.cfg.n, ctx.cfg.f)
    _contact_checks(ctx, tw.REFLECTOR, P, "conf.R", 20)
    _space_checks(ctx, tw.REFLECTOR, P, "conf.R", 20, 1e-5)


# -- runner -----------------------------------------------------------------------------

def selected(cfg: SuiteConfig) -> list[Group]:
    return [g for g in REGISTRY if cfg.suite == "all" or cfg.suite in g.suites]


def run_group(group_id: str, cfg: SuiteConfig) -> list[Check]:
    g = next(g for g in REGISTRY if g.group_id == group_id)
    ctx = Ctx(cfg, group_rng(cfg.seed, group_id))
    t0 = time.perf_counter()
    try:
        g.fn(ctx)
    except Exception as exc:  # a crashing check is a failed check, not a crashed run
        ctx.out.append(Check(f"{group_id}.error", f"{type(exc).__name__}: {exc}", math.nan, 0.0))
    dt = (time.perf_counter() - t0) / max(1, len(ctx.out))
    return [replace(c, wall_time=dt) for c in ctx.out]


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_suite(cfg: SuiteConfig, workers: Optional[int] = None) -> VerificationReport:
    """Run every check group of ``cfg.suite``; the report order is the registry order."""
    groups = selected(cfg)
    workers = workers_from_env() if workers is None else workers
    if workers > 1 and len(groups) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(groups))) as pool:
            results = list(pool.map(run_group, [g.group_id for g in groups], [cfg] * len(groups)))
    else:
        results = [run_group(g.group_id, cfg) for g in groups]
    rep = VerificationReport()
    for checks in results:
        for c in checks:
            rep.add(c)
    return rep
