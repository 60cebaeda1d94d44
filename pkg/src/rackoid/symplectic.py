"""The symplectic structure on cotangent paths and Dirac substructures.

Conventions
-----------
* π♯ is (π♯α)^i = Σ_j π^{ij} α_j.
* For a 2-form ω, ♭(v) = i_v ω, so (♭v)_j = Σ_a v^a ω_{aj}.
* The canonical form on T*M is ω((δx, δp), (δx', δp')) = ⟨δp, δx'⟩ − ⟨δp', δx⟩,
  and the path-space form integrates it over path time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as E
from .expr import Expr
from .kernel import (
    KForm, SmoothMap, VectorField, coord_names, evaluate_at, exterior_d, interior, one_form,
    pullback, pushforward, sup_norm, _indices,
)
from .leibniz import CourantSection, aggregates, bracket, dorfman
from .paths import DEFAULT_N, Bisection, CotangentPath, GeneralizedSection, Isotopy, beta, d_beta
from .rack import act, beta_of_rack, dbeta_conjugation, pullback_contract, rack

__all__ = [
    "PathTangent", "DiracStructure", "c_functional", "lambda_Y", "omega_Y", "omega_equals_dlambda_residual",
    "bisection_as_path", "pullback_lambda_residual", "equivariance_residuals", "sharp", "flat",
    "dirac_membership", "membership_exprs", "dirac_isotropy_residual", "dirac_involutivity_residual",
    "dirac_frame", "frame_rank", "AD_closure_residual", "quotient_into_D_residual", "bisection_transform",
    "D_preservation_residual", "symplectic_bisection", "isotropic_subrack_residual", "fiberwise_sum",
]


@dataclass(frozen=True)
class PathTangent:
    """(δγ_t, δθ_t) along a cotangent path, closed form in ``t``."""

    delta_gamma: tuple[Expr, ...]
    delta_theta: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "delta_gamma", tuple(E.as_expr(c) for c in self.delta_gamma))
        object.__setattr__(self, "delta_theta", tuple(E.as_expr(c) for c in self.delta_theta))


def _value(e: Expr, extra=None):
    env = dict(extra or {})
    return E.evaluate(e, env)


def c_functional(a: CotangentPath, n: int = DEFAULT_N, extra=None):
    """c(a) = ∫ θ_t(γ̇_t) dt."""
    pairing = E.add(*(th * gd for th, gd in zip(a.theta, a.gamma_dot)))
    return _value(E.quad(pairing, "t", n), extra)


def lambda_Y(a: CotangentPath, v: PathTangent, n: int = DEFAULT_N, extra=None):
    """λ(δγ) = ∫ θ_t(δγ_t) dt."""
    if len(v.delta_gamma) != a.dim:
        raise ValueError("tangent is not attached along this path")
    pairing = E.add(*(th * dg for th, dg in zip(a.theta, v.delta_gamma)))
    return _value(E.quad(pairing, "t", n), extra)


def omega_Y(a: CotangentPath, v: PathTangent, w: PathTangent, n: int = DEFAULT_N, extra=None):
    """∫ ⟨δθ, δγ'⟩ − ⟨δθ', δγ⟩ dt."""
    if len(v.delta_gamma) != a.dim or len(w.delta_gamma) != a.dim:
        raise ValueError("tangent is not attached along this path")
    integrand = E.add(*(p * x for p, x in zip(v.delta_theta, w.delta_gamma))) - \
        E.add(*(p * x for p, x in zip(w.delta_theta, v.delta_gamma)))
    return _value(E.quad(integrand, "t", n), extra)


def omega_equals_dlambda_residual(family: CotangentPath, n: int = DEFAULT_N, h: float = 1e-4,
                                  at=(0.3, 0.6)) -> float:
    """Compare ω with a finite-difference dλ on a family a(u, v) (variables ``u``, ``v``).

    dλ(∂_u, ∂_v) = ∂_u λ(∂_v a) − ∂_v λ(∂_u a), each outer derivative by central differences.
    """
    def tangent(var):
        return PathTangent(tuple(E.diff(g, var) for g in family.gamma),
                           tuple(E.diff(g, var) for g in family.theta))

    tu, tv = tangent("u"), tangent("v")
    u0, v0 = at
    lam_v = lambda u, v: float(lambda_Y(family, tv, n, {"u": u, "v": v}))
    lam_u = lambda u, v: float(lambda_Y(family, tu, n, {"u": u, "v": v}))
    fd = (lam_v(u0 + h, v0) - lam_v(u0 - h, v0)) / (2 * h) - (lam_u(u0, v0 + h) - lam_u(u0, v0 - h)) / (2 * h)
    om = float(omega_Y(family, tu, tv, n, {"u": u0, "v": v0}))
    return abs(fd - om)


def bisection_as_path(sigma: Bisection) -> CotangentPath:
    """Σ(m) as a cotangent path in ``t``: (φ_t(m), η_{t,m}) with raw covectors."""
    raw = sigma.raw_eta()
    mp = {"s": E.var("t")}
    return CotangentPath(tuple(E.subst(c, mp) for c in sigma.phi.phi.comps),
                         tuple(E.subst(c, mp) for c in raw))


def pullback_lambda_residual(sigma: Bisection, pts, M, n: int = DEFAULT_N) -> tuple[float, float]:
    """(s_Σ^{-1})^*λ − β_Σ and (t_Σ^{-1})^*λ − (φ_1^{-1})^*β_Σ at ``pts``.

    λ is evaluated on the image tangents TΣ(∂_i) of the coordinate directions.
    """
    dim = sigma.dim
    names = coord_names(dim)
    path = bisection_as_path(sigma)
    lam = []
    for i in range(dim):
        tang = PathTangent(tuple(E.diff(g, names[i]) for g in path.gamma), (E.ZERO,) * dim)
        pairing = E.add(*(th * dg for th, dg in zip(path.theta, tang.delta_gamma)))
        lam.append(E.quad(pairing, "t", n))
    b = beta(sigma, n)
    r1 = sup_norm([u - v for u, v in zip(evaluate_at(lam, pts, M), evaluate_at(b.exprs(), pts, M))])
    # target side: at m' = φ_1(m) the pulled-back form is λ∘TΣ∘Tφ_1^{-1}
    f = sigma.phi.phi1
    finv = f.inv()
    lam_form = pullback(finv, one_form(lam, dim))
    ref = pullback(finv, b)
    r2 = sup_norm([u - v for u, v in zip(evaluate_at(lam_form.exprs(), pts, M),
                                         evaluate_at(ref.exprs(), pts, M))])
    return r1, r2


def equivariance_residuals(sigma: Bisection, tau: Bisection, a: CotangentPath, pts, M,
                           n: int = DEFAULT_N) -> tuple[float, float, float]:
    """(c(a) − c(Σ▷a), β-law, dβ-law)."""
    ra = abs(float(c_functional(a, n)) - float(c_functional(act(sigma, a, n), n)))
    prod = rack(sigma, tau, n)

    def diff(A, B):
        return sup_norm([u - v for u, v in zip(evaluate_at(A.exprs(), pts, M), evaluate_at(B.exprs(), pts, M))])

    rb = diff(beta_of_rack(sigma, tau, n), beta(prod, n))
    rc = diff(dbeta_conjugation(sigma, tau, n), d_beta(prod, n))
    return ra, rb, rc


def isotropic_subrack_residual(sigma: Bisection, tau: Bisection, pts, M, n: int = DEFAULT_N,
                               pre_tol: float = 1e-9) -> float:
    """dβ of Σ▷𝒯 for isotropic inputs (raises if the inputs are not isotropic)."""
    for b in (sigma, tau):
        if sup_norm(evaluate_at(d_beta(b, n).exprs(), pts, M)) > pre_tol:
            raise ValueError("input bisection is not isotropic")
    return sup_norm(evaluate_at(d_beta(rack(sigma, tau, n), n).exprs(), pts, M))


def fiberwise_sum(sigma: Bisection, tau: Bisection) -> Bisection:
    """Groupoid product of bisections of T*M with fiberwise addition (both with φ = id)."""
    return Bisection(sigma.phi, sigma.eta + tau.eta)


# ---------------------------------------------------------------------------
# Dirac structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiracStructure:
    """Graph of a Poisson bivector (``pi``) or of a closed 2-form (``B``)."""

    kind: str
    dim: int
    pi: tuple[tuple[Expr, ...], ...] | None = None
    B: KForm | None = None

    @classmethod
    def poisson(cls, pi: Sequence[Sequence], check_points=None, M=None) -> "DiracStructure":
        rows = tuple(tuple(E.as_expr(c) for c in row) for row in pi)
        dim = len(rows)
        D = cls("poisson", dim, pi=rows)
        if check_points is not None:
            if D.antisymmetry_residual(check_points, M) > 1e-12:
                raise ValueError("bivector matrix is not antisymmetric")
            if dim > 2 and D.jacobi_residual(check_points, M) > 1e-9:
                raise ValueError("bivector fails the Jacobi identity")
        return D

    @classmethod
    def two_form(cls, B: KForm, check_points=None, M=None, check: bool = True) -> "DiracStructure":
        D = cls("twoform", B.dim, B=B)
        if check and check_points is not None and B.dim > 2:
            if sup_norm(evaluate_at(exterior_d(B).exprs(), check_points, M)) > 1e-9:
                raise ValueError("2-form is not closed")
        return D

    @classmethod
    def from_function(cls, f, dim: int = 2) -> "DiracStructure":
        """π = f ∂_0∧∂_1 in two dimensions."""
        f = E.as_expr(f)
        return cls.poisson([[E.ZERO, f], [-f, E.ZERO]])

    def antisymmetry_residual(self, pts, M) -> float:
        n = self.dim
        exprs = [self.pi[i][j] + self.pi[j][i] for i in range(n) for j in range(n)]
        return sup_norm(evaluate_at(exprs, pts, M))

    def jacobi_residual(self, pts, M) -> float:
        n = self.dim
        names = coord_names(n)
        P = self.pi
        exprs = []
        for i, j, k in itertools.combinations(range(n), 3):
            exprs.append(E.add(*(P[i][l] * E.diff(P[j][k], names[l]) + P[j][l] * E.diff(P[k][i], names[l])
                                 + P[k][l] * E.diff(P[i][j], names[l]) for l in range(n))))
        return sup_norm(evaluate_at(exprs, pts, M)) if exprs else 0.0


def sharp(pi, alpha: Sequence[Expr]) -> tuple[Expr, ...]:
    """(π♯α)^i = Σ_j π^{ij} α_j."""
    n = len(alpha)
    return tuple(E.add(*(pi[i][j] * alpha[j] for j in range(n))) for i in range(n))


def flat(omega: KForm, v: Sequence[Expr]) -> tuple[Expr, ...]:
    """♭(v) = i_v ω."""
    return tuple(interior(VectorField(tuple(v)), omega).coeffs[(j,)] for j in range(omega.dim))


def membership_exprs(D: DiracStructure, v: Sequence[Expr], alpha: Sequence[Expr]) -> list[Expr]:
    """Componentwise defect of (v, α) from D."""
    if D.kind == "poisson":
        return [a - b for a, b in zip(v, sharp(D.pi, alpha))]
    return [a - b for a, b in zip(alpha, flat(D.B, v))]


def dirac_membership(D: DiracStructure, pts, v, alpha, M=None, extra=None) -> float:
    """|v − π♯α| or |α − i_v B|; numeric (arrays) or symbolic (Expr) inputs."""
    v = tuple(E.as_expr(c) if not isinstance(c, np.ndarray) else c for c in v)
    if all(isinstance(c, Expr) for c in v) and all(isinstance(c, Expr) for c in alpha):
        return sup_norm(evaluate_at(membership_exprs(D, v, alpha), pts, M or D.dim, extra))
    # numeric vectors at the points
    pts = np.asarray(pts, dtype=float)
    v = np.asarray([np.broadcast_to(c, pts.shape[:-1]) for c in v])
    alpha = np.asarray([np.broadcast_to(c, pts.shape[:-1]) for c in alpha])
    n = D.dim
    if D.kind == "poisson":
        P = np.asarray(evaluate_at([D.pi[i][j] for i in range(n) for j in range(n)], pts, n, extra))
        P = P.reshape((n, n) + P.shape[1:])
        return sup_norm(v - np.einsum("ij...,j...->i...", P, alpha))
    B = D.B
    Bm = np.asarray(evaluate_at([B.component((a, j)) for a in range(n) for j in range(n)], pts, n, extra))
    Bm = Bm.reshape((n, n) + Bm.shape[1:])
    return sup_norm(alpha - np.einsum("a...,aj...->j...", v, Bm))


def dirac_frame(D: DiracStructure) -> list[CourantSection]:
    """{(π♯dx_j, dx_j)} or {(∂_j, i_{∂_j}B)}."""
    n = D.dim
    frame = []
    for j in range(n):
        e = tuple(E.ONE if i == j else E.ZERO for i in range(n))
        if D.kind == "poisson":
            frame.append(CourantSection(VectorField(sharp(D.pi, e)), one_form(e, n)))
        else:
            frame.append(CourantSection(VectorField(e), one_form(flat(D.B, e), n)))
    return frame


def frame_rank(D: DiracStructure, pts, M) -> int:
    """Minimal rank of the 2n x n frame matrix over ``pts``."""
    fr = dirac_frame(D)
    n = D.dim
    cols = [np.stack(evaluate_at(sec.exprs(), pts, M), axis=-1) for sec in fr]
    mat = np.stack(cols, axis=-1)  # (npts, 2n, n)
    return int(min(np.linalg.matrix_rank(m) for m in mat))


def dirac_isotropy_residual(D: DiracStructure, pts, M) -> float:
    fr = dirac_frame(D)
    exprs = []
    for a in fr:
        for b in fr:
            exprs.append(E.add(*(al * vb for al, vb in zip(a.alpha.exprs(), b.X.comps)))
                         + E.add(*(bl * va for bl, va in zip(b.alpha.exprs(), a.X.comps))))
    return sup_norm(evaluate_at(exprs, pts, M))


def _random_section(D: DiracStructure, coeffs: Sequence[Expr]) -> CourantSection:
    fr = dirac_frame(D)
    X = VectorField.zero(D.dim)
    a = KForm.zero(1, D.dim)
    for f, sec in zip(coeffs, fr):
        X = X + sec.X.scale(f)
        a = a + sec.alpha.scale(f)
    return CourantSection(X, a)


def dirac_involutivity_residual(D: DiracStructure, pts, M, coeffs=None) -> float:
    """Membership defect of Dorfman brackets of frame sections.

    With ``coeffs`` (two lists of functions) the sections are Σ f_j ξ_j instead.
    """
    if coeffs is None:
        secs = dirac_frame(D)
    else:
        secs = [_random_section(D, c) for c in coeffs]
    worst = 0.0
    for a in secs:
        for b in secs:
            br = dorfman(a, b)
            worst = max(worst, dirac_membership(D, pts, br.X.comps, br.alpha.exprs(), M))
    return worst


def AD_closure_residual(D: DiracStructure, x: GeneralizedSection, y: GeneralizedSection, pts, M, ts,
                        n: int = DEFAULT_N, pre_tol: float = 1e-8) -> float:
    """Membership of (d/dt field part, form part) of [x, y] in D on the lattice."""
    extra = {"t": np.asarray(ts)[:, None]}
    P = pts[None, :, :]
    for s in (x, y):
        if dirac_membership(D, P, s.X.diff("t").comps, s.alpha.exprs(), M, extra) > pre_tol:
            raise ValueError("input is not a section of A(D)")
    br = bracket(x, y, n)
    return dirac_membership(D, P, br.X.diff("t").comps, br.alpha.exprs(), M, extra)


def quotient_into_D_residual(D: DiracStructure, x: GeneralizedSection, pts, M, n: int = DEFAULT_N) -> float:
    q = aggregates(x, n)
    return dirac_membership(D, pts, q.X.comps, q.alpha.exprs(), M)


def bisection_transform(phi1: SmoothMap, B: KForm, xi: CourantSection) -> CourantSection:
    """((φ_1^{-1})_*X, φ_1^*α − i_{(φ_1^{-1})_*X} B)."""
    Xn = pushforward(phi1.inv(), xi.X)
    return CourantSection(Xn, pullback(phi1, xi.alpha) - interior(Xn, B))


def D_preservation_residual(D: DiracStructure, sigma: Bisection, pts, M, n: int = DEFAULT_N) -> float:
    f = sigma.phi.phi1
    B = d_beta(sigma, n)
    worst = 0.0
    for sec in dirac_frame(D):
        out = bisection_transform(f, B, sec)
        worst = max(worst, dirac_membership(D, pts, out.X.comps, out.alpha.exprs(), M))
    return worst


def symplectic_bisection(phi: Isotopy, omega0: KForm) -> Bisection:
    """Bisection of Y_D for D = graph(ω₀): raw η_s = ♭(∂_sφ_s), i.e. η̃_s = φ_s^* i_{φ̇_s} ω₀."""
    return Bisection(phi, pullback_contract(phi, omega0))
