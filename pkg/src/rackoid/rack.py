"""Rack structures on bisections and the rack action on cotangent paths.

The action of a bisection only sees its image p(Σ) = (dβ_Σ, φ_1) in the
semidirect product Ω²_cl(M) ⋊ Diff(M), and the rack product of bisections is
the action of that image.  Both are implemented through :func:`aut_act`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as E
from .expr import Expr
from .kernel import (
    KForm, ManifoldSpec, SmoothMap, VectorField, compose, coord_names, coords, evaluate_at,
    exterior_d, identity_map, interior, pullback, sup_norm,
)
from .paths import DEFAULT_N, Bisection, CotangentPath, Isotopy, beta, d_beta

__all__ = [
    "CourantAutomorphism", "path_rack", "pullback_contract", "act", "rack", "aut_act",
    "augmentation", "beta_of_rack", "dbeta_conjugation", "homotopy_residual",
    "self_distributivity_residual", "rack_self_distributivity_residual",
    "compare_bisections", "compare_paths", "LATTICE_S", "LATTICE_T",
]

# fixed comparison lattice: 8 parameter values times the caller's sample points
LATTICE_S = np.linspace(0.0, 1.0, 8)
LATTICE_T = np.linspace(0.0, 1.0, 8)


def _contract_vec(v: tuple[Expr, ...], B: KForm) -> list[Expr]:
    """Components of i_v B for a 2-form B and vector components v."""
    n = B.dim
    return [E.add(*(v[a] * B.component((a, j)) for a in range(n) if a != j)) for j in range(n)]


@dataclass(frozen=True)
class CourantAutomorphism:
    """(B, f) in Ω²_cl ⋊ Diff with product (B, f)(C, h) = (B + f^*C, h∘f)."""

    B: KForm
    psi: SmoothMap

    @classmethod
    def identity(cls, dim: int) -> "CourantAutomorphism":
        return cls(KForm.zero(2, dim), identity_map(dim))

    def closedness_residual(self, pts, M) -> float:
        if self.B.dim < 3:
            return 0.0
        return sup_norm(evaluate_at(exterior_d(self.B).exprs(), pts, M))

    def compose(self, other: "CourantAutomorphism") -> "CourantAutomorphism":
        return CourantAutomorphism(self.B + pullback(self.psi, other.B), compose(other.psi, self.psi))

    def inverse(self) -> "CourantAutomorphism":
        finv = self.psi.inv()
        return CourantAutomorphism(-pullback(finv, self.B), finv)

    def conjugate(self, other: "CourantAutomorphism") -> "CourantAutomorphism":
        """self · other · self^{-1}."""
        return self.compose(other).compose(self.inverse())


def path_rack(psi: Isotopy, phi: Isotopy) -> Isotopy:
    """(ψ▷φ)_t = ψ_1^{-1} ∘ φ_t ∘ ψ_1 on isotopies (the parameter is ``s``)."""
    f = psi.phi1
    finv = f.inverse_comps()
    names = coord_names(psi.dim)
    comps = tuple(E.subst(c, dict(zip(names, phi.phi.at(f.comps)))) for c in finv)
    # (f^{-1} φ_1 f)^{-1} = f^{-1} φ_1^{-1} f
    phi1_inv = phi.inverse1 if phi.inverse1 is not None else phi.phi1.inverse_comps()
    comps1 = tuple(E.subst(c, dict(zip(names, f.comps))) for c in phi1_inv)
    inv1 = tuple(E.subst(c, dict(zip(names, comps1))) for c in finv)
    return Isotopy(SmoothMap(comps, True), inv1)


def pullback_contract(phi: Isotopy, C: KForm) -> KForm:
    """The 1-form φ_s^* i_{φ̇_s} C, i.e. j ↦ Σ φ̇^a C_ab(φ_s) ∂_jφ_s^b."""
    n = phi.dim
    names = coord_names(n)
    at = dict(zip(names, phi.phi.comps))
    vel = phi.velocity
    Cphi = KForm(2, n, {k: E.subst(c, at) for k, c in C.items()})
    ivC = _contract_vec(vel, Cphi)
    jac = phi.phi.jacobian()
    return KForm(1, n, {(j,): E.add(*(ivC[b] * jac[b][j] for b in range(n))) for j in range(n)})


def augmentation(sigma: Bisection, n: int = DEFAULT_N) -> CourantAutomorphism:
    """p(Σ) = (dβ_Σ, φ_1)."""
    phi1 = sigma.phi.phi1
    return CourantAutomorphism(d_beta(sigma, n), phi1)


def aut_act(g: CourantAutomorphism, sigma: Bisection) -> Bisection:
    """(B, f)·Σ = (f^{-1}φ_s f, f^*(η_s − i_{φ̇_s}(f^{-1})^*B)) in halfway form."""
    f = g.psi
    n = sigma.dim
    names = coord_names(n)
    phi = sigma.phi
    if _is_identity(phi) and all(c.is_zero() for c in sigma.eta.exprs()):
        return sigma  # unit law holds exactly
    finv = f.inverse_comps()
    # new isotopy f^{-1} ∘ φ_s ∘ f
    phif = phi.phi.at(f.comps)
    comps = tuple(E.subst(c, dict(zip(names, phif))) for c in finv)
    # (f^{-1} φ_1 f)^{-1} = f^{-1} φ_1^{-1} f; chaining the inverses avoids Newton on the composite
    phi1_inv = phi.inverse1 if phi.inverse1 is not None else phi.phi1.inverse_comps()
    tmp = tuple(E.subst(c, dict(zip(names, f.comps))) for c in phi1_inv)
    inv1 = tuple(E.subst(c, dict(zip(names, tmp))) for c in finv)
    C = pullback(f.inv(), g.B)
    corr = pullback_contract(phi, C)
    eta = pullback(f, sigma.eta - corr)
    return Bisection(Isotopy(SmoothMap(comps, True), inv1), eta)


def _is_identity(phi: Isotopy) -> bool:
    return all(c is x for c, x in zip(phi.phi.comps, coords(phi.dim)))


def rack(sigma: Bisection, tau: Bisection, n: int = DEFAULT_N) -> Bisection:
    """Σ▷𝒯 = p(Σ)·𝒯."""
    return aut_act(augmentation(sigma, n), tau)


def act(sigma: Bisection, a: CotangentPath, n: int = DEFAULT_N) -> CotangentPath:
    """Σ▷a = (φ_1^{-1}γ, φ_1^*(θ − i_{γ̇}(φ_1^{-1})^*dβ_Σ)).

    With q = φ_1^{-1}γ the covector part is J(q)^T θ − i_{q̇} dβ_Σ(q).
    """
    dim = a.dim
    names = coord_names(dim)
    f = sigma.phi.phi1
    if f.inverse is not None:
        q = tuple(E.subst(c, dict(zip(names, a.gamma))) for c in f.inverse)
    else:
        q = E.inverse_map(f.comps, names, a.gamma)
    at_q = dict(zip(names, q))
    jac = f.jacobian()
    JT_theta = [E.add(*(E.subst(jac[j][i], at_q) * a.theta[j] for j in range(dim))) for i in range(dim)]
    qdot = tuple(E.diff(c, "t") for c in q)
    dB = d_beta(sigma, n).subst(at_q)
    iq = _contract_vec(qdot, dB)
    return CotangentPath(q, tuple(u - v for u, v in zip(JT_theta, iq)))


def beta_of_rack(sigma: Bisection, tau: Bisection, n: int = DEFAULT_N) -> KForm:
    """φ_1^*β_𝒯 − φ_1^*∫ψ_s^* i_{ψ̇_s}(φ_1^{-1})^*dβ_Σ ds."""
    f = sigma.phi.phi1
    C = pullback(f.inv(), d_beta(sigma, n))
    integral = pullback_contract(tau.phi, C).quad("s", n)
    return pullback(f, beta(tau, n)) - pullback(f, integral)


def dbeta_conjugation(sigma: Bisection, tau: Bisection, n: int = DEFAULT_N) -> KForm:
    """φ_1^*dβ_𝒯 − φ_1^*ψ_1^*(φ_1^{-1})^*dβ_Σ + dβ_Σ."""
    f = sigma.phi.phi1
    dbs = d_beta(sigma, n)
    psi1 = tau.phi.phi1
    term = pullback(f, pullback(psi1, pullback(f.inv(), dbs)))
    return pullback(f, d_beta(tau, n)) - term + dbs


def homotopy_residual(psi: Isotopy, mu: KForm, pts: np.ndarray, M, n: int = DEFAULT_N) -> float:
    """sup |d∫ψ_s^* i_{ψ̇_s} dμ ds − (ψ_1^*dμ − dμ)| at ``pts``."""
    dmu = exterior_d(mu)
    lhs = exterior_d(pullback_contract(psi, dmu).quad("s", n))
    rhs = pullback(psi.phi1, dmu) - dmu
    a = evaluate_at(lhs.exprs(), pts, M)
    b = evaluate_at(rhs.exprs(), pts, M)
    return sup_norm([u - v for u, v in zip(a, b)])


def compare_paths(a: CotangentPath, b: CotangentPath, ts=LATTICE_T, extra=None) -> float:
    """Sup over sampled t of base distance plus covector distance."""
    ga, ta = a.sample(ts, extra)
    gb, tb = b.sample(ts, extra)
    return float(np.max(np.max(np.abs(ga - gb), axis=-1) + np.max(np.abs(ta - tb), axis=-1)))


def self_distributivity_residual(sigma: Bisection, tau: Bisection, a: CotangentPath,
                                 n: int = DEFAULT_N, ts=LATTICE_T) -> float:
    """Σ▷(𝒯▷a) versus (Σ▷𝒯)▷(Σ▷a)."""
    lhs = act(sigma, act(tau, a, n), n)
    rhs = act(rack(sigma, tau, n), act(sigma, a, n), n)
    return compare_paths(lhs, rhs, ts)


def compare_bisections(s1: Bisection, s2: Bisection, pts: np.ndarray, M,
                       ss=LATTICE_S) -> float:
    """Sup over the (s, point) lattice of |φ_s − φ'_s| + |η̃_s − η̃'_s|."""
    x = pts[None, :, :]
    extra = {"s": np.asarray(ss)[:, None]}
    a = np.stack(evaluate_at(list(s1.phi.phi.comps) + s1.eta.exprs(), x, M, extra), axis=-1)
    b = np.stack(evaluate_at(list(s2.phi.phi.comps) + s2.eta.exprs(), x, M, extra), axis=-1)
    d = s1.dim
    return float(np.max(np.max(np.abs(a[..., :d] - b[..., :d]), axis=-1)
                        + np.max(np.abs(a[..., d:] - b[..., d:]), axis=-1)))


def rack_self_distributivity_residual(s: Bisection, t: Bisection, u: Bisection, pts, M,
                                      n: int = DEFAULT_N) -> float:
    """Σ▷(𝒯▷𝒰) versus (Σ▷𝒯)▷(Σ▷𝒰) on the comparison lattice."""
    lhs = rack(s, rack(t, u, n), n)
    rhs = rack(rack(s, t, n), rack(s, u, n), n)
    return compare_bisections(lhs, rhs, pts, M)
