"""Congruence of bisections and integration of Poisson-graph Dirac structures.

A family of bisections Σ_ε uses the variable ``e`` for ε.  Two worked
integrable cases are supported: π = 0 (groupoid T*M with fiberwise addition)
and a constant symplectic form on a chart of ℝ² (pair groupoid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as E
from .expr import Expr
from .kernel import (
    KForm, SmoothMap, VectorField, coord_names, coords, evaluate_at, exterior_d, invert, one_form,
    sup_norm,
)
from .leibniz import ideal_residual
from .paths import DEFAULT_N, Bisection, CotangentPath, GeneralizedSection, Isotopy, beta, d_beta, flow
from .rack import act, compare_bisections, pullback_contract, rack, _contract_vec
from .symplectic import DiracStructure, PathTangent, flat, omega_Y, sharp

__all__ = [
    "BisectionFamily", "GroupoidElement", "check_omega_family", "family_defect", "including_family",
    "admissible_tangent", "formulation_a", "formulation_gap",
    "tangent_cone_residual", "cone_map", "split_section", "split_section_residual",
    "congruence_invariance_residual", "rest_to_show_residual", "dbeta_constancy_residual",
    "rigidity_residual", "apath_residual", "apath_from_covector", "integrate_zero_poisson",
    "integrate_symplectic", "omega_D", "reduction_form_residual", "rack_descends_residual",
    "relation_b_vs_c_residual", "FAMILY_VAR", "default_cutoff", "PreconditionError",
]

FAMILY_VAR = "e"


class PreconditionError(ValueError):
    """Input violates the stated precondition (membership, admissibility, cutoff)."""


@dataclass(frozen=True)
class BisectionFamily:
    """Σ_ε, closed form in the family variable ``e``."""

    member: Bisection

    def at(self, eps: float) -> Bisection:
        m = {FAMILY_VAR: E.const(eps)}
        phi = self.member.phi
        return Bisection(phi.subst(m), self.member.eta.subst(m))

    @property
    def dim(self) -> int:
        return self.member.dim

    def endpoint_residual(self, pts, M, eps=(0.0, 0.25, 0.5, 0.75, 1.0)) -> float:
        """Variation of φ_1 across ε."""
        phi1 = self.member.phi.at(1.0).comps
        ev = np.asarray(evaluate_at(list(phi1), pts[None], M, {FAMILY_VAR: np.asarray(eps)[:, None]}))
        return float(np.max(np.abs(ev - ev[:, :1])))


@dataclass(frozen=True)
class GroupoidElement:
    kind: str  # "pair" or "cotangent"
    source: np.ndarray
    target: np.ndarray | None = None
    covector: np.ndarray | None = None


# ---------------------------------------------------------------------------
# congruence relation
# ---------------------------------------------------------------------------

def check_omega_family(F: BisectionFamily, n: int = DEFAULT_N) -> KForm:
    """m ↦ ω_Y(∂_εΣ_ε(m), TΣ_ε(∂_i)), still depending on ``e``.

    With raw covectors η this is ∫ ∂_εη·∂_iφ − ∂_iη·∂_εφ ds.
    """
    sig = F.member
    dim = sig.dim
    names = coord_names(dim)
    raw = sig.raw_eta()
    phi = sig.phi.phi.comps
    de_eta = [E.diff(c, FAMILY_VAR) for c in raw]
    de_phi = [E.diff(c, FAMILY_VAR) for c in phi]
    out = {}
    for i in range(dim):
        di_phi = [E.diff(c, names[i]) for c in phi]
        di_eta = [E.diff(c, names[i]) for c in raw]
        integrand = E.add(*(a * b for a, b in zip(de_eta, di_phi))) - E.add(*(a * b for a, b in zip(di_eta, de_phi)))
        out[(i,)] = E.quad(integrand, "s", n)
    return KForm(1, dim, out)


def formulation_a(F: BisectionFamily, n: int = DEFAULT_N) -> KForm:
    """∂_εβ_{Σ_ε} − d b with b = λ(∂_εΣ) = ∫ η(∂_εφ) ds."""
    sig = F.member
    raw = sig.raw_eta()
    de_phi = [E.diff(c, FAMILY_VAR) for c in sig.phi.phi.comps]
    b = E.quad(E.add(*(a * v for a, v in zip(raw, de_phi))), "s", n)
    from .kernel import zero_form
    return beta(sig, n).diff(FAMILY_VAR) - exterior_d(zero_form(b, sig.dim))


def _sample_forms(forms: Sequence[KForm], pts, M, eps) -> list[np.ndarray]:
    extra = {FAMILY_VAR: np.asarray(eps, dtype=float)[:, None]}
    return [np.asarray(evaluate_at(f.exprs(), pts[None], M, extra)) for f in forms]


def formulation_gap(F: BisectionFamily, pts, M, eps=(0.0, 0.25, 0.5, 0.75, 1.0), n: int = DEFAULT_N) -> float:
    """Sup difference between formulations (a) and (b) on the (ε, point) lattice."""
    a, b = _sample_forms([formulation_a(F, n), check_omega_family(F, n)], pts, M, eps)
    return float(np.max(np.abs(a - b)))


def family_defect(F: BisectionFamily, pts, M, eps=(0.0, 0.25, 0.5, 0.75, 1.0), n: int = DEFAULT_N) -> float:
    (b,) = _sample_forms([check_omega_family(F, n)], pts, M, eps)
    return float(np.max(np.abs(b)))


def dbeta_constancy_residual(F: BisectionFamily, pts, M, eps=(0.25, 0.5, 0.75, 1.0), n: int = DEFAULT_N) -> float:
    """|dβ_{Σ_ε} − dβ_{Σ_0}| for the listed ε."""
    (vals,) = _sample_forms([d_beta(F.member, n)], pts, M, (0.0,) + tuple(eps))
    return float(np.max(np.abs(vals[:, 1:] - vals[:, :1])))


def rigidity_residual(F: BisectionFamily, tau: Bisection, pts, M, eps=(0.5, 1.0), n: int = DEFAULT_N) -> float:
    """rack(Σ_ε, 𝒯) versus rack(Σ_0, 𝒯)."""
    ref = rack(F.at(0.0), tau, n)
    return max(compare_bisections(rack(F.at(e), tau, n), ref, pts, M) for e in eps)


def rest_to_show_residual(F: BisectionFamily, tau: Bisection, pts, M, eps=(0.0, 0.3, 0.7, 1.0),
                          n: int = DEFAULT_N) -> float:
    """∫∂_ε(φ^* i_{∂_sφ} C) ds − d∫ i_{∂_εφ} i_{∂_sφ} C ds with C = (ψ_1^{-1})^*dβ_𝒯."""
    from .kernel import pullback, zero_form
    psi1 = tau.phi.phi1
    C = pullback(psi1.inv(), d_beta(tau, n))
    phi = F.member.phi
    lhs = pullback_contract(phi, C).diff(FAMILY_VAR).quad("s", n)
    names = coord_names(F.dim)
    Cphi = C.subst(dict(zip(names, phi.phi.comps)))
    vel = phi.velocity
    de = [E.diff(c, FAMILY_VAR) for c in phi.phi.comps]
    ivC = _contract_vec(vel, Cphi)  # i_{∂_sφ} C
    scalar = E.add(*(a * b for a, b in zip(ivC, de)))  # (i_{∂_sφ}C)(∂_εφ)
    rhs = exterior_d(zero_form(E.quad(scalar, "s", n), F.dim))
    a, b = _sample_forms([lhs, rhs], pts, M, eps)
    return float(np.max(np.abs(a - b)))


def congruence_invariance_residual(tau: Bisection, F: BisectionFamily, pts, M,
                                   eps=(0.0, 0.5, 1.0), n: int = DEFAULT_N) -> tuple[float, float]:
    """(defect of the transported family 𝒯▷Σ_ε, rest_to_show residual)."""
    moved = BisectionFamily(rack(tau, F.member, n))
    return family_defect(moved, pts, M, eps, n), rest_to_show_residual(F, tau, pts, M, eps, n)


# ---------------------------------------------------------------------------
# tangent cone and split section
# ---------------------------------------------------------------------------

def tangent_cone_residual(delta: GeneralizedSection, pts, M, n: int = DEFAULT_N) -> float:
    """|X_1| + |∫α| for a tangent (X_s, α_s) at (id, 0) written in ``t``."""
    return ideal_residual(delta, pts, M, n)


def default_cutoff(var: str = "s") -> Expr:
    """χ(s) = 1 − cos 2πs: vanishes with its derivative at both ends, ∫χ = 1."""
    return 1 - E.cos(2 * math.pi * E.var(var))


def split_section(alpha: KForm, sigma: Bisection, chi: Expr | None = None, n: int = DEFAULT_N,
                  check: bool = True) -> tuple[tuple[Expr, ...], KForm]:
    """Pure η-direction tangent (δφ, δη̃) with δη̃_s = χ(s) α.

    In raw terms δη_s at φ_s(m) is χ ⟨α_m, Tφ_s^{-1}(·)⟩, whose halfway pullback is χα.
    """
    chi = default_cutoff() if chi is None else E.as_expr(chi)
    if check:
        total = float(E.evaluate(E.quad(chi, "s", n), {}))
        ends = E.evaluate([chi], {"s": np.array([0.0, 1.0])})[0]
        if abs(total - 1.0) > 1e-12 or np.max(np.abs(ends)) > 1e-12:
            raise PreconditionError("cutoff must integrate to 1 and vanish at s = 0, 1")
    dphi = (E.ZERO,) * sigma.dim
    return dphi, alpha.scale(chi)


def cone_map(sigma: Bisection, dphi: Sequence[Expr], deta: KForm, n: int = DEFAULT_N) -> KForm:
    """Tβ(δΣ) − d⟨λ, δΣ⟩ = ∫δη̃ ds − d∫ η(δφ) ds."""
    from .kernel import zero_form
    raw = sigma.raw_eta()
    lam = E.quad(E.add(*(a * v for a, v in zip(raw, dphi))), "s", n)
    return deta.quad("s", n) - exterior_d(zero_form(lam, sigma.dim))


def split_section_residual(alpha: KForm, sigma: Bisection, pts, M, chi=None, n: int = DEFAULT_N) -> float:
    dphi, deta = split_section(alpha, sigma, chi, n)
    out = cone_map(sigma, dphi, deta, n)
    return sup_norm([u - v for u, v in zip(evaluate_at(out.exprs(), pts, M), evaluate_at(alpha.exprs(), pts, M))])


# ---------------------------------------------------------------------------
# A-paths and integration maps
# ---------------------------------------------------------------------------

def apath_residual(D: DiracStructure, a: CotangentPath, ts=None, extra=None) -> float:
    """sup_t |γ̇_t − π♯(θ_t)|."""
    if D.kind != "poisson":
        raise ValueError("A-path residual needs a Poisson-graph Dirac structure")
    ts = np.linspace(0.0, 1.0, 33) if ts is None else np.asarray(ts)
    names = coord_names(D.dim)
    at = dict(zip(names, a.gamma))
    pi = [[E.subst(c, at) for c in row] for row in D.pi]
    defect = [g - s for g, s in zip(a.gamma_dot, sharp(pi, a.theta))]
    env = {"t": ts}
    if extra:
        env.update(extra)
    return sup_norm(E.evaluate(defect, env))


def apath_from_covector(D: DiracStructure, m0: Sequence[float], theta: Sequence[Expr],
                        steps: int = DEFAULT_N) -> CotangentPath:
    """Solve γ̇ = π♯(θ_t) from γ(0) = m0 with symbolic RK4; θ depends on ``t`` only."""
    V = VectorField(sharp(D.pi, tuple(E.as_expr(c) for c in theta)))
    iso = flow(V, steps, time_var="t")
    names = coord_names(D.dim)
    mp = {k: E.const(v) for k, v in zip(names, m0)}
    mp["s"] = E.var("t")
    gamma = tuple(E.subst(c, mp) for c in iso.phi.comps)
    return CotangentPath(gamma, tuple(E.as_expr(c) for c in theta))


def integrate_zero_poisson(a: CotangentPath, n: int = DEFAULT_N, tol: float = 1e-12) -> GroupoidElement:
    """(γ(0), ∫θ) for an A-path of π = 0."""
    D0 = DiracStructure.poisson([[E.ZERO] * a.dim for _ in range(a.dim)])
    if apath_residual(D0, a) > tol:
        raise PreconditionError("path is not an A-path of the zero Poisson structure")
    g0 = np.array([float(v) for v in E.evaluate(list(a.gamma), {"t": 0.0})])
    cov = np.array([float(v) for v in E.evaluate([E.quad(c, "t", n) for c in a.theta], {})])
    return GroupoidElement("cotangent", g0, covector=cov)


def integrate_symplectic(D: DiracStructure, a: CotangentPath, tol: float = 1e-6) -> GroupoidElement:
    """(γ(0), γ(1)) in the pair groupoid."""
    if apath_residual(D, a) > tol:
        raise PreconditionError("path is not an A-path")
    ends = np.asarray(E.evaluate(list(a.gamma), {"t": np.array([0.0, 1.0])}))
    return GroupoidElement("pair", ends[:, 0], target=ends[:, 1])


def omega_D(omega0: KForm, v: tuple[np.ndarray, np.ndarray], w: tuple[np.ndarray, np.ndarray]) -> float:
    """(t^*ω₀ − s^*ω₀)(v, w) for pair-groupoid tangents v = (δsource, δtarget)."""
    n = omega0.dim
    W = np.array([[float(E.evaluate(omega0.component((a, b)), {})) if a != b else 0.0 for b in range(n)]
                  for a in range(n)])
    return float(v[1] @ W @ w[1] - v[0] @ W @ w[0])


def admissible_tangent(omega0: KForm, delta_gamma: Sequence[Expr]) -> PathTangent:
    """Linearized A-path tangent: δθ = ♭(δγ̇)."""
    dgd = tuple(E.diff(E.as_expr(c), "t") for c in delta_gamma)
    return PathTangent(tuple(delta_gamma), flat(omega0, dgd))


def _fd_TI(D, a: CotangentPath, v: PathTangent, h: float):
    """Endpoint map differential by central differences on a ± h v."""
    def moved(sign):
        return CotangentPath(tuple(g + sign * h * d for g, d in zip(a.gamma, v.delta_gamma)),
                             tuple(g + sign * h * d for g, d in zip(a.theta, v.delta_theta)))
    p, m = integrate_symplectic(D, moved(1.0), tol=1e-3), integrate_symplectic(D, moved(-1.0), tol=1e-3)
    return (p.source - m.source) / (2 * h), (p.target - m.target) / (2 * h)


def reduction_form_residual(omega0: KForm, D: DiracStructure, a: CotangentPath, v: PathTangent,
                            w: PathTangent, n: int = DEFAULT_N, h: float = 1e-4,
                            constraint_tol: float = 1e-6) -> float:
    """|ω_D(TI v, TI w) − ω_Y(a; v, w)| with TI by finite differences."""
    for tan in (v, w):
        dgd = tuple(E.diff(c, "t") for c in tan.delta_gamma)
        defect = [g - s for g, s in zip(dgd, sharp(D.pi, tan.delta_theta))]
        if sup_norm(E.evaluate(defect, {"t": np.linspace(0, 1, 17)})) > constraint_tol:
            raise PreconditionError("tangent violates the linearized A-path constraint")
    lhs = omega_D(omega0, _fd_TI(D, a, v, h), _fd_TI(D, a, w, h))
    return abs(lhs - float(omega_Y(a, v, w, n)))


def rack_descends_residual(D: DiracStructure, sigma: Bisection, a: CotangentPath, n: int = DEFAULT_N,
                           case: str = "symplectic") -> dict:
    """Subrackoid membership of Σ▷a and the descent of the action to the groupoid."""
    moved = act(sigma, a, n)
    out = {"subrackoid": apath_residual(D, moved)}
    if case == "zero":
        I0, I1 = integrate_zero_poisson(a, n), integrate_zero_poisson(moved, n)
        out["invariance"] = float(max(np.max(np.abs(I0.source - I1.source)),
                                      np.max(np.abs(I0.covector - I1.covector))))
    else:
        I1 = integrate_symplectic(D, moved)
        I0 = integrate_symplectic(D, a)
        f = sigma.phi.phi1
        ends = np.stack([I0.source, I0.target])
        pre = invert(f, ends)
        out["endpoint"] = float(max(np.max(np.abs(pre[0] - I1.source)), np.max(np.abs(pre[1] - I1.target))))
    return out


def including_family(a_family: CotangentPath, omega0: KForm, m0: Sequence[float], k: int,
                     rng: np.random.Generator, amp: float = 0.1) -> BisectionFamily:
    """A family of Y_D-bisections with Σ_ε(m0) equal to the path family a_ε (variable ``e``).

    φ_{ε,s}(x) = x + γ_ε(s) − m0 + s(1−s) R_k(x), with R_k(m0) = 0.
    """
    from .randomfields import trig_poly
    from .symplectic import symplectic_bisection
    dim = a_family.dim
    xs = coords(dim)
    names = coord_names(dim)
    sv = E.var("s")
    gs = [E.subst(g, {"t": sv}) for g in a_family.gamma]
    comps = []
    for i in range(dim):
        if k == 0:
            R = E.ZERO
        else:
            P, _ = trig_poly(rng, dim, amp, degree=1, scale=math.pi / 2)
            R = P - E.subst(P, {nm: E.const(c) for nm, c in zip(names, m0)})
        comps.append(xs[i] + gs[i] - float(m0[i]) + sv * (1 - sv) * R)
    iso = Isotopy.from_components(comps)
    return BisectionFamily(symplectic_bisection(iso, omega0))


def relation_b_vs_c_residual(omega0: KForm, D: DiracStructure, a_family: CotangentPath,
                             m0: Sequence[float], rng: np.random.Generator, panel: int = 8,
                             eps=(0.0, 0.5, 1.0), basis: int = 8, n: int = DEFAULT_N) -> tuple[float, float]:
    """(b, c) values for a deformation a_ε of A-paths starting at m0.

    (c): sup over ε and a basis of admissible tangents w of |ω_Y(∂_εa, w)|.
    (b): sup over a panel of including families of |check_omega_family| at m0.
    """
    from .randomfields import trig_poly
    tv = E.var("t")
    ws = []
    for j in range(basis):
        comps = []
        for i in range(a_family.dim):
            c = rng.uniform(-1, 1, size=3)
            comps.append(c[0] * tv + c[1] * tv * tv + c[2] * E.sin(math.pi * tv))
        ws.append(admissible_tangent(omega0, comps))
    da = PathTangent(tuple(E.diff(g, FAMILY_VAR) for g in a_family.gamma),
                     tuple(E.diff(g, FAMILY_VAR) for g in a_family.theta))
    c_val = 0.0
    for e in eps:
        for w in ws:
            c_val = max(c_val, abs(float(omega_Y(a_family, da, w, n, {FAMILY_VAR: e}))))
    b_val = 0.0
    pt = np.asarray(m0, dtype=float)[None, :]
    for k in range(panel):
        F = including_family(a_family, omega0, m0, k, rng)
        (vals,) = _sample_forms([check_omega_family(F, n)], pt, D.dim, eps)
        b_val = max(b_val, float(np.max(np.abs(vals))))
    return b_val, c_val
