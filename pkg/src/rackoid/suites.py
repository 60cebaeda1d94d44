"""Seeded verification suites, reports and convergence studies.

Each trial draws its randomness from ``seed XOR trial_id`` and returns named
residuals.  A residual is checked against one of four tiers:

``tol``    the configured identity tolerance,
``fd``     the configured finite-difference tolerance,
``fixed``  a bound that does not depend on the configuration,
``neg``    a negative control that must stay *above* its bound.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import expr as E
from .generators import (
    POISSON_2D, chart_scale, exact_bisection, ideal_generator, random_bisection, random_flow_bisection, random_path,
    random_section, random_symplectic_apath, random_zero_poisson_bisection, random_zero_poisson_path,
    standard_symplectic,
)
from .kernel import KForm, ManifoldSpec, coords, evaluate_at, exterior_d, one_form, sup_norm, zero_form
from .paths import Bisection, CotangentPath, GeneralizedSection, Isotopy, d_beta, flow
from .randomfields import random_isotopy_components, random_one_form, rng_for, time_basis_form, trig_poly

__all__ = ["SuiteConfig", "Report", "ConfigError", "SUITES", "run_suite", "convergence_study",
           "CONVERGENCE_OPS", "report_json"]


# RK4 steps for A-path construction; independent of the quadrature grid
APATH_STEPS = 128


class ConfigError(ValueError):
    """Invalid suite configuration."""


@dataclass(frozen=True)
class SuiteConfig:
    suite: str
    dim: int = 2
    geometry: str = "torus"
    grid_n: int = 64
    trials: int = 10
    seed: int = 42
    amplitude: float | None = None
    tol: float | None = None
    fd_tol: float = 1e-4

    def validate(self) -> "SuiteConfig":
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        spec = SUITES[self.suite]
        if self.grid_n <= 0 or self.grid_n % 2:
            raise ConfigError("grid must be a positive even integer")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.tol is not None and not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not self.fd_tol > 0:
            raise ConfigError("fd-tol must be positive")
        if self.amplitude is not None and not 0 < self.amplitude < 1:
            raise ConfigError("amplitude must lie in (0, 1)")
        if self.geometry not in ("torus", "chart"):
            raise ConfigError("geometry must be torus or chart")
        if self.dim not in spec.dims:
            raise ConfigError(f"suite {self.suite} supports dim in {sorted(spec.dims)}")
        if spec.geometry is not None and self.geometry != spec.geometry:
            raise ConfigError(f"suite {self.suite} requires geometry {spec.geometry}")
        return self

    def manifold(self) -> ManifoldSpec:
        return ManifoldSpec.torus(self.dim) if self.geometry == "torus" else ManifoldSpec.chart(self.dim)

    @property
    def effective_tol(self) -> float:
        return SUITES[self.suite].default_tol if self.tol is None else self.tol

    @property
    def rho(self) -> float:
        return SUITES[self.suite].default_amplitude if self.amplitude is None else self.amplitude


@dataclass
class Check:
    value: float
    tier: str = "tol"
    bound: float | None = None


@dataclass(frozen=True)
class SuiteSpec:
    name: str
    run: Callable
    default_tol: float
    description: str
    dims: frozenset = frozenset({2})
    geometry: str | None = None
    default_amplitude: float = 0.3


@dataclass
class Report:
    suite: str
    config: dict
    trials: list
    max_residual: float
    passed: bool
    wall_time_ms: float

    def payload(self) -> dict:
        return {"suite": self.suite, "config": self.config, "trials": self.trials,
                "max_residual": self.max_residual, "pass": self.passed,
                "wall_time_ms": self.wall_time_ms}


def report_json(report: Report, include_time: bool = True) -> str:
    payload = report.payload()
    if not include_time:
        payload = {k: v for k, v in payload.items() if k != "wall_time_ms"}
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _diff(a_exprs, b_exprs, pts, M, extra=None) -> float:
    a = evaluate_at(list(a_exprs), pts, M, extra)
    b = evaluate_at(list(b_exprs), pts, M, extra)
    return sup_norm([u - v for u, v in zip(a, b)])


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _selfdist(rng, cfg: SuiteConfig, M: ManifoldSpec):
    from .rack import act, compare_paths, rack, rack_self_distributivity_residual, self_distributivity_residual
    n, amp = cfg.grid_n, cfg.rho
    S, T = random_bisection(rng, M, amp), random_bisection(rng, M, amp)
    a = random_path(rng, M)
    ident = Bisection.identity(M.dim)
    out = {"selfdist": Check(self_distributivity_residual(S, T, a, n))}
    U = random_bisection(rng, M, amp)
    out["rack_selfdist"] = Check(rack_self_distributivity_residual(S, T, U, M.random_points(rng, 32), M, n))
    out["unit_act"] = Check(compare_paths(act(ident, a, n), a), "fixed", 0.0)
    unit = rack(S, ident, n)
    out["unit_rack"] = Check(0.0 if unit is ident else 1.0, "fixed", 0.0)
    # same (dβ, φ_1): add d g_s with g_s = g·(1 − 2s) so β shifts by an exact form
    s = E.var("s")
    g = trig_poly(rng, M.dim, amp, scale=chart_scale(M))[0] * (1 - 2 * s)
    S2 = Bisection(S.phi, S.eta + exterior_d(zero_form(g, M.dim)))
    out["augmented_compat"] = Check(compare_paths(act(S, a, n), act(S2, a, n)), "fixed", 1e-8)
    return out


def _homotopy(rng, cfg, M):
    from .rack import homotopy_residual
    psi = Isotopy.from_components(random_isotopy_components(rng, M.dim, cfg.rho))
    mu = random_one_form(rng, M.dim, cfg.rho)
    pts = M.random_points(rng, 32)
    return {"homotopy": Check(homotopy_residual(psi, mu, pts, M, cfg.grid_n))}


def _leibniz(rng, cfg, M):
    from .leibniz import CourantSection, dorfman_leibniz_residual, leibniz_residual
    from .randomfields import random_vector_field
    n, amp = cfg.grid_n, cfg.rho
    x, y, z = (random_section(rng, M, amp) for _ in range(3))
    pts = M.random_points(rng, 32)
    ts = np.linspace(0.0, 1.0, 8)
    out = {"leibniz": Check(leibniz_residual(x, y, z, pts, M, ts, n)),
           "left_center_self": Check(_diff(*_bracket_pair(x, n), pts[None], M, {"t": ts[:, None]}))}
    cs = [CourantSection(random_vector_field(rng, M.dim, amp), random_one_form(rng, M.dim, amp)) for _ in range(3)]
    out["dorfman_leibniz"] = Check(dorfman_leibniz_residual(*cs, pts, M), "fixed", 1e-9)
    return out


def _bracket_pair(x, n):
    """[[x, x], x] against zero (squares lie in the left center)."""
    from .leibniz import bracket
    sq = bracket(bracket(x, x, n), x, n)
    return sq.exprs(), [E.ZERO] * len(sq.exprs())


def _quotient(rng, cfg, M):
    from .leibniz import (
        CourantSection, bracket, dorfman, ideal_residual, lift, morphism_residual, quotient,
        section_residual, square_form_check,
    )
    from .randomfields import random_vector_field
    n, amp = cfg.grid_n, cfg.rho
    x, y = random_section(rng, M, amp), random_section(rng, M, amp)
    i = ideal_generator(rng, M, amp)
    pts = M.random_points(rng, 32)
    ts = np.linspace(0.0, 1.0, 8)
    xi = CourantSection(random_vector_field(rng, M.dim, amp), random_one_form(rng, M.dim, amp))
    zeta = CourantSection(random_vector_field(rng, M.dim, amp), random_one_form(rng, M.dim, amp))
    lc = bracket(i, y, n)
    lattice = {"t": ts[:, None]}
    lifted = quotient(bracket(lift(xi), lift(zeta), n), n)
    return {
        "morphism": Check(morphism_residual(x, y, pts, M, n), "fixed", 1e-8),
        "ideal_generator": Check(ideal_residual(i, pts, M, n), "fixed", 1e-10),
        "left_center": Check(sup_norm(evaluate_at(lc.exprs(), pts[None], M, lattice)), "fixed", 1e-10),
        "two_sided_ideal": Check(ideal_residual(bracket(x, i, n), pts, M, n), "fixed", 1e-8),
        "squares": Check(square_form_check(x, pts, M, n), "fixed", 1e-8),
        "section": Check(section_residual(xi, pts, M, n), "fixed", 1e-12),
        "lift_bracket": Check(_diff(lifted.exprs(), dorfman(xi, zeta).exprs(), pts, M), "fixed", 1e-9),
    }


def _expad(rng, cfg, M):
    from .kernel import coord_names
    from .leibniz import ad_power, exp_ad, iterated_bracket, quotient
    n, amp = cfg.grid_n, cfg.rho
    x, y = random_section(rng, M, amp), random_section(rng, M, amp)
    pts = M.random_points(rng, 16)
    ts = np.linspace(0.0, 1.0, 4)
    lattice = {"t": ts[:, None]}
    worst = 0.0
    for m in (1, 2, 3):
        a, b = ad_power(x, y, m, n), iterated_bracket(x, y, m, n)
        worst = max(worst, _diff(a.exprs(), b.exprs(), pts[None], M, lattice))
    ex = exp_ad(x, y, 12, n, probe=(pts, M, ts))
    # e^{ad_X}Y = Φ_1^*Y: (TΦ_1)^{-1} Y(Φ_1(p)) with Φ the RK4 flow of X_1
    X1 = quotient(x, n).X
    Phi = flow(X1, 64).phi1
    J = Phi.jacobian()
    names = coord_names(M.dim)
    t0 = float(ts[2])
    Yt = y.X.subst({"t": E.const(t0)})
    YPhi = [E.subst(c, dict(zip(names, Phi.comps))) for c in Yt.comps]
    vals = evaluate_at([e for row in J for e in row] + YPhi, pts, M)
    d = M.dim
    Jm = np.stack(vals[:d * d], -1).reshape(-1, d, d)
    ref = np.linalg.solve(Jm, np.stack(vals[d * d:], -1)[..., None])[..., 0]
    got = np.stack(evaluate_at(list(ex.X.comps), pts, M, {"t": t0}), -1)
    return {"ad_power": Check(worst, "fixed", 1e-9),
            "exp_flow": Check(float(np.max(np.abs(ref - got))), "fixed", 1e-6)}


def _symplectic(rng, cfg, M):
    from .rack import rack
    from .symplectic import (
        PathTangent, equivariance_residuals, fiberwise_sum, isotropic_subrack_residual, omega_Y,
        omega_equals_dlambda_residual, pullback_lambda_residual,
    )
    n, amp = cfg.grid_n, cfg.rho
    S, T = random_bisection(rng, M, amp), random_bisection(rng, M, amp)
    a = random_path(rng, M)
    pts = M.random_points(rng, 32)
    ra, rb, rc = equivariance_residuals(S, T, a, pts, M, n)
    p1, p2 = pullback_lambda_residual(S, pts, M, n)
    iso = isotropic_subrack_residual(exact_bisection(rng, M, amp), exact_bisection(rng, M, amp), pts, M, n)
    Z1, Z2 = random_zero_poisson_bisection(rng, M, amp), random_zero_poisson_bisection(rng, M, amp)
    add = _diff(d_beta(fiberwise_sum(Z1, Z2), n).exprs(),
                (d_beta(Z1, n) + d_beta(Z2, n)).exprs(), pts, M)
    t = E.var("t")
    c = rng.uniform(-1, 1, (4, M.dim))
    v = PathTangent(tuple(c[0, i] * t for i in range(M.dim)), tuple(c[1, i] + t for i in range(M.dim)))
    w = PathTangent(tuple(c[2, i] * t * t for i in range(M.dim)), tuple(c[3, i] * E.cos(t) for i in range(M.dim)))
    anti = abs(float(omega_Y(a, v, w, n)) + float(omega_Y(a, w, v, n)))
    u, vv = E.var("u"), E.var("v")
    fam = CotangentPath(tuple(g + u * 0.3 * t + vv * 0.2 * t * t for g in a.gamma),
                        tuple(th + u * vv * 0.5 + vv * E.sin(t) for th in a.theta))
    return {
        "c_invariance": Check(ra), "beta_law": Check(rb), "dbeta_law": Check(rc),
        "pullback_lambda_source": Check(p1), "pullback_lambda_target": Check(p2),
        "isotropic_subrack": Check(iso), "groupoid_additivity": Check(add, "fixed", 1e-8),
        "omega_antisymmetry": Check(anti, "fixed", 1e-12),
        "omega_dlambda": Check(omega_equals_dlambda_residual(fam, n), "fd"),
    }


def _dirac(rng, cfg, M):
    from .leibniz import bracket
    from .symplectic import (
        AD_closure_residual, DiracStructure, dirac_involutivity_residual, dirac_isotropy_residual,
        frame_rank, quotient_into_D_residual, sharp,
    )
    n, amp = cfg.grid_n, cfg.rho
    pts = M.random_points(rng, 32)
    out = {}
    worst = 0.0
    for _, f in POISSON_2D:
        D = DiracStructure.from_function(f)
        coeffs = [[trig_poly(rng, 2, amp)[0] for _ in range(2)] for _ in range(2)]
        worst = max(worst, dirac_involutivity_residual(D, pts, M),
                    dirac_involutivity_residual(D, pts, M, coeffs))
    out["poisson_involutivity"] = Check(worst, "fixed", 1e-8)
    # negative control: B = x0 dx1∧dx2 on a 3D chart is not closed
    M3 = ManifoldSpec.chart(3)
    Bn = KForm(2, 3, {(1, 2): E.var("x0")})
    Dn = DiracStructure.two_form(Bn, check=False)
    out["negative_control"] = Check(dirac_involutivity_residual(Dn, M3.random_points(rng, 32), M3), "neg", 1e-2)
    # random Poisson structure and A(D)-sections: α_t with closed-form primitive A_t, X_t = π♯A_t
    f = 1.0 + trig_poly(rng, 2, amp)[0]
    D = DiracStructure.from_function(f)
    out["isotropy"] = Check(dirac_isotropy_residual(D, pts, M), "fixed", 1e-10)
    out["frame_rank_defect"] = Check(float(2 - frame_rank(D, pts, M)), "fixed", 0.0)
    secs = [_AD_section(rng, D, amp) for _ in range(2)]
    ts = np.linspace(0.0, 1.0, 8)
    out["AD_closure"] = Check(max(AD_closure_residual(D, secs[0], secs[1], pts, M, ts, n),
                                  AD_closure_residual(D, secs[0], secs[0], pts, M, ts, n)), "fixed", 1e-7)
    out["quotient_in_D"] = Check(quotient_into_D_residual(D, secs[0], pts, M, n), "fixed", 1e-8)
    return out


def _AD_section(rng, D, amp) -> GeneralizedSection:
    """α_t = c0 + c1 t + c2 t² + c3 cos 2πt + c4 sin 2πt with A_t = ∫_0^t α, X_t = π♯A_t."""
    from .kernel import VectorField
    from .symplectic import sharp
    t = E.var("t")
    tp = 2 * math.pi * t
    basis = [E.ONE, t, t * t, E.cos(tp), E.sin(tp)]
    prims = [t, t * t / 2, t ** 3 / 3, E.sin(tp) / (2 * math.pi), (1 - E.cos(tp)) / (2 * math.pi)]
    alpha, A = [], []
    for _ in range(D.dim):
        cs = [trig_poly(rng, D.dim, amp)[0] for _ in basis]
        alpha.append(E.add(*(c * b for c, b in zip(cs, basis))))
        A.append(E.add(*(c * p for c, p in zip(cs, prims))))
    return GeneralizedSection(VectorField(sharp(D.pi, A)), one_form(alpha, D.dim))


def _congruence(rng, cfg, M):
    from .integration import (
        BisectionFamily, congruence_invariance_residual, dbeta_constancy_residual, family_defect,
        formulation_gap, rigidity_residual, split_section_residual, tangent_cone_residual,
    )
    n, amp = cfg.grid_n, cfg.rho
    pts = M.random_points(rng, 16)
    e, s = E.var("e"), E.var("s")
    FA, FB, FG = _families(rng, M, amp)
    T = random_bisection(rng, M, amp)
    alpha = random_one_form(rng, M.dim, amp)
    gap = max(formulation_gap(F, pts, M, n=n) for F in (FA, FB, FG))
    defect = max(family_defect(F, pts, M, n=n) for F in (FA, FB))
    const = max(dbeta_constancy_residual(F, pts, M, n=n) for F in (FA, FB))
    moved, rest = congruence_invariance_residual(T, FB, pts[:8], M, n=n)
    _, rest_g = congruence_invariance_residual(T, FG, pts[:8], M, n=n)
    rigid = max(rigidity_residual(F, T, pts[:8], M, n=n) for F in (FA, FB))
    cone = split_section_residual(alpha, Bisection.identity(M.dim), pts, M, n=n)
    cone_gen = split_section_residual(alpha, random_bisection(rng, M, amp), pts, M, n=n)
    gen = ideal_generator(rng, M, amp)
    return {
        "formulation_gap": Check(gap, "fixed", 1e-6),
        "admissible_defect": Check(defect, "fixed", 1e-6),
        "generic_defect": Check(family_defect(FG, pts, M, n=n), "neg", 1e-3),
        "dbeta_constancy": Check(const, "fixed", 1e-6),
        "rest_to_show": Check(max(rest, rest_g), "fixed", 1e-6),
        "transported_defect": Check(moved, "fixed", 1e-6),
        "rigidity": Check(rigid, "fixed", 1e-6),
        "cone_roundtrip": Check(cone, "fixed", 1e-8),
        "cone_split_general": Check(cone_gen, "fixed", 1e-6),
        "cone_generator": Check(tangent_cone_residual(gen, pts, M, n), "fixed", 1e-10),
    }


def _families(rng, M, amp):
    """Admissible families of two kinds plus a generic one, all with ε-independent φ_1."""
    from .integration import BisectionFamily
    from .randomfields import random_two_form
    e, s = E.var("e"), E.var("s")
    base = random_isotopy_components(rng, M.dim, amp)
    S0 = Bisection(Isotopy.from_components(base), time_basis_form(rng, M.dim, amp, t="s"))
    # (A) φ fixed, η̃ + ε κ_s with ∫κ_s ds = 0
    kap = random_one_form(rng, M.dim, amp).scale(E.cos(2 * math.pi * s) + (s - 0.5))
    FA = BisectionFamily(Bisection(S0.phi, S0.eta + kap.scale(e)))
    # (B) endpoint-fixed deformation of φ with raw η = ν_s∘φ, ν_s closed
    W = [trig_poly(rng, M.dim, 1.0)[0] * (0.05 * amp) for _ in range(M.dim)]
    phiB = Isotopy.from_components([b + e * s * (1 - s) * w for b, w in zip(base, W)])
    g = trig_poly(rng, M.dim, amp)[0] * (1 + s) + trig_poly(rng, M.dim, amp)[0] * s * s
    cst = rng.uniform(-1, 1, M.dim)
    nu = exterior_d(zero_form(g, M.dim)) + one_form([cst[i] * (1 + s * i) for i in range(M.dim)], M.dim)
    FB = BisectionFamily(Bisection.from_raw(phiB, nu))
    # generic: same isotopy deformation, unrelated η
    FG = BisectionFamily(Bisection(phiB, time_basis_form(rng, M.dim, amp, t="s").scale(1 + e)))
    return FA, FB, FG


def _integrate_zero(rng, cfg, M):
    from .integration import BisectionFamily, family_defect, integrate_zero_poisson, rack_descends_residual
    from .rack import act, compare_paths
    from .symplectic import DiracStructure
    n, amp = cfg.grid_n, cfg.rho
    D0 = DiracStructure.poisson([[E.ZERO] * M.dim for _ in range(M.dim)])
    S = random_zero_poisson_bisection(rng, M, amp)
    a = random_zero_poisson_path(rng, M)
    triv = compare_paths(act(S, a, n), a, np.linspace(0.0, 1.0, 17))
    desc = rack_descends_residual(D0, S, a, n, case="zero")
    # classification: same invariants ⇒ admissible deformation; different ⇒ not
    t, s, e = E.var("t"), E.var("s"), E.var("e")
    kap = rng.uniform(-1, 1, (M.dim, 2))
    kappa = [kap[i, 0] * E.cos(2 * math.pi * t) + kap[i, 1] * (t - 0.5) for i in range(M.dim)]
    a1 = CotangentPath(a.gamma, tuple(th + k for th, k in zip(a.theta, kappa)))
    I0, I1 = integrate_zero_poisson(a, n), integrate_zero_poisson(a1, n)
    same = float(max(np.max(np.abs(I0.source - I1.source)), np.max(np.abs(I0.covector - I1.covector))))

    def family(path_b):
        raw = [E.subst(th0 + e * (th1 - th0), {"t": s}) for th0, th1 in zip(a.theta, path_b.theta)]
        return BisectionFamily(Bisection.from_raw(Isotopy.identity(M.dim), one_form(raw, M.dim)))

    m = np.array([[float(E.evaluate(g, {})) for g in a.gamma]])
    linked = family_defect(family(a1), m, M, n=n)
    shift = rng.uniform(0.5, 1.0, M.dim)
    a2 = CotangentPath(a.gamma, tuple(th + c for th, c in zip(a.theta, shift)))
    unlinked = family_defect(family(a2), m, M, n=n)
    return {
        "act_trivial": Check(triv, "fixed", 1e-12),
        "I_invariance": Check(desc["invariance"], "fixed", 1e-12),
        "subrackoid": Check(desc["subrackoid"], "fixed", 1e-12),
        "invariants_equal": Check(same, "fixed", 1e-12),
        "classification": Check(linked, "fixed", 1e-6),
        "classification_negative": Check(unlinked, "neg", 1e-2),
    }


def _chart(cfg):
    return ManifoldSpec.chart(2)


def _integrate_symplectic(rng, cfg, M):
    from .integration import apath_residual, integrate_symplectic
    om, D = standard_symplectic(1.0 + rng.uniform(0, 1))
    a = random_symplectic_apath(rng, D, M, steps=APATH_STEPS)
    g = integrate_symplectic(D, a)
    ends = np.asarray(E.evaluate(list(a.gamma), {"t": np.array([0.0, 1.0])}))
    t = E.var("t")
    rev = type(a)(tuple(E.subst(c, {"t": 1 - t}) for c in a.gamma),
                  tuple(-E.subst(c, {"t": 1 - t}) for c in a.theta))
    gr = integrate_symplectic(D, rev)
    # unit: θ = 0 forces a constant path
    m = rng.uniform(-0.5, 0.5, 2)
    unit = integrate_symplectic(D, type(a).constant(m))
    return {
        "apath": Check(apath_residual(D, a), "fixed", 1e-8),
        "endpoints": Check(float(np.max(np.abs(np.stack([g.source, g.target], 1) - ends))), "fixed", 1e-12),
        "reversal": Check(float(max(np.max(np.abs(gr.source - g.target)), np.max(np.abs(gr.target - g.source)))),
                          "fixed", 1e-8),
        "unit": Check(float(max(np.max(np.abs(unit.source - m)), np.max(np.abs(unit.target - m)))), "fixed", 1e-12),
    }


def _random_admissible(rng, om, fix=False):
    from .integration import admissible_tangent
    t = E.var("t")
    comps = []
    for _ in range(2):
        c = rng.uniform(-1, 1, 3)
        if fix:
            comps.append(c[0] * E.sin(math.pi * t) + c[1] * t * (1 - t))
        else:
            comps.append(c[0] + c[1] * t + c[2] * E.sin(math.pi * t) + rng.uniform(-1, 1) * t * t)
    return admissible_tangent(om, comps)


def _reduction(rng, cfg, M):
    from .integration import reduction_form_residual, relation_b_vs_c_residual
    from .symplectic import flat, omega_Y
    n = cfg.grid_n
    om, D = standard_symplectic(1.0 + rng.uniform(0, 1))
    a = random_symplectic_apath(rng, D, M, steps=APATH_STEPS)
    v, w = _random_admissible(rng, om), _random_admissible(rng, om)
    red = reduction_form_residual(om, D, a, v, w, n)
    k = _random_admissible(rng, om, fix=True)
    coiso = max(abs(float(omega_Y(a, k, _random_admissible(rng, om), n))) for _ in range(4))
    t, e = E.var("t"), E.var("e")
    m0 = rng.uniform(-0.4, 0.4, 2)
    c = rng.uniform(-0.3, 0.3, (2, 3))
    base = [m0[i] + c[i, 0] * t + c[i, 1] * t * t for i in range(2)]

    def fam(extra):
        g = [b + e * x for b, x in zip(base, extra)]
        return CotangentPath(tuple(g), flat(om, tuple(E.diff(x, "t") for x in g)))

    fixing = fam([c[i, 2] * E.sin(math.pi * t) for i in range(2)])
    moving = fam([c[i, 2] * t + 0.2 * t for i in range(2)])
    b_fix, c_fix = relation_b_vs_c_residual(om, D, fixing, m0, rng, n=n)
    b_mov, c_mov = relation_b_vs_c_residual(om, D, moving, m0, rng, n=n)
    return {
        "reduction_form": Check(red, "fd"),
        "coisotropy": Check(coiso, "fd"),
        "relation_b_fixing": Check(b_fix, "fd"),
        "relation_c_fixing": Check(c_fix, "fd"),
        "relation_b_moving": Check(b_mov, "neg", 1e-2),
        "relation_c_moving": Check(c_mov, "neg", 1e-2),
    }


def _descent(rng, cfg, M):
    from .integration import rack_descends_residual
    from .symplectic import D_preservation_residual, symplectic_bisection
    n, amp = cfg.grid_n, cfg.rho
    om, D = standard_symplectic(1.0 + rng.uniform(0, 1))
    phi = Isotopy.from_components(random_isotopy_components(rng, 2, amp, scale=chart_scale(M)))
    S = symplectic_bisection(phi, om)
    a = random_symplectic_apath(rng, D, M, steps=APATH_STEPS)
    res = rack_descends_residual(D, S, a, n)
    pts = M.random_points(rng, 32)
    return {
        "subrackoid": Check(res["subrackoid"], "fixed", 1e-6),
        "endpoint_law": Check(res["endpoint"], "fixed", 1e-8),
        "D_preservation": Check(D_preservation_residual(D, S, pts, M, n), "fixed", 1e-6),
    }


SUITES: dict[str, SuiteSpec] = {s.name: s for s in [
    SuiteSpec("selfdist", _selfdist, 1e-7, "rack action self-distributivity and unit laws",
              frozenset({2, 3})),
    SuiteSpec("homotopy", _homotopy, 1e-7, "homotopy formula for a smooth path of maps", frozenset({2, 3})),
    SuiteSpec("leibniz", _leibniz, 1e-8, "Leibniz identity of the path bracket", frozenset({2, 3})),
    SuiteSpec("quotient", _quotient, 1e-8, "quotient to the Dorfman bracket, ideal, squares", frozenset({2, 3})),
    SuiteSpec("expad", _expad, 1e-6, "ad powers and the exponential series", frozenset({2}),
              default_amplitude=0.2),
    SuiteSpec("symplectic", _symplectic, 1e-7, "c, λ, ω and the equivariance laws", frozenset({2, 3})),
    SuiteSpec("dirac", _dirac, 1e-8, "Dirac structures, A(D) closure and quotient", frozenset({2}), "torus"),
    SuiteSpec("congruence", _congruence, 1e-6, "congruence relation and tangent cone", frozenset({2})),
    SuiteSpec("integrate_zero", _integrate_zero, 1e-12, "integration for the zero Poisson structure",
              frozenset({2, 3})),
    SuiteSpec("integrate_symplectic", _integrate_symplectic, 1e-8, "A-paths and the pair groupoid",
              frozenset({2}), "chart"),
    SuiteSpec("reduction", _reduction, 1e-4, "reduction form and coisotropy", frozenset({2}), "chart"),
    SuiteSpec("descent", _descent, 1e-6, "subrackoid and descent of the action", frozenset({2}), "chart"),
]}


def _threshold(chk: Check, cfg: SuiteConfig) -> float:
    if chk.tier == "tol":
        return cfg.effective_tol
    if chk.tier == "fd":
        return cfg.fd_tol
    return float(chk.bound)


def run_suite(cfg: SuiteConfig) -> Report:
    """Run all trials of a suite; deterministic in (suite, config)."""
    cfg.validate()
    spec = SUITES[cfg.suite]
    M = cfg.manifold()
    start = time.perf_counter()
    records = []
    max_res = 0.0
    all_pass = True
    for trial in range(cfg.trials):
        rng = rng_for(cfg.seed, trial)
        checks = spec.run(rng, cfg, M)
        residuals = {}
        ok = True
        for name, chk in checks.items():
            val = float(chk.value)
            thr = _threshold(chk, cfg)
            residuals[name] = val
            if chk.tier == "neg":
                ok &= bool(val >= thr)
            else:
                ok &= bool(np.isfinite(val) and val <= thr)
                max_res = max(max_res, val) if np.isfinite(val) else math.inf
        records.append({"trial_id": trial, "residuals": residuals, "pass": bool(ok)})
        all_pass &= bool(ok)
    config = asdict(cfg)
    config["tol"] = cfg.effective_tol
    config["amplitude"] = cfg.rho
    wall = (time.perf_counter() - start) * 1000.0
    return Report(cfg.suite, config, records, max_res, all_pass, round(wall, 3))


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

def _op_simpson(n, rng):
    """Simpson error on ∫_0^1 e^t dt."""
    from .paths import quadrature
    t = np.linspace(0.0, 1.0, n + 1)
    return abs(float(quadrature(np.exp(t))) - (math.e - 1.0))


def _op_simpson_periodic(n, rng):
    """Simpson on sin(2πt): exact at every grid (floor)."""
    from .paths import quadrature
    return abs(float(quadrature(np.sin(2 * math.pi * np.linspace(0.0, 1.0, n + 1)))))


def _op_rk4(n, rng):
    """RK4 flow of sin(x) ∂_x to time 1 against x(1) = 2 arctan(e tan(x0/2))."""
    from .kernel import VectorField
    V = VectorField((E.sin(E.var("x0")),))
    iso = flow(V, n)
    x0 = np.linspace(0.3, 2.8, 7)
    got = evaluate_at(list(iso.phi1.comps), x0[:, None], 1)[0]
    return float(np.max(np.abs(got - 2 * np.arctan(math.e * np.tan(x0 / 2)))))


def _op_rk4_constant(n, rng):
    """RK4 flow of a constant field: exact at every step count (floor)."""
    from .kernel import VectorField
    iso = flow(VectorField((E.const(0.7),)), n)
    x0 = np.linspace(0.0, 6.0, 7)
    return float(np.max(np.abs(evaluate_at(list(iso.phi1.comps), x0[:, None], 1)[0] - (x0 + 0.7))))


def _op_homotopy(n, rng):
    from .rack import homotopy_residual
    rng = np.random.default_rng(7)
    M = ManifoldSpec.torus(2)
    psi = Isotopy.from_components(random_isotopy_components(rng, 2, 0.3))
    mu = random_one_form(rng, 2, 0.3)
    return homotopy_residual(psi, mu, M.random_points(rng, 32), M, n)


def _op_selfdist(n, rng):
    from .rack import self_distributivity_residual
    rng = np.random.default_rng(11)
    M = ManifoldSpec.torus(2)
    S, T = random_bisection(rng, M, 0.3), random_bisection(rng, M, 0.3)
    return self_distributivity_residual(S, T, random_path(rng, M), n)


def _op_unit(n, rng):
    from .rack import act, compare_paths
    rng = np.random.default_rng(3)
    M = ManifoldSpec.torus(2)
    a = random_path(rng, M)
    return compare_paths(act(Bisection.identity(2), a, n), a)


CONVERGENCE_OPS = {
    "simpson": _op_simpson,
    "simpson_periodic": _op_simpson_periodic,
    "rk4": _op_rk4,
    "rk4_constant": _op_rk4_constant,
    "homotopy": _op_homotopy,
    "selfdist": _op_selfdist,
    "unit": _op_unit,
}

FLOOR = 1e-12


def convergence_study(op: str, grids=(8, 16, 32, 64)) -> dict:
    """Residual per grid and least-squares slope of log residual against log h."""
    if op not in CONVERGENCE_OPS:
        raise ConfigError(f"unknown convergence op {op!r}")
    grids = [int(g) for g in grids]
    if len(grids) < 2 or any(g <= 0 or g % 2 for g in grids):
        raise ConfigError("grids must be at least two positive even integers")
    fn = CONVERGENCE_OPS[op]
    res = [float(fn(g, None)) for g in grids]
    rows = []
    for i, (g, r) in enumerate(zip(grids, res)):
        order = None
        if i > 0 and r > FLOOR and res[i - 1] > FLOOR:
            order = math.log(res[i - 1] / r) / math.log(g / grids[i - 1])
        rows.append({"n": g, "max_residual": r, "order": order})
    flags = []
    usable = [(g, r) for g, r in zip(grids, res) if r > FLOOR]
    slope = None
    if len(usable) >= 2:
        h = np.log([1.0 / g for g, _ in usable])
        y = np.log([r for _, r in usable])
        slope = float(np.polyfit(h, y, 1)[0])
    else:
        flags.append("floor: residuals at roundoff, slope undefined")
    if any(b > a for a, b in zip(res, res[1:])) and slope is not None:
        flags.append("non-monotone residuals")
    return {"op": op, "grids": grids, "table": rows, "slope": slope, "flags": flags}
