"""Seeded random bisections, paths, sections and Dirac data used by the suites."""
from __future__ import annotations

import math

import numpy as np

from . import expr as E
from .kernel import KForm, ManifoldSpec, coords, exterior_d, one_form, zero_form
from .paths import Bisection, CotangentPath, GeneralizedSection, Isotopy, flow
from .randomfields import (
    random_isotopy_components, random_one_form, random_vector_field, time_basis_field,
    time_basis_form, trig_poly,
)

__all__ = [
    "chart_scale", "random_bisection", "random_flow_bisection", "random_path", "random_section",
    "ideal_generator", "exact_bisection", "standard_symplectic", "random_symplectic_apath",
    "random_zero_poisson_path", "random_zero_poisson_bisection", "POISSON_2D",
]


def chart_scale(M: ManifoldSpec) -> float:
    """Frequency scale so trig fields have a full period across a chart box."""
    if M.geometry == "torus":
        return 2 * math.pi / M.period
    return math.pi / max(hi - lo for lo, hi in M.bounds) * 2


def random_bisection(rng, M: ManifoldSpec, amp: float) -> Bisection:
    """x + sP + s(1-s)Q with a smooth random η̃_s."""
    k = chart_scale(M)
    phi = Isotopy.from_components(random_isotopy_components(rng, M.dim, amp, scale=k))
    return Bisection(phi, time_basis_form(rng, M.dim, amp, t="s", scale=k))


def random_flow_bisection(rng, M: ManifoldSpec, amp: float, steps: int = 16) -> Bisection:
    """Bisection whose isotopy is the RK4 flow of a random time-dependent field."""
    k = chart_scale(M)
    V = time_basis_field(rng, M.dim, amp, t="s", scale=k)
    return Bisection(flow(V, steps), time_basis_form(rng, M.dim, amp, t="s", scale=k))


def exact_bisection(rng, M: ManifoldSpec, amp: float) -> Bisection:
    """Isotropic bisection: η̃_s = d g_s, so β is exact and dβ = 0."""
    k = chart_scale(M)
    s = E.var("s")
    phi = Isotopy.from_components(random_isotopy_components(rng, M.dim, amp, scale=k))
    g = trig_poly(rng, M.dim, amp, scale=k)[0] * (1 + s) + trig_poly(rng, M.dim, amp, scale=k)[0] * s * s
    return Bisection(phi, exterior_d(zero_form(g, M.dim)))


def random_path(rng, M: ManifoldSpec, amp: float = 1.0) -> CotangentPath:
    """Closed-form cotangent path with nonconstant base and covector."""
    t = E.var("t")
    if M.geometry == "torus":
        m = rng.uniform(0, M.period, M.dim)
    else:
        m = np.array([rng.uniform(lo, hi) for lo, hi in M.bounds]) * 0.5
    v = rng.uniform(-amp, amp, (M.dim, 2))
    gamma = tuple(m[i] + v[i, 0] * t + 0.3 * v[i, 1] * E.sin(2 * math.pi * t) for i in range(M.dim))
    c = rng.uniform(-amp, amp, (M.dim, 3))
    theta = tuple(c[i, 0] + c[i, 1] * E.cos(3 * t) + c[i, 2] * t * t for i in range(M.dim))
    return CotangentPath(gamma, theta)


def random_section(rng, M: ManifoldSpec, amp: float) -> GeneralizedSection:
    k = chart_scale(M)
    return GeneralizedSection(time_basis_field(rng, M.dim, amp, scale=k),
                              time_basis_form(rng, M.dim, amp, scale=k))


def ideal_generator(rng, M: ManifoldSpec, amp: float) -> GeneralizedSection:
    """(sin(πt) V, cos(2πt) α₀): X_1 = 0 and ∫α = 0."""
    t = E.var("t")
    k = chart_scale(M)
    V = random_vector_field(rng, M.dim, amp, scale=k)
    a0 = random_one_form(rng, M.dim, amp, scale=k)
    return GeneralizedSection(V.scale(E.sin(math.pi * t)), a0.scale(E.cos(2 * math.pi * t)))


# two-dimensional Poisson bivectors f ∂_0∧∂_1 used by the Dirac suite
def _poisson_functions():
    x, y = E.var("x0"), E.var("x1")
    return [
        ("constant", 1.0 + 0 * x),
        ("sin x cos y", E.sin(x) * E.cos(y)),
        ("1 + sin(x+y)/2", 1 + 0.5 * E.sin(x + y)),
        ("exp(sin x)", E.exp(E.sin(x))),
        ("cos 2x sin y + 0.3", E.cos(2 * x) * E.sin(y) + 0.3),
    ]


POISSON_2D = _poisson_functions()


def standard_symplectic(c: float = 1.0):
    """ω₀ = c dx∧dy on ℝ² with its Poisson inverse (as a Dirac structure)."""
    from .symplectic import DiracStructure
    om = KForm(2, 2, {(0, 1): E.const(c)})
    # ♭ has matrix W^T with W = [[0, c], [-c, 0]]; π = (W^T)^{-1}
    D = DiracStructure.poisson([[E.ZERO, E.const(1.0 / c)], [E.const(-1.0 / c), E.ZERO]])
    return om, D


def random_symplectic_apath(rng, D, M: ManifoldSpec, amp: float = 0.5, steps: int = 64) -> CotangentPath:
    from .integration import apath_from_covector
    t = E.var("t")
    theta = [rng.uniform(-amp, amp) + rng.uniform(-amp, amp) * t
             + rng.uniform(-amp, amp) * E.sin(2 * math.pi * t) for _ in range(D.dim)]
    m0 = [rng.uniform(lo, hi) * 0.5 for lo, hi in M.bounds]
    return apath_from_covector(D, m0, theta, steps)


def random_zero_poisson_path(rng, M: ManifoldSpec, amp: float = 1.0) -> CotangentPath:
    """Constant base point with a time-dependent covector."""
    t = E.var("t")
    m = rng.uniform(0, M.period, M.dim) if M.geometry == "torus" else \
        np.array([rng.uniform(lo, hi) for lo, hi in M.bounds])
    c = rng.uniform(-amp, amp, (M.dim, 3))
    theta = tuple(c[i, 0] + c[i, 1] * E.cos(2 * math.pi * t) + c[i, 2] * t for i in range(M.dim))
    return CotangentPath(tuple(E.const(v) for v in m), theta)


def random_zero_poisson_bisection(rng, M: ManifoldSpec, amp: float) -> Bisection:
    """φ_s = id with a random covector family (Bis(Y_D) for π = 0)."""
    return Bisection(Isotopy.identity(M.dim), time_basis_form(rng, M.dim, amp, t="s", scale=chart_scale(M)))
