"""Objects parametrized by [0, 1]: cotangent paths, isotopies, bisections.

Time dependence is closed form.  Path time is the variable ``t``; the isotopy
parameter of a bisection is ``s``.  A bisection stores its covector family in
halfway-pullback form, i.e. as the ``s``-dependent 1-form φ_s^*η_s on M.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import expr as E
from .expr import Expr
from .kernel import (
    KForm, ManifoldSpec, SmoothMap, VectorField, coord_names, coords, evaluate_at,
    exterior_d, identity_map, one_form, pullback,
)

__all__ = [
    "TimeGrid", "quadrature", "CotangentPath", "Isotopy", "Bisection", "GeneralizedSection",
    "FlowDiverged", "flow", "halfway_pullback", "beta", "d_beta", "path_time_derivative",
    "DEFAULT_N",
]

DEFAULT_N = 64


class FlowDiverged(ArithmeticError):
    """An RK4 step moved a point further than the domain size."""


@dataclass(frozen=True)
class TimeGrid:
    n_intervals: int = DEFAULT_N

    def __post_init__(self):
        E.simpson_weights(self.n_intervals)  # validates

    @property
    def nodes(self) -> np.ndarray:
        return E.simpson_weights(self.n_intervals)[0]

    @property
    def weights(self) -> np.ndarray:
        return E.simpson_weights(self.n_intervals)[1]


def quadrature(samples, n: int | None = None) -> float | np.ndarray:
    """Composite Simpson sum of samples at the n+1 uniform nodes of [0, 1] (axis 0)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0] - 1 if n is None else n
    if samples.shape[0] != n + 1:
        raise ValueError("sample count must be n + 1")
    _, w = E.simpson_weights(n)
    return np.tensordot(w, samples, axes=(0, 0))


@dataclass(frozen=True)
class CotangentPath:
    """a = (γ, θ): base curve and covector curve, closed form in ``t``."""

    gamma: tuple[Expr, ...]
    theta: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(E.as_expr(g) for g in self.gamma))
        object.__setattr__(self, "theta", tuple(E.as_expr(g) for g in self.theta))
        if len(self.gamma) != len(self.theta):
            raise ValueError("base and covector dimensions differ")

    @property
    def dim(self) -> int:
        return len(self.gamma)

    @property
    def gamma_dot(self) -> tuple[Expr, ...]:
        return tuple(E.diff(g, "t") for g in self.gamma)

    @classmethod
    def constant(cls, m: Sequence[float], theta: Sequence[float] | None = None) -> "CotangentPath":
        theta = [0.0] * len(m) if theta is None else theta
        return cls(tuple(E.const(x) for x in m), tuple(E.const(x) for x in theta))

    def sample(self, ts, extra=None) -> tuple[np.ndarray, np.ndarray]:
        """(γ(t), θ(t)) arrays of shape (len(ts), dim)."""
        env = {"t": np.asarray(ts, dtype=float)}
        if extra:
            env.update(extra)
        vals = E.evaluate(list(self.gamma) + list(self.theta), env)
        d = self.dim
        return np.stack(vals[:d], axis=-1), np.stack(vals[d:], axis=-1)

    def subst(self, mapping) -> "CotangentPath":
        return CotangentPath(tuple(E.subst(g, mapping) for g in self.gamma),
                             tuple(E.subst(g, mapping) for g in self.theta))


def path_time_derivative(a: CotangentPath, t: float) -> np.ndarray:
    """γ̇ at time ``t`` from the exact t-derivative."""
    return np.array([float(v) for v in E.evaluate(list(a.gamma_dot), {"t": t})])


@dataclass(frozen=True)
class Isotopy:
    """φ_s with φ_0 = id; ``phi`` components depend on the coordinates and ``s``."""

    phi: SmoothMap
    inverse1: tuple[Expr, ...] | None = None  # closed-form inverse of φ_1 if known

    @property
    def dim(self) -> int:
        return self.phi.dim

    @classmethod
    def identity(cls, dim: int) -> "Isotopy":
        xs = coords(dim)
        return cls(SmoothMap(xs, True, xs), xs)

    @classmethod
    def from_components(cls, comps: Sequence[Expr], inverse1=None) -> "Isotopy":
        return cls(SmoothMap(tuple(comps), True), None if inverse1 is None else tuple(inverse1))

    def at(self, s: float | Expr) -> SmoothMap:
        sm = {"s": E.as_expr(s)}
        comps = tuple(E.subst(c, sm) for c in self.phi.comps)
        inv = None
        if isinstance(s, (int, float)) and float(s) == 1.0 and self.inverse1 is not None:
            inv = self.inverse1
        elif isinstance(s, (int, float)) and float(s) == 0.0:
            inv = coords(self.dim)
        return SmoothMap(comps, True, inv)

    @property
    def phi1(self) -> SmoothMap:
        return self.at(1.0)

    @property
    def velocity(self) -> tuple[Expr, ...]:
        """∂_s φ_s(m), a vector at φ_s(m) in coordinate components."""
        return tuple(E.diff(c, "s") for c in self.phi.comps)

    def subst(self, mapping) -> "Isotopy":
        inv = None if self.inverse1 is None else tuple(E.subst(c, mapping) for c in self.inverse1)
        return Isotopy(self.phi.subst(mapping), inv)


def flow(V: VectorField, steps: int = DEFAULT_N, time_var: str = "s",
         M: ManifoldSpec | None = None, check_points: np.ndarray | None = None) -> Isotopy:
    """Isotopy generated by the time-dependent field V (time variable ``time_var``).

    φ_s is RK4 with ``steps`` steps of size s/steps, built symbolically so it is
    an exact smooth function of s with φ_0 = id.
    """
    dim = V.dim
    names = coord_names(dim)
    tau, h = E.var("_tau"), E.var("_h")
    xs = coords(dim)

    def field_at(time, pts):
        m = dict(zip(names, pts))
        m[time_var] = time
        return [E.subst(c, m) for c in V.comps]

    k1 = field_at(tau, xs)
    k2 = field_at(tau + 0.5 * h, [x + 0.5 * h * k for x, k in zip(xs, k1)])
    k3 = field_at(tau + 0.5 * h, [x + 0.5 * h * k for x, k in zip(xs, k2)])
    k4 = field_at(tau + h, [x + h * k for x, k in zip(xs, k3)])
    step = [x + (h / 6.0) * (a + 2 * b + 2 * c + d) for x, a, b, c, d in zip(xs, k1, k2, k3, k4)]
    hs = E.var("s") * (1.0 / steps)
    cur = list(xs)
    for k in range(steps):
        m = dict(zip(names, cur))
        m["_tau"] = hs * float(k)
        m["_h"] = hs
        cur = [E.subst(c, m) for c in step]
    iso = Isotopy(SmoothMap(tuple(cur), True))
    if M is not None and check_points is not None:
        _check_flow(iso, M, check_points, steps)
    return iso


def _check_flow(iso: Isotopy, M: ManifoldSpec, pts: np.ndarray, steps: int) -> None:
    size = M.period if M.geometry == "torus" else max(hi - lo for lo, hi in M.bounds)
    ss = np.linspace(0.0, 1.0, 9)[:, None]
    vals = np.stack(evaluate_at(list(iso.phi.comps), pts[None, :, :], M, {"s": ss}), axis=-1)
    jumps = np.abs(np.diff(vals, axis=0)) * (steps / 8.0)
    if not np.all(np.isfinite(vals)) or np.max(jumps) > size:
        raise FlowDiverged("RK4 flow step exceeded the domain size")


@dataclass(frozen=True)
class Bisection:
    """Σ = (φ, η) with η stored as the halfway pullback family φ_s^*η_s."""

    phi: Isotopy
    eta: KForm  # degree 1, depends on s

    @property
    def dim(self) -> int:
        return self.phi.dim

    @classmethod
    def identity(cls, dim: int) -> "Bisection":
        return cls(Isotopy.identity(dim), KForm.zero(1, dim))

    @classmethod
    def from_raw(cls, phi: Isotopy, raw: KForm) -> "Bisection":
        """Build from a raw family: η_{s,m} is the value of ``raw`` at φ_s(m)."""
        return cls(phi, pullback(phi.phi, raw))

    def raw_eta(self) -> tuple[Expr, ...]:
        """Components of η_{s,m} (a covector at φ_s(m)), recovered as (Tφ_s)^{-T} η̃_s."""
        n = self.dim
        jac = self.phi.phi.jacobian()
        inv = E.mat_inv([jac[j][i] for i in range(n) for j in range(n)], n)  # transpose
        from .expr import _entry
        return tuple(E.add(*(_entry(inv, i, j) * self.eta[(j,)] for j in range(n))) for i in range(n))


def halfway_pullback(sigma: Bisection, s: float) -> KForm:
    return sigma.eta.subst({"s": E.as_expr(s)})


def beta(sigma: Bisection, n: int = DEFAULT_N) -> KForm:
    """β_Σ = ∫_0^1 φ_s^*η_s ds by composite Simpson."""
    return sigma.eta.quad("s", n)


def d_beta(sigma: Bisection, n: int = DEFAULT_N) -> KForm:
    return exterior_d(beta(sigma, n))


@dataclass(frozen=True)
class GeneralizedSection:
    """(X_t, α_t) with X_0 = 0; closed form in ``t``."""

    X: VectorField
    alpha: KForm

    @property
    def dim(self) -> int:
        return self.X.dim

    @classmethod
    def zero(cls, dim: int) -> "GeneralizedSection":
        return cls(VectorField.zero(dim), KForm.zero(1, dim))

    def x0_residual(self, pts: np.ndarray, M) -> float:
        vals = evaluate_at(list(self.X.comps), pts, M, {"t": 0.0})
        return max(float(np.max(np.abs(v))) for v in vals)

    def __add__(self, other):
        return GeneralizedSection(self.X + other.X, self.alpha + other.alpha)

    def __sub__(self, other):
        return GeneralizedSection(self.X - other.X, self.alpha - other.alpha)

    def scale(self, c) -> "GeneralizedSection":
        return GeneralizedSection(self.X.scale(c), self.alpha.scale(c))

    def exprs(self) -> list[Expr]:
        return list(self.X.comps) + self.alpha.exprs()
