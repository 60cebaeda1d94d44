"""The tangent Leibniz algebroid of the path rackoid and its Courant quotient.

Generalized sections (X_t, α_t) only enter the bracket through the aggregates
X̄ = X_1 and ᾱ = ∫_0^1 α_t dt of the left argument and through Y_t, Ẏ_t, β_t
of the right argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .kernel import (
    KForm, VectorField, evaluate_at, exterior_d, interior, lie_bracket, lie_derivative, sup_norm,
)
from .paths import DEFAULT_N, GeneralizedSection

__all__ = [
    "CourantSection", "SeriesNotDecaying", "dorfman", "dorfman_leibniz_residual", "aggregates",
    "bracket", "leibniz_residual", "ideal_residual", "quotient", "lift", "morphism_residual",
    "square", "square_form_check", "ad_power", "ad_power_dorfman", "iterated_bracket", "exp_ad",
    "section_residual", "courant_residual",
]


class SeriesNotDecaying(ArithmeticError):
    """Operator-series terms stopped decreasing before the truncation order."""


@dataclass(frozen=True)
class CourantSection:
    X: VectorField
    alpha: KForm

    @property
    def dim(self) -> int:
        return self.X.dim

    @classmethod
    def zero(cls, dim: int) -> "CourantSection":
        return cls(VectorField.zero(dim), KForm.zero(1, dim))

    def __add__(self, other):
        return CourantSection(self.X + other.X, self.alpha + other.alpha)

    def __sub__(self, other):
        return CourantSection(self.X - other.X, self.alpha - other.alpha)

    def exprs(self):
        return list(self.X.comps) + self.alpha.exprs()


def _d_or_zero(a: KForm) -> KForm:
    return exterior_d(a) if a.degree < a.dim else KForm.zero(a.degree, a.dim)


def dorfman(xi: CourantSection, zeta: CourantSection) -> CourantSection:
    """[[(X,α),(Y,β)]] = ([X,Y], L_Xβ − i_Y dα)."""
    return CourantSection(lie_bracket(xi.X, zeta.X),
                          lie_derivative(xi.X, zeta.alpha) - interior(zeta.X, _d_or_zero(xi.alpha)))


def aggregates(x: GeneralizedSection, n: int = DEFAULT_N) -> CourantSection:
    """(X_1, ∫α) with Simpson quadrature in t."""
    return CourantSection(x.X.subst({"t": E.ONE}), x.alpha.quad("t", n))


quotient = aggregates


def bracket(x: GeneralizedSection, y: GeneralizedSection, n: int = DEFAULT_N) -> GeneralizedSection:
    """([X_1, Y_t], L_{X_1}β_t − i_{Ẏ_t} d∫α)."""
    agg = aggregates(x, n)
    ydot = y.X.diff("t")
    return GeneralizedSection(lie_bracket(agg.X, y.X),
                              lie_derivative(agg.X, y.alpha) - interior(ydot, _d_or_zero(agg.alpha)))


def lift(xi: CourantSection) -> GeneralizedSection:
    """(X, α) ↦ (tX, α)."""
    return GeneralizedSection(xi.X.scale(E.var("t")), xi.alpha)


def _lattice_diff(a_exprs, b_exprs, pts, M, ts) -> float:
    extra = None if ts is None else {"t": np.asarray(ts)[:, None]}
    x = pts if ts is None else pts[None, :, :]
    a = evaluate_at(list(a_exprs), x, M, extra)
    b = evaluate_at(list(b_exprs), x, M, extra)
    return sup_norm([u - v for u, v in zip(a, b)])


def leibniz_residual(x, y, z, pts, M, ts, n: int = DEFAULT_N) -> float:
    """[x,[y,z]] − [[x,y],z] − [y,[x,z]] on the (t, point) lattice."""
    lhs = bracket(x, bracket(y, z, n), n)
    rhs = bracket(bracket(x, y, n), z, n) + bracket(y, bracket(x, z, n), n)
    return _lattice_diff(lhs.exprs(), rhs.exprs(), pts, M, ts)


def ideal_residual(x: GeneralizedSection, pts, M, n: int = DEFAULT_N) -> float:
    """sup|X_1| + sup|∫α|; vanishes exactly on the ideal I."""
    agg = aggregates(x, n)
    return sup_norm(evaluate_at(list(agg.X.comps), pts, M)) + sup_norm(evaluate_at(agg.alpha.exprs(), pts, M))


def courant_residual(a: CourantSection, b: CourantSection, pts, M) -> float:
    return _lattice_diff(a.exprs(), b.exprs(), pts, M, None)


def morphism_residual(x, y, pts, M, n: int = DEFAULT_N) -> float:
    """quotient([x, y]) versus the Dorfman bracket of the quotients."""
    lhs = quotient(bracket(x, y, n), n)
    rhs = dorfman(quotient(x, n), quotient(y, n))
    return courant_residual(lhs, rhs, pts, M)


def section_residual(xi: CourantSection, pts, M, n: int = DEFAULT_N) -> float:
    """quotient(lift(ξ)) versus ξ."""
    return courant_residual(quotient(lift(xi), n), xi, pts, M)


def dorfman_leibniz_residual(a, b, c, pts, M) -> float:
    lhs = dorfman(a, dorfman(b, c))
    rhs = dorfman(dorfman(a, b), c) + dorfman(b, dorfman(a, c))
    return courant_residual(lhs, rhs, pts, M)


def square(x: GeneralizedSection, n: int = DEFAULT_N) -> GeneralizedSection:
    return bracket(x, x, n)


def square_form_check(x: GeneralizedSection, pts, M, n: int = DEFAULT_N) -> float:
    """∫(form part of [x, x]) dt versus d i_{X_1} ∫α."""
    sq = square(x, n)
    agg = aggregates(x, n)
    lhs = sq.alpha.quad("t", n)
    rhs = exterior_d(interior(agg.X, agg.alpha))
    return _lattice_diff(lhs.exprs(), rhs.exprs(), pts, M, None)


def _lie_powers(X: VectorField, obj, k: int):
    """[obj, L_X obj, ..., L_X^k obj] for a vector field or form."""
    out = [obj]
    for _ in range(k):
        cur = out[-1]
        out.append(lie_bracket(X, cur) if isinstance(cur, VectorField) else lie_derivative(X, cur))
    return out


def ad_power_dorfman(xi: CourantSection, zeta: CourantSection, m: int) -> CourantSection:
    """ad^m_ξ ζ for the Dorfman bracket in closed form (m ≥ 1)."""
    if m < 1:
        raise ValueError("power must be at least 1")
    Ys = _lie_powers(xi.X, zeta.X, m)
    bs = _lie_powers(xi.X, zeta.alpha, m)
    als = _lie_powers(xi.X, xi.alpha, m - 1)
    form = bs[m]
    for k in range(m):
        form = form - interior(Ys[k], _d_or_zero(als[m - 1 - k])).scale(float(math.comb(m, k)))
    return CourantSection(Ys[m], form)


def ad_power(x: GeneralizedSection, y: GeneralizedSection, m: int, n: int = DEFAULT_N) -> GeneralizedSection:
    """ad^m_x y in closed form with the aggregates (X_1, ∫α) of x.

    ad^{k+1}_x y = (L^{k+1}Y_t, L^{k+1}β_t − Σ_{j≤k} C(k+1, j) i_{L^j Ẏ_t} d L^{k−j} ᾱ).
    """
    if m < 1:
        raise ValueError("power must be at least 1")
    agg = aggregates(x, n)
    Ys = _lie_powers(agg.X, y.X, m)
    Yd = _lie_powers(agg.X, y.X.diff("t"), m - 1)
    bs = _lie_powers(agg.X, y.alpha, m)
    als = _lie_powers(agg.X, agg.alpha, m - 1)
    form = bs[m]
    for k in range(m):
        form = form - interior(Yd[k], _d_or_zero(als[m - 1 - k])).scale(float(math.comb(m, k)))
    return GeneralizedSection(Ys[m], form)


def iterated_bracket(x: GeneralizedSection, y: GeneralizedSection, m: int, n: int = DEFAULT_N):
    out = y
    for _ in range(m):
        out = bracket(x, out, n)
    return out


def exp_ad(x: GeneralizedSection, y: GeneralizedSection, N: int = 12, n: int = DEFAULT_N,
           probe=None) -> GeneralizedSection:
    """Partial sums to order N of e^{ad_x} y.

    (e^{L}Y, e^{L}β − i_{e^{L}Ẏ} d Σ_k L^k ᾱ/(k+1)!) with L = L_{X_1}, ᾱ = ∫α.
    ``probe`` = (pts, M, ts) enables the runtime decay check on term norms.
    """
    if N < 1:
        raise ValueError("truncation order must be at least 1")
    agg = aggregates(x, n)
    Ys = _lie_powers(agg.X, y.X, N)
    Yd = _lie_powers(agg.X, y.X.diff("t"), N)
    bs = _lie_powers(agg.X, y.alpha, N)
    als = _lie_powers(agg.X, agg.alpha, N)
    fact = [float(math.factorial(k)) for k in range(N + 2)]
    if probe is not None:
        _check_decay(Ys, bs, fact, probe)
    Y = Ys[0]
    Ydot = Yd[0]
    b = bs[0]
    a = als[0]
    for k in range(1, N + 1):
        Y = Y + Ys[k].scale(1.0 / fact[k])
        Ydot = Ydot + Yd[k].scale(1.0 / fact[k])
        b = b + bs[k].scale(1.0 / fact[k])
    a = als[0]
    for k in range(1, N + 1):
        a = a + als[k].scale(1.0 / fact[k + 1])
    return GeneralizedSection(Y, b - interior(Ydot, _d_or_zero(a)))


def _check_decay(Ys, bs, fact, probe) -> None:
    pts, M, ts = probe
    extra = {"t": np.asarray(ts)[:, None]}
    norms = []
    for Yk, bk, f in zip(Ys, bs, fact):
        vals = evaluate_at(list(Yk.comps) + bk.exprs(), pts[None, :, :], M, extra)
        norms.append(sup_norm(vals) / f)
    tail = norms[-4:]
    if not all(b < a or a == 0.0 for a, b in zip(tail, tail[1:])):
        raise SeriesNotDecaying(f"term norms {tail} are not decreasing")
