"""Seeded random generators for fields, forms, maps and time families.

Spatial dependence is a trigonometric polynomial of degree at most 2 (wave
vectors with |k|_1 <= 2), so every object is periodic on the standard torus.
Time dependence uses bases that composite Simpson integrates exactly
(polynomials of degree <= 3 and one period of sin/cos), which keeps
quadrature error out of identities that are exact in the continuum.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import expr as E
from .expr import Expr
from .kernel import KForm, SmoothMap, VectorField, coords, one_form

__all__ = [
    "wave_vectors", "trig_poly", "random_vector_field", "random_one_form",
    "random_two_form", "random_near_identity", "random_isotopy_components",
    "time_basis_field", "time_basis_form", "rng_for",
]


def rng_for(seed: int, trial: int = 0) -> np.random.Generator:
    """Per-trial generator seeded with ``seed XOR trial``."""
    return np.random.default_rng((int(seed) ^ int(trial)) & 0xFFFFFFFFFFFFFFFF)


def wave_vectors(dim: int, degree: int = 2) -> list[tuple[int, ...]]:
    """Nonzero wave vectors up to sign with |k|_1 <= degree."""
    out = []
    for k in itertools.product(range(-degree, degree + 1), repeat=dim):
        if 0 < sum(abs(c) for c in k) <= degree:
            first = next(c for c in k if c != 0)
            if first > 0:
                out.append(k)
    return out


def trig_poly(rng: np.random.Generator, dim: int, amp: float, degree: int = 2,
              constant: bool = True, scale: float = 1.0) -> tuple[Expr, float]:
    """Random trig polynomial and the bound sum |c| |k|_1 on its gradient.

    ``scale`` multiplies the arguments (chart boxes use a non-2π period).
    """
    xs = coords(dim)
    terms = []
    lip = 0.0
    if constant:
        terms.append(E.const(rng.uniform(-amp, amp)))
    for k in wave_vectors(dim, degree):
        arg = E.add(*(E.scale(x, c * scale) for x, c in zip(xs, k) if c))
        a, b = rng.uniform(-amp, amp, size=2)
        terms.append(a * E.cos(arg))
        terms.append(b * E.sin(arg))
        lip += (abs(a) + abs(b)) * sum(abs(c) for c in k) * scale
    return E.add(*terms), lip


def random_vector_field(rng, dim: int, amp: float, scale: float = 1.0) -> VectorField:
    return VectorField(tuple(trig_poly(rng, dim, amp, scale=scale)[0] for _ in range(dim)))


def random_one_form(rng, dim: int, amp: float, scale: float = 1.0) -> KForm:
    return one_form([trig_poly(rng, dim, amp, scale=scale)[0] for _ in range(dim)], dim)


def random_two_form(rng, dim: int, amp: float, scale: float = 1.0) -> KForm:
    from .kernel import _indices
    return KForm(2, dim, {idx: trig_poly(rng, dim, amp, scale=scale)[0] for idx in _indices(dim, 2)})


def _contracting_field(rng, dim: int, budget: float, scale: float = 1.0) -> list[Expr]:
    """Components whose Jacobian has operator norm below ``budget``."""
    comps = []
    for _ in range(dim):
        f, lip = trig_poly(rng, dim, 1.0, scale=scale)
        # row sums bounded by lip; total over rows bounds the Frobenius-ish norm
        comps.append(f * (budget / (lip * math.sqrt(dim) + 1e-300)))
    return comps


def random_near_identity(rng, dim: int, amp: float, scale: float = 1.0) -> SmoothMap:
    """x + P(x) with ||DP|| <= amp < 1, hence a diffeomorphism."""
    xs = coords(dim)
    P = _contracting_field(rng, dim, amp, scale)
    return SmoothMap(tuple(x + p for x, p in zip(xs, P)), True)


def random_isotopy_components(rng, dim: int, amp: float, s: str = "s",
                              scale: float = 1.0) -> tuple[Expr, ...]:
    """x + s P(x) + s(1-s) Q(x); Jacobian stays within amp of the identity."""
    xs = coords(dim)
    sv = E.var(s)
    P = _contracting_field(rng, dim, 0.75 * amp, scale)
    Q = _contracting_field(rng, dim, amp, scale)  # s(1-s) <= 1/4
    return tuple(x + sv * p + sv * (1 - sv) * q for x, p, q in zip(xs, P, Q))


def time_basis_field(rng, dim: int, amp: float, t: str = "t", scale: float = 1.0) -> VectorField:
    """Time family X_t with X_0 = 0: combination of t, t^2, t^3, sin(2πt)."""
    tv = E.var(t)
    basis = [tv, tv ** 2, tv ** 3, E.sin(2 * math.pi * tv)]
    comps = []
    for _ in range(dim):
        comps.append(E.add(*(b * trig_poly(rng, dim, amp, scale=scale)[0] for b in basis)) / len(basis))
    return VectorField(tuple(comps))


def time_basis_form(rng, dim: int, amp: float, t: str = "t", scale: float = 1.0) -> KForm:
    """Time family of 1-forms: combination of 1, t, t^2, cos(2πt), sin(2πt)."""
    tv = E.var(t)
    basis = [E.ONE, tv, tv ** 2, E.cos(2 * math.pi * tv), E.sin(2 * math.pi * tv)]
    comps = []
    for _ in range(dim):
        comps.append(E.add(*(b * trig_poly(rng, dim, amp, scale=scale)[0] for b in basis)) / len(basis))
    return one_form(comps, dim)
