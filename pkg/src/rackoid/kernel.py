"""Exterior calculus on a flat torus or a chart box.

Scalar fields are :class:`~rackoid.expr.Expr` objects over the coordinate
variables ``x0, x1, ...``.  They may carry extra parameters (path time ``t``,
isotopy time ``s``, family parameter ``e``), which is how time-dependent fields
are represented.  Forms store one coefficient per sorted index tuple; the
interior product contracts the first slot.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .expr import Expr

__all__ = [
    "ManifoldSpec", "Point", "Jet2", "VectorField", "KForm", "SmoothMap",
    "DomainError", "DegreeOverflow", "coord_names", "coords", "eval_jet",
    "exterior_d", "interior", "lie_derivative", "lie_bracket", "pullback",
    "pushforward", "invert", "compose", "identity_map", "translation",
    "evaluate_at", "one_form", "two_form", "zero_form", "sup_norm",
]

TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """Point outside the chart box."""


class DegreeOverflow(ValueError):
    """Exterior derivative would exceed the top degree."""


def coord_names(dim: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(dim))


def coords(dim: int) -> tuple[Expr, ...]:
    return tuple(E.var(n) for n in coord_names(dim))


@dataclass(frozen=True)
class ManifoldSpec:
    dim: int
    geometry: str = "torus"
    period: float = TWO_PI
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.geometry not in ("torus", "chart"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "torus" and not self.period > 0:
            raise ValueError("torus period must be positive")
        if self.geometry == "chart":
            b = self.bounds or tuple((-1.0, 1.0) for _ in range(self.dim))
            if len(b) != self.dim or any(not lo < hi for lo, hi in b):
                raise ValueError("chart box must be nonempty with one interval per axis")
            object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in b))

    @classmethod
    def torus(cls, dim: int, period: float = TWO_PI) -> "ManifoldSpec":
        return cls(dim, "torus", period)

    @classmethod
    def chart(cls, dim: int, bounds=None) -> "ManifoldSpec":
        return cls(dim, "chart", bounds=bounds)

    @property
    def names(self) -> tuple[str, ...]:
        return coord_names(self.dim)

    def point(self, xs) -> "Point":
        xs = np.asarray(xs, dtype=float)
        if xs.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coordinates")
        if self.geometry == "torus":
            xs = np.mod(xs, self.period)
        else:
            for x, (lo, hi) in zip(xs, self.bounds):
                if not lo <= x <= hi:
                    raise DomainError(f"coordinate {x} outside chart interval [{lo}, {hi}]")
        return Point(tuple(float(x) for x in xs))

    def check_points(self, pts: np.ndarray) -> None:
        if self.geometry == "chart":
            pts = np.asarray(pts)
            lo = np.array([b[0] for b in self.bounds])
            hi = np.array([b[1] for b in self.bounds])
            if np.any(pts < lo) or np.any(pts > hi):
                raise DomainError("evaluation point outside chart box")

    def random_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` uniform sample points, shape (n, dim)."""
        if self.geometry == "torus":
            return rng.uniform(0.0, self.period, size=(n, self.dim))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + (hi - lo) * rng.uniform(size=(n, self.dim))

    def is_periodic(self, f: Expr, rng: np.random.Generator | None = None, n: int = 16) -> bool:
        """Check f(x + period e_i) = f(x) on random points (torus only)."""
        if self.geometry != "torus":
            return True
        rng = rng or np.random.default_rng(0)
        pts = self.random_points(rng, n)
        base = evaluate_at(f, pts, self)
        for i in range(self.dim):
            shifted = pts.copy()
            shifted[:, i] += self.period
            if not np.allclose(evaluate_at(f, shifted, self), base, atol=1e-10):
                return False
        return True


@dataclass(frozen=True)
class Point:
    coords: tuple[float, ...]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


@dataclass(frozen=True)
class Jet2:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def evaluate_at(exprs, pts, M: ManifoldSpec | int, extra: Mapping | None = None):
    """Evaluate expression(s) at points ``pts`` of shape (..., dim)."""
    dim = M.dim if isinstance(M, ManifoldSpec) else int(M)
    pts = np.asarray(pts, dtype=float)
    env = {n: pts[..., i] for i, n in enumerate(coord_names(dim))}
    if extra:
        env.update(extra)
    return E.evaluate(exprs, env)


def eval_jet(f: Expr, p, M: ManifoldSpec) -> Jet2:
    """Value, gradient and Hessian of ``f`` at ``p`` from exact symbolic derivatives."""
    xs = np.asarray(p, dtype=float)
    M.check_points(xs[None, :])
    names = M.names
    f = E.as_expr(f)
    grads = [E.diff(f, a) for a in names]
    hess = [E.diff(grads[i], names[j]) for i in range(M.dim) for j in range(i, M.dim)]
    vals = evaluate_at([f, *grads, *hess], xs, M)
    h = np.zeros((M.dim, M.dim))
    it = iter(vals[1 + M.dim:])
    for i in range(M.dim):
        for j in range(i, M.dim):
            h[i, j] = h[j, i] = float(next(it))
    return Jet2(float(vals[0]), np.array([float(v) for v in vals[1:1 + M.dim]]), h)


# ---------------------------------------------------------------------------
# fields and forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorField:
    comps: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(E.as_expr(c) for c in self.comps))

    @property
    def dim(self) -> int:
        return len(self.comps)

    @classmethod
    def zero(cls, dim: int) -> "VectorField":
        return cls((E.ZERO,) * dim)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a + b for a, b in zip(self.comps, other.comps)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(tuple(a - b for a, b in zip(self.comps, other.comps)))

    def __neg__(self):
        return VectorField(tuple(-a for a in self.comps))

    def scale(self, c) -> "VectorField":
        return VectorField(tuple(E.as_expr(c) * a for a in self.comps))

    def apply(self, f: Expr) -> Expr:
        """Directional derivative X(f)."""
        return E.add(*(E.mul(c, E.diff(f, n)) for c, n in zip(self.comps, coord_names(self.dim))))

    def subst(self, mapping) -> "VectorField":
        return VectorField(tuple(E.subst(c, mapping) for c in self.comps))

    def diff(self, v: str) -> "VectorField":
        return VectorField(tuple(E.diff(c, v) for c in self.comps))

    def quad(self, v: str, n: int) -> "VectorField":
        return VectorField(tuple(E.quad(c, v, n) for c in self.comps))


def _indices(dim: int, k: int):
    return list(itertools.combinations(range(dim), k))


@dataclass(frozen=True)
class KForm:
    degree: int
    dim: int
    coeffs: Mapping[tuple[int, ...], Expr] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.degree <= 3:
            raise ValueError("forms of degree above 3 are not supported")
        if self.degree > self.dim:
            raise DegreeOverflow(f"degree {self.degree} exceeds dimension {self.dim}")
        full = {}
        for idx in _indices(self.dim, self.degree):
            full[idx] = E.as_expr(self.coeffs.get(idx, E.ZERO))
        extra = set(self.coeffs) - set(full)
        if extra:
            raise ValueError(f"coefficient indices must be sorted and in range: {sorted(extra)}")
        object.__setattr__(self, "coeffs", full)

    @classmethod
    def zero(cls, degree: int, dim: int) -> "KForm":
        return cls(degree, dim, {})

    def __getitem__(self, idx) -> Expr:
        return self.coeffs[tuple(idx)]

    def component(self, idx: Sequence[int]) -> Expr:
        """Value on (∂_{i1}, ..., ∂_{ik}) for an arbitrary index tuple."""
        idx = tuple(idx)
        if len(set(idx)) < len(idx):
            return E.ZERO
        order = sorted(range(len(idx)), key=lambda i: idx[i])
        sign = _perm_sign(order)
        c = self.coeffs[tuple(sorted(idx))]
        return c if sign > 0 else -c

    def items(self):
        return self.coeffs.items()

    def _zip(self, other, op) -> "KForm":
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise ValueError("form degree/dimension mismatch")
        return KForm(self.degree, self.dim, {k: op(v, other.coeffs[k]) for k, v in self.coeffs.items()})

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return KForm(self.degree, self.dim, {k: -v for k, v in self.coeffs.items()})

    def scale(self, c) -> "KForm":
        c = E.as_expr(c)
        return KForm(self.degree, self.dim, {k: c * v for k, v in self.coeffs.items()})

    def subst(self, mapping) -> "KForm":
        return KForm(self.degree, self.dim, {k: E.subst(v, mapping) for k, v in self.coeffs.items()})

    def diff(self, v: str) -> "KForm":
        return KForm(self.degree, self.dim, {k: E.diff(c, v) for k, c in self.coeffs.items()})

    def quad(self, v: str, n: int) -> "KForm":
        return KForm(self.degree, self.dim, {k: E.quad(c, v, n) for k, c in self.coeffs.items()})

    def exprs(self) -> list[Expr]:
        return list(self.coeffs.values())


def _perm_sign(order) -> int:
    sign = 1
    order = list(order)
    for i in range(len(order)):
        while order[i] != i:
            j = order[i]
            order[i], order[j] = order[j], order[i]
            sign = -sign
    return sign


def zero_form(f, dim: int) -> KForm:
    return KForm(0, dim, {(): E.as_expr(f)})


def one_form(comps: Sequence, dim: int | None = None) -> KForm:
    dim = len(comps) if dim is None else dim
    return KForm(1, dim, {(i,): E.as_expr(c) for i, c in enumerate(comps)})


def two_form(entries: Mapping[tuple[int, int], object], dim: int) -> KForm:
    return KForm(2, dim, {k: E.as_expr(v) for k, v in entries.items()})


def exterior_d(w: KForm) -> KForm:
    k, n = w.degree, w.dim
    if k + 1 > n:
        raise DegreeOverflow(f"d of a {k}-form in dimension {n} exceeds the top degree")
    names = coord_names(n)
    out: dict[tuple[int, ...], list] = {idx: [] for idx in _indices(n, k + 1)}
    for idx, c in w.items():
        for j in range(n):
            if j in idx:
                continue
            dc = E.diff(c, names[j])
            if dc.is_zero():
                continue
            pos = sum(1 for i in idx if i < j)
            new = tuple(sorted(idx + (j,)))
            out[new].append(dc if pos % 2 == 0 else -dc)
    return KForm(k + 1, n, {idx: E.add(*terms) for idx, terms in out.items()})


def interior(X: VectorField, w: KForm) -> KForm:
    """Contraction in the first slot."""
    if w.degree < 1:
        raise ValueError("cannot contract a 0-form")
    n = w.dim
    out = {}
    for idx in _indices(n, w.degree - 1):
        out[idx] = E.add(*(E.mul(X.comps[j], w.component((j,) + idx)) for j in range(n) if j not in idx))
    return KForm(w.degree - 1, n, out)


def lie_derivative(X: VectorField, w: KForm) -> KForm:
    """Cartan formula; on functions this is X(f)."""
    if w.degree == 0:
        return zero_form(X.apply(w.coeffs[()]), w.dim)
    dpart = interior(X, exterior_d(w)) if w.degree < w.dim else KForm.zero(w.degree, w.dim)
    return dpart + exterior_d(interior(X, w))


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    return VectorField(tuple(X.apply(b) - Y.apply(a) for a, b in zip(X.comps, Y.comps)))


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothMap:
    """A map M -> M given by coordinate expressions.

    ``inverse`` optionally supplies closed-form inverse components; otherwise
    the inverse is solved by Newton iteration.
    """

    comps: tuple[Expr, ...]
    is_diffeo: bool = True
    inverse: tuple[Expr, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(E.as_expr(c) for c in self.comps))
        if self.inverse is not None:
            object.__setattr__(self, "inverse", tuple(E.as_expr(c) for c in self.inverse))

    @property
    def dim(self) -> int:
        return len(self.comps)

    def jacobian(self) -> list[list[Expr]]:
        names = coord_names(self.dim)
        return [[E.diff(c, n) for n in names] for c in self.comps]

    def inverse_comps(self) -> tuple[Expr, ...]:
        if self.inverse is not None:
            return self.inverse
        if not self.is_diffeo:
            raise ValueError("map is not flagged as a diffeomorphism")
        return E.inverse_map(self.comps, coord_names(self.dim), coords(self.dim))

    def inv(self) -> "SmoothMap":
        return SmoothMap(self.inverse_comps(), True, self.comps)

    def at(self, target: Sequence[Expr]) -> tuple[Expr, ...]:
        """Components of F evaluated at the point expressions ``target``."""
        return tuple(E.subst(c, dict(zip(coord_names(self.dim), target))) for c in self.comps)

    def subst(self, mapping) -> "SmoothMap":
        inv = None if self.inverse is None else tuple(E.subst(c, mapping) for c in self.inverse)
        return SmoothMap(tuple(E.subst(c, mapping) for c in self.comps), self.is_diffeo, inv)


def identity_map(dim: int) -> SmoothMap:
    xs = coords(dim)
    return SmoothMap(xs, True, xs)


def translation(c: Sequence[float]) -> SmoothMap:
    xs = coords(len(c))
    return SmoothMap(tuple(x + ci for x, ci in zip(xs, c)), True, tuple(x - ci for x, ci in zip(xs, c)))


def compose(F: SmoothMap, G: SmoothMap) -> SmoothMap:
    """F ∘ G."""
    inv = None
    if F.inverse is not None and G.inverse is not None:
        inv = tuple(E.subst(c, dict(zip(coord_names(G.dim), F.inverse))) for c in G.inverse)
    return SmoothMap(F.at(G.comps), F.is_diffeo and G.is_diffeo, inv)


def pullback(F: SmoothMap, w: KForm) -> KForm:
    """F^*w via Jacobian minors."""
    n = w.dim
    k = w.degree
    names = coord_names(n)
    at = dict(zip(names, F.comps))
    if k == 0:
        return zero_form(E.subst(w.coeffs[()], at), n)
    jac = F.jacobian()
    out = {}
    for I in _indices(n, k):
        terms = []
        for J, c in w.items():
            if c.is_zero():
                continue
            minor = _det([[jac[j][i] for i in I] for j in J])
            if minor.is_zero():
                continue
            terms.append(E.mul(E.subst(c, at), minor))
        out[I] = E.add(*terms)
    return KForm(k, n, out)


def _det(m: list[list[Expr]]) -> Expr:
    k = len(m)
    if k == 1:
        return m[0][0]
    if k == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return E.add(*(
        (m[0][j] if j % 2 == 0 else -m[0][j]) * _det([row[:j] + row[j + 1:] for row in m[1:]])
        for j in range(k)))


def pushforward(F: SmoothMap, X: VectorField) -> VectorField:
    """(F_*X)(p) = TF(X) at F^{-1}(p)."""
    names = coord_names(X.dim)
    q = dict(zip(names, F.inverse_comps()))
    jac = F.jacobian()
    return VectorField(tuple(
        E.subst(E.add(*(E.mul(jac[i][j], X.comps[j]) for j in range(X.dim))), q)
        for i in range(X.dim)))


def invert(F: SmoothMap, p, seed_hint=None, extra: Mapping | None = None) -> np.ndarray:
    """Solve F(q) = p by Newton iteration with backtracking.

    ``p`` may be a single point or an array of shape (..., dim).
    """
    p = np.asarray(p, dtype=float)
    n = F.dim
    names = coord_names(n)
    q = np.array(p if seed_hint is None else np.asarray(seed_hint, dtype=float), dtype=float)
    jac = [e for row in F.jacobian() for e in row]
    scale_ = 1.0 + float(np.max(np.abs(p))) if p.size else 1.0

    def resid(q):
        vals = evaluate_at(list(F.comps), q, n, extra)
        return np.stack(vals, axis=-1) - p

    r = resid(q)
    err = float(np.max(np.abs(r)))
    for _ in range(E.NEWTON_MAX_ITER):
        if err <= 1e-15 * scale_:
            break
        J = np.stack(evaluate_at(jac, q, n, extra), axis=-1).reshape(q.shape[:-1] + (n, n))
        if np.any(np.abs(np.linalg.det(J)) < 1e-14):
            raise E.SingularJacobian("singular Jacobian during inversion")
        step = np.linalg.solve(J, r[..., None])[..., 0]
        lam = 1.0
        while True:
            qn = q - lam * step
            rn = resid(qn)
            en = float(np.max(np.abs(rn)))
            if en < err or lam < 1e-3:
                break
            lam *= 0.5
        if en >= err and err <= E.NEWTON_TOL:
            break
        q, r, err = qn, rn, en
    if not err <= E.NEWTON_TOL * scale_:
        raise E.NoConvergence(f"inversion stalled at residual {err:.3e}")
    return q


def sup_norm(vals) -> float:
    vals = [np.asarray(v) for v in (vals if isinstance(vals, (list, tuple)) else [vals])]
    return max((float(np.max(np.abs(v))) if v.size else 0.0) for v in vals) if vals else 0.0
