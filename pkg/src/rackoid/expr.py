"""Expression DAG for smooth objects: exact differentiation, lazy composition, vectorized evaluation.

Every smooth object in the package (fields, form coefficients, map components,
paths) is an :class:`Expr`.  Nodes are hash-consed, so structurally equal
subexpressions are shared and derivatives are memoized per node.  Besides the
elementary operations there are four composite nodes:

``Subst``
    composition: evaluate a child with some variables rebound to expressions.
``Quad``
    composite Simpson quadrature of a child over a bound variable on [0, 1].
``InvMap``/``InvComp``
    componentwise inverse of a map, solved by vectorized Newton iteration and
    differentiated through the implicit function theorem.
``MatInv``/``MatInvEntry``
    entries of a pointwise matrix inverse.

Evaluation is vectorized: variables are bound to numpy arrays that broadcast
against each other, and quadrature prepends a new leading axis.
"""
from __future__ import annotations

import hashlib
import math
import weakref
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "NoConvergence", "SingularJacobian", "const", "var", "sin", "cos", "exp",
    "power", "subst", "quad", "inverse_map", "mat_inv", "diff", "evaluate",
    "simpson_weights", "as_expr", "ZERO", "ONE",
]

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12


class NoConvergence(ArithmeticError):
    """Newton inversion did not reach the residual tolerance."""


class SingularJacobian(ArithmeticError):
    """A Jacobian met during Newton inversion is numerically singular."""


_REPR_DEPTH, _REPR_WIDTH = 6, 6


def _r(e: "Expr", d: int) -> str:
    return "…" if d <= 0 else e._fmt(d - 1)


_INTERN: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


def _intern(key, factory):
    node = _INTERN.get(key)
    if node is None:
        node = factory()
        # structural digest: stable across runs, used for canonical ordering
        node.sig = int.from_bytes(hashlib.blake2b(repr(key).encode(), digest_size=16).digest(), "little")
        _INTERN[key] = node
    return node


class Expr:
    """Base node.  Use the module constructors, never the classes directly."""

    __slots__ = ("free", "_diff", "sig", "__weakref__")

    def __init__(self, free: frozenset):
        self.free = free
        self._diff: dict = {}

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(as_expr(other), -1.0))

    def __rsub__(self, other):
        return add(as_expr(other), scale(self, -1.0))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, other):
        other = as_expr(other)
        if isinstance(other, Const):
            return scale(self, 1.0 / other.value)
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __pow__(self, n: int):
        return power(self, n)

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    def __repr__(self):
        # a DAG printed as a tree can be exponentially long, so cap depth and width
        return self._fmt(_REPR_DEPTH)

    def _fmt(self, d: int) -> str:
        return type(self).__name__

    def _eval(self, ctx: "_Ctx"):
        raise NotImplementedError

    def _d(self, v: str) -> "Expr":
        raise NotImplementedError


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__(frozenset())
        self.value = value

    def _eval(self, ctx):
        return self.value

    def _d(self, v):
        return ZERO

    def _fmt(self, d):
        return repr(self.value)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__(frozenset((name,)))
        self.name = name

    def _eval(self, ctx):
        try:
            return ctx.env[self.name]
        except KeyError:
            raise KeyError(f"unbound variable {self.name!r}") from None

    def _d(self, v):
        return ONE if v == self.name else ZERO

    def _fmt(self, d):
        return self.name


class Add(Expr):
    """c0 + sum_i c_i * t_i with non-constant, unscaled terms t_i."""

    __slots__ = ("terms", "coefs", "c0")

    def __init__(self, terms, coefs, c0):
        super().__init__(frozenset().union(*(t.free for t in terms)))
        self.terms = terms
        self.coefs = coefs
        self.c0 = c0

    def _eval(self, ctx):
        out = self.c0
        for t, c in zip(self.terms, self.coefs):
            val = _ev(t, ctx)
            out = out + (val if c == 1.0 else c * val)
        return out

    def _d(self, v):
        return add(*(scale(diff(t, v), c) for t, c in zip(self.terms, self.coefs)))

    def _fmt(self, d):
        parts = [f"{c}*{_r(t, d)}" if c != 1.0 else _r(t, d)
                 for t, c in zip(self.terms[:_REPR_WIDTH], self.coefs)]
        if len(self.terms) > _REPR_WIDTH:
            parts.append("…")
        if self.c0:
            parts.append(repr(self.c0))
        return "(" + " + ".join(parts) + ")"


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        super().__init__(frozenset().union(*(f.free for f in factors)))
        self.factors = factors

    def _eval(self, ctx):
        it = iter(self.factors)
        out = _ev(next(it), ctx)
        for f in it:
            out = out * _ev(f, ctx)
        return out

    def _d(self, v):
        terms = []
        for i, f in enumerate(self.factors):
            df = diff(f, v)
            if df.is_zero():
                continue
            terms.append(mul(df, *self.factors[:i], *self.factors[i + 1:]))
        return add(*terms)

    def _fmt(self, d):
        return "*".join(_r(f, d) for f in self.factors)


class Pow(Expr):
    __slots__ = ("base", "n")

    def __init__(self, base, n):
        super().__init__(base.free)
        self.base = base
        self.n = n

    def _eval(self, ctx):
        b = _ev(self.base, ctx)
        if self.n == -1:
            return 1.0 / b
        return b ** self.n

    def _d(self, v):
        return scale(mul(power(self.base, self.n - 1), diff(self.base, v)), float(self.n))

    def _fmt(self, d):
        return f"({_r(self.base, d)})**{self.n}"


class _Unary(Expr):
    __slots__ = ("arg",)
    fname = ""

    def __init__(self, arg):
        super().__init__(arg.free)
        self.arg = arg

    def _fmt(self, d):
        return f"{self.fname}({_r(self.arg, d)})"


class Sin(_Unary):
    __slots__ = ()
    fname = "sin"

    def _eval(self, ctx):
        return np.sin(_ev(self.arg, ctx))

    def _d(self, v):
        return mul(cos(self.arg), diff(self.arg, v))


class Cos(_Unary):
    __slots__ = ()
    fname = "cos"

    def _eval(self, ctx):
        return np.cos(_ev(self.arg, ctx))

    def _d(self, v):
        return scale(mul(sin(self.arg), diff(self.arg, v)), -1.0)


class Exp(_Unary):
    __slots__ = ()
    fname = "exp"

    def _eval(self, ctx):
        return np.exp(_ev(self.arg, ctx))

    def _d(self, v):
        return mul(self, diff(self.arg, v))


class Subst(Expr):
    """Child evaluated with ``names[i]`` rebound to ``values[i]``."""

    __slots__ = ("child", "names", "values")

    def __init__(self, child, names, values):
        free = set(child.free - set(names))
        for k, val in zip(names, values):
            free |= val.free
        super().__init__(frozenset(free))
        self.child = child
        self.names = names
        self.values = values

    def _eval(self, ctx):
        # substitutions sharing a mapping share one context, so their common subterms are evaluated once
        key = (self.names, self.values)
        sub = ctx.kids.get(key)
        if sub is None:
            env = dict(ctx.env)
            for k, val in zip(self.names, self.values):
                env[k] = _ev(val, ctx)
            sub = ctx.kids[key] = _Ctx(env, ctx, frozenset(self.names))
        return _ev(self.child, sub)

    def _d(self, v):
        mapping = dict(zip(self.names, self.values))
        terms = []
        for k, val in mapping.items():
            dval = diff(val, v)
            if dval.is_zero():
                continue
            terms.append(mul(subst(diff(self.child, k), mapping), dval))
        if v not in mapping:
            terms.append(subst(diff(self.child, v), mapping))
        return add(*terms)

    def _fmt(self, d):
        inner = ", ".join(f"{k}={_r(val, d)}" for k, val in zip(self.names, self.values))
        return f"[{_r(self.child, d)} | {inner}]"


def simpson_weights(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and composite Simpson weights on [0, 1] with ``n`` (even) intervals."""
    if n <= 0 or n % 2:
        raise ValueError(f"Simpson rule needs a positive even interval count, got {n}")
    nodes = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return nodes, w / (3.0 * n)


class Quad(Expr):
    """Composite Simpson integral over ``var`` in [0, 1]; ``var`` is bound."""

    __slots__ = ("child", "var", "n", "_nodes", "_weights")

    def __init__(self, child, var, n):
        super().__init__(child.free - {var})
        self.child = child
        self.var = var
        self.n = n
        self._nodes, self._weights = simpson_weights(n)

    def _eval(self, ctx):
        shape = _env_shape(ctx.env)
        key = ("quad", self.var, self.n)
        sub = ctx.kids.get(key)
        if sub is None:
            env = dict(ctx.env)
            env[self.var] = self._nodes.reshape((-1,) + (1,) * len(shape))
            sub = ctx.kids[key] = _Ctx(env, ctx, frozenset((self.var,)))
        val = np.asarray(_ev(self.child, sub))
        if val.ndim == len(shape) + 1:
            return np.tensordot(self._weights, val, axes=(0, 0))
        return val * float(self._weights.sum())

    def _d(self, v):
        if v == self.var:
            return ZERO
        return quad(diff(self.child, v), self.var, self.n)

    def _fmt(self, d):
        return f"∫[{_r(self.child, d)}]d{self.var}"


class MatInv(Expr):
    """Pointwise inverse of an n x n matrix of expressions (value is an array)."""

    __slots__ = ("entries", "dim")

    def __init__(self, entries, dim):
        super().__init__(frozenset().union(*(e.free for e in entries)))
        self.entries = entries
        self.dim = dim

    def _eval(self, ctx):
        vals = [_ev(e, ctx) for e in self.entries]
        shape = np.broadcast_shapes(*(np.shape(x) for x in vals))
        a = np.stack([np.broadcast_to(x, shape) for x in vals], axis=-1)
        a = a.reshape(shape + (self.dim, self.dim))
        return np.linalg.inv(a)

    def _d(self, v):  # never differentiated directly; entries carry the rule
        raise TypeError("MatInv is not a scalar expression")


class MatInvEntry(Expr):
    __slots__ = ("mat", "i", "j")

    def __init__(self, mat, i, j):
        super().__init__(mat.free)
        self.mat = mat
        self.i = i
        self.j = j

    def _eval(self, ctx):
        return _ev(self.mat, ctx)[..., self.i, self.j]

    def _d(self, v):
        m, n = self.mat, self.mat.dim
        terms = []
        for k in range(n):
            for l in range(n):
                da = diff(m.entries[k * n + l], v)
                if da.is_zero():
                    continue
                terms.append(mul(_entry(m, self.i, k), da, _entry(m, l, self.j)))
        return scale(add(*terms), -1.0)

    def _fmt(self, d):
        return f"inv{self.i}{self.j}"


class InvMap(Expr):
    """Solution q of F(q) = target; value is a tuple of component arrays."""

    __slots__ = ("comps", "xvars", "target", "_jac")

    def __init__(self, comps, xvars, target):
        free = set()
        for c in comps:
            free |= c.free - set(xvars)
        for p in target:
            free |= p.free
        super().__init__(frozenset(free))
        self.comps = comps
        self.xvars = xvars
        self.target = target
        self._jac = tuple(diff(c, x) for c in comps for x in xvars)

    def _eval(self, ctx):
        n = len(self.xvars)
        p = [np.asarray(_ev(t, ctx), dtype=float) for t in self.target]
        bound = frozenset(self.xvars)

        def at(q, exprs):
            env = dict(ctx.env)
            env.update(zip(self.xvars, q))
            sub = _Ctx(env, ctx, bound)
            return [_ev(e, sub) for e in exprs]

        shape = np.broadcast_shapes(*(x.shape for x in p))
        q = [np.array(np.broadcast_to(x, shape)) for x in p]
        fq = at(q, self.comps)
        shape = np.broadcast_shapes(shape, *(np.shape(f) for f in fq))
        q = [np.array(np.broadcast_to(x, shape)) for x in q]
        pb = [np.broadcast_to(x, shape) for x in p]
        scale_ = 1.0 + max((float(np.max(np.abs(x))) if x.size else 0.0) for x in pb)
        res = np.stack([np.broadcast_to(f, shape) - t for f, t in zip(fq, pb)], axis=-1)
        err = float(np.max(np.abs(res))) if res.size else 0.0
        for _ in range(NEWTON_MAX_ITER):
            if err <= 1e-15 * scale_:
                break
            jv = at(q, self._jac)
            jac = np.stack([np.broadcast_to(x, shape) for x in jv], axis=-1).reshape(shape + (n, n))
            det = np.linalg.det(jac)
            if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-14):
                raise SingularJacobian("singular Jacobian during Newton inversion")
            step = np.linalg.solve(jac, res[..., None])[..., 0]
            lam = 1.0
            while True:
                qn = [x - lam * step[..., i] for i, x in enumerate(q)]
                fn = at(qn, self.comps)
                rn = np.stack([np.broadcast_to(f, shape) - t for f, t in zip(fn, pb)], axis=-1)
                en = float(np.max(np.abs(rn))) if rn.size else 0.0
                if en < err or lam < 1e-3 or en <= 1e-15 * scale_:
                    break
                lam *= 0.5
            if en >= err and err <= NEWTON_TOL:
                break
            q, res, err = qn, rn, en
        if not err <= NEWTON_TOL * scale_:
            raise NoConvergence(f"Newton inversion stalled at residual {err:.3e}")
        return tuple(q)

    def _d(self, v):
        raise TypeError("InvMap is not a scalar expression")


class InvComp(Expr):
    __slots__ = ("inv", "k")

    def __init__(self, inv, k):
        super().__init__(inv.free)
        self.inv = inv
        self.k = k

    def _eval(self, ctx):
        return _ev(self.inv, ctx)[self.k]

    def _d(self, v):
        inv = self.inv
        n = len(inv.xvars)
        q = tuple(_comp(inv, i) for i in range(n))
        at_q = dict(zip(inv.xvars, q))
        jac = mat_inv([subst(j, at_q) for j in inv._jac], n)
        rhs = []
        for i in range(n):
            r = diff(inv.target[i], v)
            if v not in inv.xvars:
                r = r - subst(diff(inv.comps[i], v), at_q)
            rhs.append(r)
        return add(*(mul(_entry(jac, self.k, i), rhs[i]) for i in range(n) if not rhs[i].is_zero()))

    def _fmt(self, d):
        return f"inv[{self.k}]"


# ---------------------------------------------------------------------------
# constructors with light canonicalization
# ---------------------------------------------------------------------------

def const(value: float) -> Expr:
    value = float(value)
    if value == 0.0:
        value = 0.0  # fold -0.0
    return _intern(("c", value), lambda: Const(value))


ZERO = const(0.0)
ONE = const(1.0)


def var(name: str) -> Expr:
    return _intern(("v", name), lambda: Var(name))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def _split_scale(e: Expr) -> tuple[float, Expr]:
    if isinstance(e, Add) and e.c0 == 0.0 and len(e.terms) == 1:
        return e.coefs[0], e.terms[0]
    return 1.0, e


def _make_add(items: dict, c0: float) -> Expr:
    pairs = [(t, c) for t, c in items.items() if c != 0.0]
    if not pairs:
        return const(c0)
    if len(pairs) == 1 and c0 == 0.0 and pairs[0][1] == 1.0:
        return pairs[0][0]
    pairs.sort(key=lambda tc: tc[0].sig)
    terms = tuple(t for t, _ in pairs)
    coefs = tuple(c for _, c in pairs)
    key = ("add", tuple(t.sig for t in terms), coefs, c0)
    return _intern(key, lambda: Add(terms, coefs, c0))


def add(*args: Expr) -> Expr:
    items: dict = {}
    c0 = 0.0
    for a in args:
        a = as_expr(a)
        if isinstance(a, Const):
            c0 += a.value
        elif isinstance(a, Add):
            c0 += a.c0
            for t, c in zip(a.terms, a.coefs):
                items[t] = items.get(t, 0.0) + c
        else:
            items[a] = items.get(a, 0.0) + 1.0
    return _make_add(items, c0)


def scale(e: Expr, c: float) -> Expr:
    c = float(c)
    if c == 1.0:
        return e
    if c == 0.0 or e.is_zero():
        return ZERO
    if isinstance(e, Const):
        return const(c * e.value)
    if isinstance(e, Add):
        return _make_add({t: c * k for t, k in zip(e.terms, e.coefs)}, c * e.c0)
    return _make_add({e: c}, 0.0)


def mul(*args: Expr) -> Expr:
    coef = 1.0
    powers: dict = {}
    for a in args:
        a = as_expr(a)
        if isinstance(a, Const):
            coef *= a.value
            continue
        c, a = _split_scale(a)
        coef *= c
        if isinstance(a, Mul):
            fs = a.factors
        else:
            fs = (a,)
        for f in fs:
            if isinstance(f, Pow):
                powers[f.base] = powers.get(f.base, 0) + f.n
            else:
                powers[f] = powers.get(f, 0) + 1
    if coef == 0.0:
        return ZERO
    factors = []
    for b, n in powers.items():
        if n == 0:
            continue
        factors.append(b if n == 1 else _pow_node(b, n))
    if not factors:
        return const(coef)
    if len(factors) == 1:
        node = factors[0]
    else:
        factors.sort(key=lambda f: f.sig)
        ft = tuple(factors)
        node = _intern(("mul", tuple(f.sig for f in ft)), lambda: Mul(ft))
    return scale(node, coef)


def _pow_node(b: Expr, n: int) -> Expr:
    return _intern(("pow", b.sig, n), lambda: Pow(b, n))


def power(e: Expr, n: int) -> Expr:
    e = as_expr(e)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return e
    if isinstance(e, Const):
        return const(e.value ** n)
    c, b = _split_scale(e)
    if isinstance(b, Pow):
        return scale(power(b.base, b.n * n), c ** n)
    if isinstance(b, Mul):
        return scale(mul(*(power(f, n) for f in b.factors)), c ** n)
    return scale(_pow_node(b, n), c ** n)


def sin(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return const(math.sin(e.value))
    return _intern(("sin", e.sig), lambda: Sin(e))


def cos(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return const(math.cos(e.value))
    return _intern(("cos", e.sig), lambda: Cos(e))


def exp(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return const(math.exp(e.value))
    return _intern(("exp", e.sig), lambda: Exp(e))


def subst(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Compose: ``e`` with the variables in ``mapping`` replaced by expressions."""
    e = as_expr(e)
    mapping = {k: as_expr(v) for k, v in mapping.items() if k in e.free}
    mapping = {k: v for k, v in mapping.items() if not (isinstance(v, Var) and v.name == k)}
    if not mapping:
        return e
    if isinstance(e, Var):
        return mapping[e.name]
    # nested substitutions are kept as nested nodes; merging them eagerly
    # blows up exponentially on long composition chains such as RK4 flows
    names = tuple(sorted(mapping))
    values = tuple(mapping[k] for k in names)
    key = ("subst", e.sig, names, tuple(v.sig for v in values))
    return _intern(key, lambda: Subst(e, names, values))


def quad(e: Expr, var_name: str, n: int) -> Expr:
    """Simpson quadrature of ``e`` over ``var_name`` on [0, 1] with ``n`` intervals."""
    e = as_expr(e)
    if var_name not in e.free:
        return e
    if isinstance(e, Add):
        # linear: keep constant and var-free parts out of the quadrature
        inner = {}
        outer = {}
        for t, c in zip(e.terms, e.coefs):
            (inner if var_name in t.free else outer)[t] = c
        if outer or e.c0:
            return add(_make_add(outer, e.c0), _quad_node(_make_add(inner, 0.0), var_name, n))
    return _quad_node(e, var_name, n)


def _quad_node(e, var_name, n):
    return _intern(("quad", e.sig, var_name, n), lambda: Quad(e, var_name, n))


def mat_inv(entries: Sequence[Expr], dim: int) -> Expr:
    entries = tuple(as_expr(x) for x in entries)
    if len(entries) != dim * dim:
        raise ValueError("matrix entry count does not match dimension")
    return _intern(("matinv", tuple(x.sig for x in entries), dim), lambda: MatInv(entries, dim))


def _entry(m: Expr, i: int, j: int) -> Expr:
    return _intern(("minv", m.sig, i, j), lambda: MatInvEntry(m, i, j))


def _comp(inv: Expr, k: int) -> Expr:
    return _intern(("invc", inv.sig, k), lambda: InvComp(inv, k))


def inverse_map(comps: Sequence[Expr], xvars: Sequence[str], target: Sequence[Expr]) -> tuple[Expr, ...]:
    """Expressions for q with comps(q) = target, where comps are functions of ``xvars``."""
    comps = tuple(as_expr(c) for c in comps)
    target = tuple(as_expr(t) for t in target)
    xvars = tuple(xvars)
    if all(isinstance(c, Var) and c.name == x for c, x in zip(comps, xvars)):
        return target
    key = ("invmap", tuple(c.sig for c in comps), xvars, tuple(t.sig for t in target))
    inv = _intern(key, lambda: InvMap(comps, xvars, target))
    return tuple(_comp(inv, k) for k in range(len(xvars)))


def diff(e: Expr, v: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``v``."""
    if v not in e.free:
        return ZERO
    d = e._diff.get(v)
    if d is None:
        d = e._d(v)
        e._diff[v] = d
    return d


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

class _Ctx:
    __slots__ = ("env", "memo", "parent", "bound", "kids")

    def __init__(self, env, parent=None, bound=frozenset()):
        self.env = env
        self.memo = {}
        self.kids = {}
        self.parent = parent
        self.bound = bound


def _env_shape(env) -> tuple:
    return np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()


def _ev(node: Expr, ctx: _Ctx):
    free = node.free
    while ctx.parent is not None and not (free & ctx.bound):
        ctx = ctx.parent
    memo = ctx.memo
    try:
        return memo[node]
    except KeyError:
        pass
    val = node._eval(ctx)
    memo[node] = val
    return val


def evaluate(exprs: Iterable[Expr] | Expr, env: Mapping[str, object]) -> list[np.ndarray] | np.ndarray:
    """Evaluate one expression or a list of them with variables bound by ``env``.

    Values in ``env`` are broadcast against each other; every result is returned
    with the full broadcast shape.
    """
    single = isinstance(exprs, Expr)
    items = [exprs] if single else [as_expr(e) for e in exprs]
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    ctx = _Ctx(env)
    shape = _env_shape(env)
    out = []
    for e in items:
        missing = e.free - env.keys()
        if missing:
            raise KeyError(f"unbound variables {sorted(missing)}")
        val = np.asarray(_ev(e, ctx), dtype=float)
        out.append(np.array(np.broadcast_to(val, np.broadcast_shapes(shape, val.shape))))
    return out[0] if single else out
