"""Hypergeometric and elliptic building blocks, and closed-form expression trees.

Complete elliptic integrals use the normalisation ``K~ = (2/pi) K`` and
``E~ = (2/pi) E`` so that both are plain hypergeometric series in ``t = k^2``:

    K~ = 2F1(1/2, 1/2; 1; t),    E~ = 2F1(1/2, -1/2; 1; t).

An :class:`AlgExpr` tree is evaluated to a :class:`PrefactoredSeries`; the
evaluator deepens its working precision until the requested number of body
terms survives any cancellation.
"""

from __future__ import annotations

import ast
from functools import lru_cache
from typing import Callable, Mapping

from ._backend import ONE, Q, to_q
from .series import PrefactoredSeries, Series


class InvalidHypergeometric(ValueError):
    pass


class ExpressionError(ValueError):
    pass


# --------------------------------------------------------------------------
# hypergeometric series
# --------------------------------------------------------------------------


@lru_cache(maxsize=256)
def _hyp2f1_cached(a, b, c, order: int) -> tuple:
    out = [ONE]
    term = ONE
    for n in range(order):
        term = term * (a + n) * (b + n) / ((c + n) * (n + 1))
        out.append(term)
    return tuple(out)


def hyp2f1_series(a, b, c, order: int) -> Series:
    """``2F1(a, b; c; t)`` to ``t^order`` by the term-ratio recurrence."""
    a, b, c = to_q(a), to_q(b), to_q(c)
    if order < 0:
        raise ValueError("order must be non-negative")
    if c.denominator == 1 and c <= 0:
        raise InvalidHypergeometric(f"lower parameter c={c} is a non-positive integer")
    return Series(list(_hyp2f1_cached(a, b, c, order)), order)


def elliptic_k(order: int) -> Series:
    return hyp2f1_series(Q(1, 2), Q(1, 2), 1, order)


def elliptic_e(order: int) -> Series:
    return hyp2f1_series(Q(1, 2), Q(-1, 2), 1, order)


def elliptic_k_prime(order: int) -> Series:
    """dK~/dt = (1/4) 2F1(3/2, 3/2; 2; t)."""
    return hyp2f1_series(Q(3, 2), Q(3, 2), 2, order).scale(Q(1, 4))


def elliptic_e_prime(order: int) -> Series:
    """dE~/dt = -(1/4) 2F1(3/2, 1/2; 2; t), which equals (E~ - K~)/(2t)."""
    return hyp2f1_series(Q(3, 2), Q(1, 2), 2, order).scale(Q(-1, 4))


def shifted_series(order: int) -> Series:
    """``2 (1 - sqrt(1-t)) / t``, analytic at 0 with constant term 1."""
    half = Series.binomial(Q(1, 2), order + 1)
    # 1 - sqrt(1-t) has zero constant term; drop it and divide by t
    return Series([-2 * c for c in half.coeffs[1:]], order)


# --------------------------------------------------------------------------
# expression trees
# --------------------------------------------------------------------------


def _ps(s: Series) -> PrefactoredSeries:
    return PrefactoredSeries(0, 0, s)


class AlgExpr:
    """Node of a closed-form expression; ``ev(n)`` gives ~n body terms."""

    def ev(self, n: int, env) -> PrefactoredSeries:  # pragma: no cover - abstract
        raise NotImplementedError

    def __add__(self, other):
        return Sum([self, _lift(other)])

    def __radd__(self, other):
        return Sum([_lift(other), self])

    def __sub__(self, other):
        return Sum([self, Product([Const(-1), _lift(other)])])

    def __rsub__(self, other):
        return Sum([_lift(other), Product([Const(-1), self])])

    def __mul__(self, other):
        return Product([self, _lift(other)])

    def __rmul__(self, other):
        return Product([_lift(other), self])

    def __neg__(self):
        return Product([Const(-1), self])

    def __pow__(self, r):
        return Power(self, to_q(r))

    def __truediv__(self, other):
        return Product([self, Power(_lift(other), Q(-1))])


def _lift(x) -> AlgExpr:
    if isinstance(x, AlgExpr):
        return x
    return Const(x)


class Const(AlgExpr):
    def __init__(self, c):
        self.c = to_q(c)

    def ev(self, n, env):
        return _ps(Series.constant(self.c, n))

    def __repr__(self):
        return f"Const({self.c})"


class VarT(AlgExpr):
    def ev(self, n, env):
        return PrefactoredSeries(1, 0, Series.one(n))

    def __repr__(self):
        return "t"


class OneMinusT(AlgExpr):
    def ev(self, n, env):
        return PrefactoredSeries(0, 1, Series.one(n))

    def __repr__(self):
        return "(1-t)"


class EllipticK(AlgExpr):
    def ev(self, n, env):
        return _ps(elliptic_k(n))

    def __repr__(self):
        return "K"


class EllipticE(AlgExpr):
    def ev(self, n, env):
        return _ps(elliptic_e(n))

    def __repr__(self):
        return "E"


class Hyp2F1(AlgExpr):
    def __init__(self, a, b, c):
        self.a, self.b, self.c = to_q(a), to_q(b), to_q(c)

    def ev(self, n, env):
        return _ps(hyp2f1_series(self.a, self.b, self.c, n))

    def __repr__(self):
        return f"hyp2f1({self.a},{self.b},{self.c})"


class Shifted(AlgExpr):
    def ev(self, n, env):
        return _ps(shifted_series(n))

    def __repr__(self):
        return "shifted"


class Sum(AlgExpr):
    def __init__(self, terms):
        self.terms = list(terms)

    def ev(self, n, env):
        acc = None
        for term in self.terms:
            v = term.ev(n, env)
            acc = v if acc is None else acc + v
        return acc

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.terms)) + ")"


class Product(AlgExpr):
    def __init__(self, factors):
        self.factors = list(factors)

    def ev(self, n, env):
        acc = None
        for f in self.factors:
            v = f.ev(n, env)
            acc = v if acc is None else acc * v
        return acc

    def __repr__(self):
        return "*".join(map(repr, self.factors))


class Power(AlgExpr):
    def __init__(self, base: AlgExpr, r):
        self.base = base
        self.r = to_q(r)

    def ev(self, n, env):
        b = self.base.ev(n, env)
        if b.is_zero():
            raise ExpressionError(f"power of a vanishing base {self.base!r}")
        return b.pow_rational(self.r)

    def __repr__(self):
        return f"({self.base!r})^({self.r})"


class Derivative(AlgExpr):
    """d/dt of a subexpression."""

    def __init__(self, inner: AlgExpr):
        self.inner = inner

    def ev(self, n, env):
        return derivative_ps(self.inner.ev(n + 1, env))

    def __repr__(self):
        return f"d({self.inner!r})"


class Ref(AlgExpr):
    """Another catalog entry, resolved through ``env`` at evaluation time."""

    def __init__(self, name: str):
        self.name = name

    def ev(self, n, env):
        if env is None or self.name not in env:
            raise ExpressionError(f"unresolved reference {self.name!r}")
        return env[self.name](n)

    def __repr__(self):
        return f"ref({self.name})"


def derivative_ps(f: PrefactoredSeries) -> PrefactoredSeries:
    """Derivative of t^a (1-t)^b B as another prefactored series.

    d/dt = t^(a-1) (1-t)^(b-1) [a (1-t) B - b t B + t (1-t) B'].
    """
    a, b, body = f.a, f.b, f.body
    n = body.order
    if n < 1:
        raise ExpressionError("derivative needs at least two body terms")
    lin = Series.polynomial([a, -a - b], n)
    tt = Series.polynomial([0, 1, -1], n - 1)
    core = lin * body + (tt * body.derivative()).truncate(n - 1)
    return PrefactoredSeries(a - 1, b - 1, core.truncate(n - 1))


def eval_alg_expr(e: AlgExpr, order: int, env: Mapping[str, Callable] | None = None) -> PrefactoredSeries:
    """Expand ``e`` so the body is exact through ``order`` relative terms."""
    if order < 0:
        raise ValueError("order must be non-negative")
    work = order
    # exact cancellations eat precision; give up well before products get huge
    budget = 4 * order + 64
    while True:
        r = e.ev(work, env)
        have = r.body.order
        if have >= order and not r.is_zero():
            return PrefactoredSeries(r.a, r.b, r.body.truncate(order))
        work += max(order - have, 0) + 4 + (work - order)
        if work > budget:
            break
    if r.is_zero():
        raise ExpressionError("expression vanishes to every tried precision")
    raise ExpressionError("could not reach the requested precision")


# --------------------------------------------------------------------------
# text syntax
# --------------------------------------------------------------------------

_NAMES = {
    "t": VarT,
    "K": EllipticK,
    "E": EllipticE,
    "shifted": Shifted,
}


def _const_value(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return to_q(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const_value(node.operand)
        if v is None:
            return None
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Div, ast.Mult, ast.Add, ast.Sub)):
        x, y = _const_value(node.left), _const_value(node.right)
        if x is None or y is None:
            return None
        if isinstance(node.op, ast.Div):
            return x / y
        if isinstance(node.op, ast.Mult):
            return x * y
        if isinstance(node.op, ast.Add):
            return x + y
        return x - y
    return None


def _build(node) -> AlgExpr:
    c = _const_value(node)
    if c is not None:
        return Const(c)
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ExpressionError(f"unknown symbol {node.id!r}")
        return _NAMES[node.id]()
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_build(node.operand)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.UAdd):
        return _build(node.operand)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            r = _const_value(node.right)
            if r is None:
                raise ExpressionError("exponents must be rational constants")
            left = node.left
            if isinstance(left, ast.BinOp) and isinstance(left.op, ast.Sub) and _const_value(left.left) == 1 \
                    and isinstance(left.right, ast.Name) and left.right.id == "t":
                return Power(OneMinusT(), r)
            return Power(_build(left), r)
        x, y = _build(node.left), _build(node.right)
        if isinstance(node.op, ast.Add):
            return Sum([x, y])
        if isinstance(node.op, ast.Sub):
            return Sum([x, -y])
        if isinstance(node.op, ast.Mult):
            return Product([x, y])
        if isinstance(node.op, ast.Div):
            return Product([x, Power(y, -1)])
        raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn, args = node.func.id, node.args
        if fn == "hyp2f1":
            vals = [_const_value(a) for a in args]
            if len(vals) != 3 or any(v is None for v in vals):
                raise ExpressionError("hyp2f1 takes three rational constants")
            return Hyp2F1(*vals)
        if fn == "ref":
            if len(args) != 1 or not isinstance(args[0], ast.Name):
                raise ExpressionError("ref takes one bare identifier")
            return Ref(args[0].id)
        if fn == "d":
            if len(args) != 1:
                raise ExpressionError("d takes one argument")
            return Derivative(_build(args[0]))
        raise ExpressionError(f"unknown function {fn!r}")
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def parse_expr(text: str) -> AlgExpr:
    """Parse ``2*(1-(1-t)^(1/2))/t``-style text; ``^`` is exponentiation."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _build(tree.body)
