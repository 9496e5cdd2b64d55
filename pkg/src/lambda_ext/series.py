"""Truncated power series in ``t`` over exact coefficient rings.

Two coefficient rings are supported:

* the rationals (backend scalar type, see :mod:`lambda_ext._backend`);
* univariate polynomials over the rationals in one named formal parameter
  (:class:`ParamPoly`), used for one-parameter solution families.

A :class:`Series` of order ``n`` knows the coefficients of ``t^0 .. t^n``;
nothing above ``t^n`` is ever claimed.  Every operation propagates the
provable order pessimistically.
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

from ._backend import (
    ONE,
    ZERO,
    Q,
    conv_p,
    conv_q,
    fmt_q,
    is_rational,
    poly_addto,
    poly_mul,
    rational_root,
    to_q,
)

PARAMETER_NAMES = ("lambda_sq", "mu", "alpha", "beta", "M_def", "rho_def")


class RingMismatch(TypeError):
    """Operands live over different coefficient rings."""


class NotInvertible(ArithmeticError):
    """Leading coefficient cannot be inverted in the coefficient ring."""


class ValuationError(ArithmeticError):
    """Division by a series of positive valuation that the numerator lacks."""


# --------------------------------------------------------------------------
# ParamPoly
# --------------------------------------------------------------------------


def _trim(c: list) -> list:
    while c and not c[-1]:
        c.pop()
    return c


def _padd(p, q) -> list:
    out = list(p)
    poly_addto(out, q)
    return _trim(out)


def _pneg(p) -> list:
    return [-x for x in p]


def _pscale(p, s) -> list:
    if not s:
        return []
    return [x * s for x in p]


class ParamPoly:
    """Polynomial in a single formal parameter with rational coefficients.

    Immutable.  ``coeffs[i]`` multiplies ``name**i``; trailing zeros are
    trimmed, so the zero polynomial has an empty coefficient tuple.
    """

    __slots__ = ("coeffs", "name")

    def __init__(self, coeffs: Iterable, name: str):
        if name not in PARAMETER_NAMES and not name.startswith("p_"):
            raise ValueError(f"unknown parameter name {name!r}")
        self.coeffs = tuple(_trim([to_q(c) for c in coeffs]))
        self.name = name

    @classmethod
    def var(cls, name: str) -> "ParamPoly":
        return cls([0, 1], name)

    @classmethod
    def const(cls, c, name: str) -> "ParamPoly":
        return cls([c], name)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    def constant(self):
        return self.coeffs[0] if self.coeffs else ZERO

    def coefficient(self, i: int):
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else ZERO

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def _other(self, other) -> tuple:
        if isinstance(other, ParamPoly):
            if other.name != self.name:
                raise RingMismatch(f"parameters {self.name} and {other.name} differ")
            return other.coeffs
        if is_rational(other):
            o = to_q(other)
            return (o,) if o else ()
        return NotImplemented

    def __add__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return ParamPoly(_padd(self.coeffs, o), self.name)

    __radd__ = __add__

    def __neg__(self):
        return ParamPoly(_pneg(self.coeffs), self.name)

    def __sub__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return ParamPoly(_padd(self.coeffs, _pneg(o)), self.name)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._other(other)
        if o is NotImplemented:
            return o
        return ParamPoly(poly_mul(self.coeffs, o), self.name)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("ParamPoly powers must be non-negative integers")
        out = ParamPoly([1], self.name)
        for _ in range(k):
            out = out * self
        return out

    def __truediv__(self, other):
        if is_rational(other):
            o = to_q(other)
            if not o:
                raise ZeroDivisionError("division of ParamPoly by zero")
            return ParamPoly([c / o for c in self.coeffs], self.name)
        if isinstance(other, ParamPoly):
            return self.exact_div(other)
        return NotImplemented

    def divmod(self, other: "ParamPoly"):
        o = list(self._other(other))
        if not o:
            raise ZeroDivisionError("division by the zero polynomial")
        rem = list(self.coeffs)
        quo = [ZERO] * max(len(rem) - len(o) + 1, 0)
        lead = o[-1]
        for k in range(len(rem) - len(o), -1, -1):
            c = rem[k + len(o) - 1] / lead
            quo[k] = c
            if c:
                for i, x in enumerate(o):
                    rem[k + i] -= c * x
        return ParamPoly(quo, self.name), ParamPoly(rem, self.name)

    def exact_div(self, other) -> "ParamPoly":
        q, r = self.divmod(other)
        if r:
            raise NotInvertible(f"{self} is not divisible by {other}")
        return q

    def __call__(self, value):
        v = to_q(value)
        acc = ZERO
        for c in reversed(self.coeffs):
            acc = acc * v + c
        return acc

    def compose(self, inner: "ParamPoly | object") -> "ParamPoly":
        """Substitute the parameter by ``inner`` (a ParamPoly or a rational)."""
        if not isinstance(inner, ParamPoly):
            return self(inner)
        acc = ParamPoly([], inner.name)
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return acc

    def rename(self, name: str) -> "ParamPoly":
        return ParamPoly(self.coeffs, name)

    def __eq__(self, other):
        if isinstance(other, ParamPoly):
            return self.name == other.name and self.coeffs == other.coeffs
        if is_rational(other):
            return self.is_constant() and self.constant() == to_q(other)
        return NotImplemented

    def __hash__(self):
        return hash((self.name, self.coeffs))

    def __repr__(self):
        return f"ParamPoly({[fmt_q(c) for c in self.coeffs]}, {self.name!r})"

    def __str__(self):
        return format_poly(self.coeffs, self.name)


def format_poly(coeffs: Sequence, var: str) -> str:
    parts = []
    for i, c in enumerate(coeffs):
        if not c:
            continue
        mag = fmt_q(abs(c))
        pw = var if i == 1 else f"{var}^{i}"
        if i == 0:
            body = mag
        elif mag == "1":
            body = pw
        else:
            body = f"{mag}*{pw}"
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    if not parts:
        return "0"
    head_sign, head = parts[0]
    out = ("-" if head_sign == "-" else "") + head
    for sign, body in parts[1:]:
        out += f" {sign} {body}"
    return out


_TERM_RE = re.compile(
    r"([+-])?\s*(\d+(?:\s*/\s*\d+)?)?\s*(?:\*?\s*([A-Za-z_][A-Za-z_0-9]*)(?:\s*\^\s*(\d+))?)?"
)


def parse_poly(text: str, name: str | None = None) -> tuple[list, str | None]:
    """Parse ``"c0 + c1*x + c2*x^2"`` into (coefficients, variable name)."""
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial")
    coeffs: list = []
    var = name
    pos = 0
    while pos < len(s):
        while pos < len(s) and s[pos].isspace():
            pos += 1
        if pos >= len(s):
            break
        m = _TERM_RE.match(s, pos)
        if not m or m.end() == pos or not (m.group(2) or m.group(3)):
            raise ValueError(f"cannot parse polynomial {text!r} at {s[pos:]!r}")
        sign, num, v, power = m.groups()
        c = to_q(num.replace(" ", "")) if num else ONE
        if sign == "-":
            c = -c
        if v is None:
            k = 0
        else:
            if var is None:
                var = v
            elif v != var:
                raise ValueError(f"mixed variables {var!r} and {v!r} in {text!r}")
            k = int(power) if power else 1
        if len(coeffs) <= k:
            coeffs.extend([ZERO] * (k + 1 - len(coeffs)))
        coeffs[k] += c
        pos = m.end()
    return _trim(coeffs), var


# --------------------------------------------------------------------------
# Series
# --------------------------------------------------------------------------


def _raw_coeff(c, param):
    """Coefficient to internal form: rational scalar, or trimmed list when param."""
    if isinstance(c, ParamPoly):
        if param is None:
            raise RingMismatch("ParamPoly coefficient in a rational series")
        if c.name != param:
            raise RingMismatch(f"parameters {c.name} and {param} differ")
        return list(c.coeffs)
    q = to_q(c)
    if param is None:
        return q
    return [q] if q else []


class Series:
    """Truncated power series ``c_0 + c_1 t + ... + c_n t^n + O(t^{n+1})``.

    ``param`` is None for rational coefficients, otherwise the name of the
    formal parameter of the :class:`ParamPoly` coefficient ring.
    """

    __slots__ = ("_c", "order", "param")

    def __init__(self, coeffs: Iterable, order: int | None = None, param: str | None = None):
        coeffs = list(coeffs)
        if param is None:
            for c in coeffs:
                if isinstance(c, ParamPoly):
                    param = c.name
                    break
        raw = [_raw_coeff(c, param) for c in coeffs]
        if order is None:
            order = len(raw) - 1
        if order < 0:
            raise ValueError("a series must know at least its constant term")
        zero = ZERO if param is None else []
        if len(raw) <= order:
            raw.extend([zero] * (order + 1 - len(raw)) if param is None else [[] for _ in range(order + 1 - len(raw))])
        self._c = raw[: order + 1]
        self.order = order
        self.param = param

    @classmethod
    def _wrap(cls, raw: list, param: str | None) -> "Series":
        s = cls.__new__(cls)
        s._c = raw
        s.order = len(raw) - 1
        s.param = param
        return s

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, order: int, param: str | None = None) -> "Series":
        if param is None:
            return cls._wrap([ZERO] * (order + 1), None)
        return cls._wrap([[] for _ in range(order + 1)], param)

    @classmethod
    def one(cls, order: int, param: str | None = None) -> "Series":
        return cls.constant(1, order, param)

    @classmethod
    def constant(cls, c, order: int, param: str | None = None) -> "Series":
        s = cls.zero(order, param)
        s._c[0] = _raw_coeff(c, param)
        return s

    @classmethod
    def monomial(cls, k: int, order: int, c=1, param: str | None = None) -> "Series":
        s = cls.zero(order, param)
        if k <= order:
            s._c[k] = _raw_coeff(c, param)
        return s

    @classmethod
    def t(cls, order: int) -> "Series":
        return cls.monomial(1, order)

    @classmethod
    def polynomial(cls, coeffs: Sequence, order: int, param: str | None = None) -> "Series":
        """An exact polynomial in t, padded or truncated to ``order``."""
        return cls(list(coeffs[: order + 1]), order, param)

    @classmethod
    def binomial(cls, b, order: int) -> "Series":
        """``(1 - t)^b`` for rational ``b``."""
        b = to_q(b)
        out = [ONE]
        c = ONE
        for n in range(1, order + 1):
            c = c * (b - (n - 1)) / n
            out.append(-c if n % 2 else c)
        return cls._wrap(out, None)

    # -- accessors ---------------------------------------------------------

    def _out(self, raw):
        if self.param is None:
            return raw
        return ParamPoly(raw, self.param)

    def __getitem__(self, n: int):
        if n < 0 or n > self.order:
            raise IndexError(f"coefficient t^{n} is outside the provable order {self.order}")
        return self._out(self._c[n])

    @property
    def coeffs(self) -> list:
        return [self._out(c) for c in self._c]

    def __len__(self) -> int:
        return self.order + 1

    @property
    def is_param(self) -> bool:
        return self.param is not None

    def valuation(self) -> int | None:
        """Index of the first nonzero coefficient, or None if zero to the known order."""
        for i, c in enumerate(self._c):
            if c:
                return i
        return None

    def is_zero(self) -> bool:
        return self.valuation() is None

    def truncate(self, n: int) -> "Series":
        if n > self.order:
            raise ValueError(f"cannot extend a series of order {self.order} to {n}")
        return Series._wrap(self._c[: n + 1], self.param)

    # -- ring plumbing -----------------------------------------------------

    def _promote(self, param: str | None) -> "Series":
        if param == self.param:
            return self
        if self.param is not None:
            raise RingMismatch(f"parameters {self.param} and {param} differ")
        return Series._wrap([[c] if c else [] for c in self._c], param)

    def _common(self, other: "Series") -> tuple["Series", "Series", str | None]:
        if not isinstance(other, Series):
            raise TypeError(f"expected a Series, got {type(other).__name__}")
        if self.param is not None and other.param is not None and self.param != other.param:
            raise RingMismatch(f"parameters {self.param} and {other.param} differ")
        param = self.param or other.param
        return self._promote(param), other._promote(param), param

    def _scalar(self, s):
        if isinstance(s, ParamPoly):
            return s
        if is_rational(s):
            return to_q(s)
        return None

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Series):
            sc = self._scalar(other)
            if sc is None:
                return NotImplemented
            other = Series.constant(sc, self.order, sc.name if isinstance(sc, ParamPoly) else None)
        a, b, param = self._common(other)
        n = min(a.order, b.order)
        if param is None:
            return Series._wrap([a._c[i] + b._c[i] for i in range(n + 1)], None)
        return Series._wrap([_padd(a._c[i], b._c[i]) for i in range(n + 1)], param)

    __radd__ = __add__

    def __neg__(self):
        if self.param is None:
            return Series._wrap([-c for c in self._c], None)
        return Series._wrap([_pneg(c) for c in self._c], self.param)

    def __sub__(self, other):
        if not isinstance(other, Series):
            sc = self._scalar(other)
            if sc is None:
                return NotImplemented
            return self + (-sc)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "Series":
        if isinstance(s, ParamPoly):
            base = self._promote(s.name)
            return Series._wrap([_trim(poly_mul(c, s.coeffs)) for c in base._c], s.name)
        s = to_q(s)
        if self.param is None:
            return Series._wrap([c * s for c in self._c], None)
        return Series._wrap([_pscale(c, s) for c in self._c], self.param)

    def __mul__(self, other):
        if not isinstance(other, Series):
            sc = self._scalar(other)
            if sc is None:
                return NotImplemented
            return self.scale(sc)
        a, b, param = self._common(other)
        n = min(a.order, b.order)
        if param is None:
            return Series._wrap(conv_q(a._c, b._c, n), None)
        return Series._wrap([_trim(c) for c in conv_p(a._c, b._c, n)], param)

    def __rmul__(self, other):
        sc = self._scalar(other)
        if sc is None:
            return NotImplemented
        return self.scale(sc)

    def __pow__(self, k):
        if isinstance(k, int) and k >= 0:
            out = Series.one(self.order, self.param)
            base = self
            while k:
                if k & 1:
                    out = out * base
                k >>= 1
                if k:
                    base = base * base
            return out
        return self.pow_rational(k)

    def __truediv__(self, other):
        if not isinstance(other, Series):
            sc = self._scalar(other)
            if sc is None:
                return NotImplemented
            if isinstance(sc, ParamPoly):
                if not sc.is_constant() or not sc:
                    raise NotInvertible(f"cannot divide by {sc}")
                sc = sc.constant()
            if not sc:
                raise ZeroDivisionError("series divided by zero")
            return self.scale(1 / sc)
        return div(self, other)

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self.order == other.order and self.coeffs == other.coeffs

    __hash__ = None

    # -- calculus ----------------------------------------------------------

    def derivative(self) -> "Series":
        if self.order < 1:
            raise ValueError("derivative of an order-0 series carries no information")
        if self.param is None:
            return Series._wrap([self._c[k] * k for k in range(1, self.order + 1)], None)
        return Series._wrap([_pscale(self._c[k], Q(k)) for k in range(1, self.order + 1)], self.param)

    def integral(self, c0=0) -> "Series":
        if self.param is None:
            out = [to_q(c0)] + [self._c[k] / (k + 1) for k in range(self.order + 1)]
        else:
            out = [_raw_coeff(c0, self.param)] + [
                _pscale(self._c[k], Q(1, k + 1)) for k in range(self.order + 1)
            ]
        return Series._wrap(out, self.param)

    def shift(self, k: int) -> "Series":
        """Multiply by t^k (k >= 0) or divide by t^-k (requires those zeros)."""
        if k >= 0:
            zero = [ZERO] * k if self.param is None else [[] for _ in range(k)]
            return Series._wrap(zero + list(self._c), self.param)
        k = -k
        if any(self._c[:k]):
            raise ValuationError(f"series has valuation below {k}; cannot divide by t^{k}")
        if self.order < k:
            raise ValuationError("nothing left after removing the valuation")
        return Series._wrap(list(self._c[k:]), self.param)

    def rescale(self, factor) -> "Series":
        """Substitute t -> factor * t."""
        f = to_q(factor)
        out = []
        p = ONE
        for c in self._c:
            out.append(c * p if self.param is None else _pscale(c, p))
            p *= f
        return Series._wrap(out, self.param)

    # -- parameter handling ------------------------------------------------

    def specialize(self, value) -> "Series":
        """Evaluate the parameter at a rational (or substitute a ParamPoly)."""
        if self.param is None:
            return self
        if isinstance(value, ParamPoly):
            return self.compose_param(value)
        return Series._wrap([ParamPoly(c, self.param)(value) for c in self._c], None)

    def compose_param(self, inner: ParamPoly) -> "Series":
        if self.param is None:
            return self
        out = [ParamPoly(c, self.param).compose(inner) for c in self._c]
        return Series(out, self.order, inner.name)

    def coefficient_of_param(self, k: int) -> "Series":
        """Rational series of the coefficients of parameter^k."""
        if self.param is None:
            return self if k == 0 else Series.zero(self.order)
        return Series._wrap([c[k] if k < len(c) else ZERO for c in self._c], None)

    def param_degree(self) -> int:
        if self.param is None:
            return 0
        return max((len(c) - 1 for c in self._c), default=0)

    # -- series functions --------------------------------------------------

    def constant_term(self):
        return self[0]

    def _unit_constant(self):
        c = self._c[0]
        if self.param is None:
            if not c:
                raise NotInvertible("constant term is zero")
            return c
        if len(c) != 1:
            raise NotInvertible(f"constant term {ParamPoly(c, self.param)} is not invertible")
        return c[0]

    def inverse(self) -> "Series":
        c0 = self._unit_constant()
        inv0 = 1 / c0
        n = self.order
        a = self._c
        if self.param is None:
            out = [inv0]
            for k in range(1, n + 1):
                s = ZERO
                for i in range(1, k + 1):
                    if a[i]:
                        s += a[i] * out[k - i]
                out.append(-s * inv0)
            return Series._wrap(out, None)
        out = [[inv0]]
        for k in range(1, n + 1):
            acc: list = []
            for i in range(1, k + 1):
                if a[i] and out[k - i]:
                    poly_addto(acc, poly_mul(a[i], out[k - i]))
            out.append(_trim(_pscale(acc, -inv0)))
        return Series._wrap(out, self.param)

    def log(self) -> "Series":
        if self._unit_constant() != 1:
            raise ValueError("log needs constant term 1")
        if self.order == 0:
            return Series.zero(0, self.param)
        return (self.derivative() * self.truncate(self.order - 1).inverse()).integral(0)

    def exp(self) -> "Series":
        if self._c[0]:
            raise ValueError("exp needs a zero constant term")
        n = self.order
        a = self._c
        if self.param is None:
            out = [ONE]
            for k in range(1, n + 1):
                s = ZERO
                for j in range(1, k + 1):
                    if a[j]:
                        s += j * a[j] * out[k - j]
                out.append(s / k)
            return Series._wrap(out, None)
        out = [[ONE]]
        for k in range(1, n + 1):
            acc: list = []
            for j in range(1, k + 1):
                if a[j] and out[k - j]:
                    poly_addto(acc, _pscale(poly_mul(a[j], out[k - j]), Q(j)))
            out.append(_trim(_pscale(acc, Q(1, k))))
        return Series._wrap(out, self.param)

    def pow_rational(self, r) -> "Series":
        return pow_rational(self, r)

    # -- display / serialisation ------------------------------------------

    def coeff_str(self, n: int, var: str | None = None) -> str:
        c = self._c[n]
        if self.param is None:
            return fmt_q(c)
        return format_poly(c, var or self.param)

    def __repr__(self):
        head = ", ".join(self.coeff_str(i) for i in range(min(len(self._c), 8)))
        more = ", ..." if self.order >= 8 else ""
        ring = "" if self.param is None else f", param={self.param!r}"
        return f"Series([{head}{more}], order={self.order}{ring})"

    def to_json(self) -> dict:
        if self.param is None:
            coeffs = [fmt_q(c) for c in self._c]
        else:
            coeffs = [[fmt_q(x) for x in c] for c in self._c]
        return {
            "schema_version": 1,
            "type": "series",
            "order": self.order,
            "parameter": self.param,
            "coeffs": coeffs,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Series":
        param = obj.get("parameter")
        if param is None:
            raw = [to_q(c) for c in obj["coeffs"]]
        else:
            raw = [_trim([to_q(x) for x in c]) for c in obj["coeffs"]]
        if len(raw) != obj["order"] + 1:
            raise ValueError("coefficient count does not match the declared order")
        return cls._wrap(raw, param)


def ring_arith(a: Series, b: Series, op: str) -> Series:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown ring operation {op!r}")


def div(a: Series, b: Series) -> Series:
    """``a / b``; a positive-valuation divisor needs the same zeros in ``a``."""
    a, b, _ = a._common(b)
    v = b.valuation()
    if v is None:
        raise ZeroDivisionError("divisor is zero to its known order")
    if v > 0:
        va = a.valuation()
        if va is not None and va < v:
            raise ValuationError(f"numerator valuation {va} is below divisor valuation {v}")
        if a.order < v:
            raise ValuationError("numerator is too short to cancel the divisor valuation")
        a, b = a.shift(-v), b.shift(-v)
    n = min(a.order, b.order)
    return a.truncate(n) * b.truncate(n).inverse()


def pow_rational(a: Series, r) -> Series:
    """``a^r`` for a series with constant term 1 and rational ``r``.

    Uses the power recurrence ``n b_n = sum_k ((r+1)k - n) a_k b_{n-k}``,
    which equals exp(r log a) exactly over any Q-algebra.
    """
    r = to_q(r)
    if a._unit_constant() != 1:
        raise ValueError("pow_rational needs constant term 1; extract constants first")
    n = a.order
    c = a._c
    if a.param is None:
        out = [ONE]
        for m in range(1, n + 1):
            s = ZERO
            for k in range(1, m + 1):
                if c[k]:
                    s += ((r + 1) * k - m) * c[k] * out[m - k]
            out.append(s / m)
        return Series._wrap(out, None)
    out = [[ONE]]
    for m in range(1, n + 1):
        acc: list = []
        for k in range(1, m + 1):
            if c[k] and out[m - k]:
                poly_addto(acc, _pscale(poly_mul(c[k], out[m - k]), (r + 1) * k - m))
        out.append(_trim(_pscale(acc, Q(1, m))))
    return Series._wrap(out, a.param)


# --------------------------------------------------------------------------
# PrefactoredSeries
# --------------------------------------------------------------------------


class PrefactoredSeries:
    """``t^a (1-t)^b body`` with rational exponents and body(0) != 0.

    The one tolerated exception is a body that vanishes to its whole known
    order, which represents an exact cancellation (``is_zero``).
    """

    __slots__ = ("a", "b", "body")

    def __init__(self, a, b, body: Series):
        self.a = to_q(a)
        self.b = to_q(b)
        v = body.valuation()
        if v is None:
            self.body = body
            return
        if v > 0:
            self.a += v
            body = body.shift(-v)
        self.body = body

    @classmethod
    def of(cls, s: Series) -> "PrefactoredSeries":
        return cls(0, 0, s)

    @property
    def order(self) -> int:
        """Absolute precision: coefficients of t^(a + k) are known for k <= body.order."""
        return self.body.order

    @property
    def abs_order(self):
        return self.a + self.body.order

    def is_zero(self) -> bool:
        return self.body.is_zero()

    def __mul__(self, other):
        if isinstance(other, PrefactoredSeries):
            return PrefactoredSeries(self.a + other.a, self.b + other.b, self.body * other.body)
        if isinstance(other, Series):
            return self * PrefactoredSeries.of(other)
        return PrefactoredSeries(self.a, self.b, self.body * other)

    __rmul__ = __mul__

    def __neg__(self):
        return PrefactoredSeries(self.a, self.b, -self.body)

    def with_b(self, b) -> "PrefactoredSeries":
        """Same function, (1-t) exponent moved to ``b`` by absorbing the difference."""
        b = to_q(b)
        if b == self.b:
            return self
        return PrefactoredSeries(self.a, b, self.body * Series.binomial(self.b - b, self.body.order))

    def __add__(self, other):
        if not isinstance(other, PrefactoredSeries):
            return NotImplemented
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        d = other.a - self.a
        if d.denominator != 1:
            raise ValueError(f"cannot add t^{self.a} and t^{other.a} series")
        x, y = self, other.with_b(self.b)
        if d < 0:
            x, y = y, x
            d = -d
        d = int(d)
        n = min(x.body.order, y.body.order + d)
        total = x.body.truncate(n) + y.body.shift(d).truncate(n)
        return PrefactoredSeries(x.a, x.b, total)

    def __sub__(self, other):
        return self + (-other)

    def inverse(self) -> "PrefactoredSeries":
        return PrefactoredSeries(-self.a, -self.b, self.body.inverse())

    def pow_rational(self, r) -> "PrefactoredSeries":
        r = to_q(r)
        c0 = self.body._unit_constant()
        if r.denominator == 1 and r >= 0:
            return PrefactoredSeries(self.a * r, self.b * r, self.body ** int(r))
        root = rational_root(c0, int(r.denominator))
        if root is None:
            raise ValueError(f"constant {fmt_q(c0)} has no rational {r.denominator}-th root")
        cr = root ** int(r.numerator) if r.numerator >= 0 else 1 / root ** int(-r.numerator)
        unit = self.body / c0
        return PrefactoredSeries(self.a * r, self.b * r, pow_rational(unit, r).scale(cr))

    def to_series(self, order: int | None = None) -> Series:
        """Plain series in t; requires a non-negative integer t-exponent."""
        if self.a.denominator != 1 or self.a < 0:
            raise ValueError(f"t^{self.a} prefactor is not a power series")
        body = self.body if self.b == 0 else self.body * Series.binomial(self.b, self.body.order)
        s = body.shift(int(self.a))
        if order is not None:
            if order > s.order:
                raise ValueError(f"only known to order {s.order}, asked for {order}")
            s = s.truncate(order)
        return s

    def equals(self, other: "PrefactoredSeries") -> bool:
        if self.a != other.a:
            return False
        o = other.with_b(self.b)
        n = min(self.body.order, o.body.order)
        return self.body.truncate(n) == o.body.truncate(n)

    def __repr__(self):
        return f"PrefactoredSeries(a={fmt_q(self.a)}, b={fmt_q(self.b)}, body={self.body!r})"


def sigma_transform(f: PrefactoredSeries, kappa) -> Series:
    """``t(t-1) d/dt ln f + kappa t`` for ``f = t^a (1-t)^b body``.

    The prefactors contribute exactly ``a (t-1) + b t``.
    """
    kappa = to_q(kappa)
    body = f.body
    if body.is_zero():
        raise ValueError("sigma transform of a vanishing series")
    n = body.order
    param = body.param
    lin = Series.polynomial([-f.a, f.a + f.b + kappa], n, None)._promote(param)
    if n == 0:
        return lin
    logd = body.derivative() * body.truncate(n - 1).inverse()
    # t (t - 1) B'/B: multiply by (t - 1), then by t
    tm1 = Series.polynomial([-1, 1], n - 1)
    return lin + (tm1 * logd).shift(1)
