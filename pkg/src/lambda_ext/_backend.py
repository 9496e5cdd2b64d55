"""Rational scalar backend and the convolution kernels everything else sits on.

The scalar type is chosen once, at import time, from ``LAMBDA_EXT_BACKEND``:

* ``gmpy2``    -- ``gmpy2.mpq`` (GMP rationals, several times faster)
* ``fraction`` -- ``fractions.Fraction`` (pure Python fallback)
* ``auto``     -- gmpy2 when importable, else Fraction (default)

Both types keep values in lowest terms with a positive denominator, so the
rest of the package never normalises by hand.
"""

from __future__ import annotations

import os
import re
from fractions import Fraction

_requested = os.environ.get("LAMBDA_EXT_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "gmpy2", "fraction"):
    raise ImportError(f"LAMBDA_EXT_BACKEND must be auto, gmpy2 or fraction, got {_requested!r}")

Q = Fraction
BACKEND = "fraction"
if _requested in ("auto", "gmpy2"):
    try:
        from gmpy2 import mpq as Q  # noqa: N812
        BACKEND = "gmpy2"
    except ImportError:
        if _requested == "gmpy2":
            raise

QType = type(Q(0))
ZERO = Q(0)
ONE = Q(1)

_RATIONAL_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+))?\s*$")


def is_rational(x) -> bool:
    return isinstance(x, (int, Fraction, QType)) and not isinstance(x, bool)


def to_q(x) -> "QType":
    """Coerce an int, Fraction, mpq or ``"p/q"`` string to the backend type."""
    if isinstance(x, QType):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Q(x)
    if isinstance(x, Fraction):
        return Q(x.numerator, x.denominator)
    if isinstance(x, str):
        m = _RATIONAL_RE.match(x)
        if not m:
            raise ValueError(f"not an exact rational literal: {x!r}")
        num = int(m.group(1))
        den = int(m.group(2)) if m.group(2) else 1
        if den == 0:
            raise ZeroDivisionError(f"zero denominator in {x!r}")
        return Q(num, den)
    if hasattr(x, "numerator") and hasattr(x, "denominator") and not isinstance(x, float):
        return Q(int(x.numerator), int(x.denominator))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


def fmt_q(x) -> str:
    """``p/q`` or ``p``; both backends already print this way."""
    x = to_q(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rational_root(x, k: int):
    """Exact k-th root of a positive rational, or None when it is irrational."""
    from math import isqrt

    x = to_q(x)
    if k == 1:
        return x
    if x < 0:
        if k % 2 == 0:
            return None
        r = rational_root(-x, k)
        return None if r is None else -r

    def iroot(n: int):
        if n < 2:
            return n
        if k == 2:
            r = isqrt(n)
        else:
            r = int(round(n ** (1.0 / k))) if n < 2**1000 else _newton_root(n, k)
            while r**k > n:
                r -= 1
            while (r + 1) ** k <= n:
                r += 1
        return r if r**k == n else None

    num, den = iroot(int(x.numerator)), iroot(int(x.denominator))
    if num is None or den is None:
        return None
    return Q(num, den)


def _newton_root(n: int, k: int) -> int:
    r = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        s = ((k - 1) * r + n // r ** (k - 1)) // k
        if s >= r:
            return r
        r = s


# --------------------------------------------------------------------------
# hot kernels
# --------------------------------------------------------------------------


def conv_q(a, b, n: int) -> list:
    """Cauchy product of two scalar coefficient lists, truncated to t^n."""
    la, lb = len(a), len(b)
    nz_a = [i for i in range(min(la, n + 1)) if a[i]]
    out = [ZERO] * (n + 1)
    for i in nz_a:
        ai = a[i]
        top = min(lb, n + 1 - i)
        for j in range(top):
            bj = b[j]
            if bj:
                out[i + j] += ai * bj
    return out


def poly_mul(p, q) -> list:
    """Product of two dense coefficient lists (no truncation)."""
    if not p or not q:
        return []
    out = [ZERO] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        if x:
            for j, y in enumerate(q):
                if y:
                    out[i + j] += x * y
    return out


def poly_addto(acc: list, p) -> None:
    if len(acc) < len(p):
        acc.extend([ZERO] * (len(p) - len(acc)))
    for i, x in enumerate(p):
        if x:
            acc[i] += x


def conv_p(a, b, n: int) -> list:
    """Cauchy product when coefficients are polynomials (lists) in a parameter."""
    nz_a = [i for i in range(min(len(a), n + 1)) if a[i]]
    nz_b = [j for j in range(min(len(b), n + 1)) if b[j]]
    out = [[] for _ in range(n + 1)]
    for i in nz_a:
        ai = a[i]
        for j in nz_b:
            if i + j > n:
                break
            poly_addto(out[i + j], poly_mul(ai, b[j]))
    return out
