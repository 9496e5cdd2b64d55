"""Residuals of the four second-order sigma equations.

Every equation is stored once, in :data:`ODE_TABLE`, as a sum of terms
``coefficient * product(linear factors)``.  A linear factor is a combination
``c + p0(t) sigma + p1(t) sigma' + p2(t) sigma''`` with polynomial
coefficients in ``t``; this keeps each row a direct transcription of the
printed equation rather than an expanded polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from ._backend import Q, ZERO, to_q
from .series import Series

FAMILIES = ("EQNMODD", "NONLINEAREQ", "FOURFACT", "DIAG_PVI")


class OdeOrderError(ValueError):
    """The sigma series is too short for a meaningful second derivative."""


@dataclass(frozen=True)
class OdeSpec:
    family: str
    N: int
    M: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown equation family {self.family!r}")
        if self.family in ("EQNMODD", "NONLINEAREQ"):
            if self.M is None:
                raise ValueError(f"{self.family} needs both M and N")
            if (self.M + self.N) % 2 != 1 or self.M > self.N:
                raise ValueError(f"{self.family} needs M + N odd and M <= N, got M={self.M}, N={self.N}")
        elif self.M is not None:
            raise ValueError(f"{self.family} takes N only")

    def label(self) -> str:
        if self.M is None:
            return f"{self.family}({self.N})"
        return f"{self.family}({self.M},{self.N})"


@dataclass(frozen=True)
class Lin:
    """``c + s*sigma + ds*sigma' + d2s*sigma''``; each a t-polynomial (list)."""

    c: tuple = ()
    s: tuple = ()
    ds: tuple = ()
    d2s: tuple = ()


def _p(*coeffs) -> tuple:
    return tuple(to_q(c) for c in coeffs)


SIG = Lin(s=_p(1))
DSIG = Lin(ds=_p(1))
D2SIG = Lin(d2s=_p(1))


@dataclass(frozen=True)
class Term:
    coeff: tuple  # t-polynomial
    factors: tuple = field(default_factory=tuple)


def _eqnmodd(M: int, N: int) -> list[Term]:
    M2, N2 = Q(M * M), Q(N * N)
    t_ds_minus_s = Lin(s=_p(-1), ds=_p(0, 1))          # t s' - s
    tm1_ds_minus_s = Lin(s=_p(-1), ds=_p(-1, 1))       # (t-1) s' - s
    return [
        Term(_p(0, 0, 1, -2, 1), (D2SIG, D2SIG)),       # t^2 (t-1)^2 s''^2
        Term(_p(4), (DSIG, t_ds_minus_s, tm1_ds_minus_s)),
        Term(_p(-M2), (t_ds_minus_s, t_ds_minus_s)),
        Term(_p(-N2), (DSIG, DSIG)),
        Term(_p(M2 + N2), (DSIG, t_ds_minus_s)),
    ]


def _nonlineareq(M: int, N: int) -> list[Term]:
    M2, N2 = Q(M * M), Q(N * N)
    inner = Lin(c=_p(M2 - N2), s=_p(8), ds=_p(-8, -8))                 # 8s - 8(t+1)s' + M^2 - N^2
    left = Lin(c=_p(1 - N2, M2 - 1), s=_p(8), ds=_p(0, -16))           # 8s - 16 t s' + M^2 t - N^2 + 1 - t
    return [
        Term(_p(0, 0, 0, 32, -64, 32), (D2SIG, D2SIG)),                # 32 t^3 (t-1)^2 s''^2
        Term(_p(0, 0, -4, 4), (inner, D2SIG)),                         # 4 t^2 (t-1) (...) s''
        # -(left) * (8 t (t-1) s'^2 - 16 t s s' + 8 s^2 + (M^2-N^2) s)
        Term(_p(0, -8, 8), (Lin(c=_p(-1)), left, DSIG, DSIG)),
        Term(_p(0, -16), (Lin(c=_p(-1)), left, SIG, DSIG)),
        Term(_p(8), (Lin(c=_p(-1)), left, SIG, SIG)),
        Term(_p(M2 - N2), (Lin(c=_p(-1)), left, SIG)),
    ]


def _fourfact(N: int) -> list[Term]:
    N2 = Q(N * N)
    t_ds_minus_s = Lin(s=_p(-1), ds=_p(0, 1))
    tm1_ds_minus_s = Lin(s=_p(-1), ds=_p(-1, 1))
    return [
        Term(_p(0, 0, 1, -2, 1), (D2SIG, D2SIG)),
        Term(_p(4), (DSIG, t_ds_minus_s, tm1_ds_minus_s)),
        # (1/4) ((N^2+1)(t-1) - t^2) s'^2
        Term(_p(-(N2 + 1) / 4, (N2 + 1) / 4, Q(-1, 4)), (DSIG, DSIG)),
        # -(1/2^6) (16 (N^2 + 1 - 2t) s + N^2 t) s'
        Term(_p(Q(-1, 64)), (Lin(s=_p(16 * (N2 + 1), -32), c=_p(0, N2)), DSIG)),
        Term(_p(Q(-1, 4)), (SIG, SIG)),
        Term(_p(N2 / 64), (SIG,)),
        Term(_p(-N2 * (N2 - 3) / 1024), ()),
    ]


def _diag_pvi(N: int) -> list[Term]:
    N2 = Q(N * N)
    t_ds_minus_s = Lin(s=_p(-1), ds=_p(0, 1))
    tm1_ds_minus_s = Lin(s=_p(-1), ds=_p(-1, 1))
    return [
        Term(_p(0, 0, 1, -2, 1), (D2SIG, D2SIG)),                       # (t (t-1) s'')^2
        Term(_p(-N2), (tm1_ds_minus_s, tm1_ds_minus_s)),
        # + 4 s' ((t-1) s' - s - 1/4) (t s' - s)
        Term(_p(4), (DSIG, Lin(c=_p(Q(-1, 4)), s=_p(-1), ds=_p(-1, 1)), t_ds_minus_s)),
    ]


ODE_TABLE: dict[str, Callable[..., list[Term]]] = {
    "EQNMODD": _eqnmodd,
    "NONLINEAREQ": _nonlineareq,
    "FOURFACT": _fourfact,
    "DIAG_PVI": _diag_pvi,
}


def ode_terms(spec: OdeSpec) -> list[Term]:
    if spec.M is None:
        return ODE_TABLE[spec.family](spec.N)
    return ODE_TABLE[spec.family](spec.M, spec.N)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _val(poly: Sequence) -> int | None:
    for i, c in enumerate(poly):
        if c:
            return i
    return None


def _poly_times(poly: Sequence, s: Series) -> Series | None:
    """``poly(t) * s``; a t^v factor in the polynomial extends the known order by v."""
    v = _val(poly)
    if v is None:
        return None
    rest = list(poly[v:])
    body = s * Series.polynomial(rest, s.order) if len(rest) > 1 else s.scale(rest[0])
    return body.shift(v)


def _add(a: Series | None, b: Series | None) -> Series | None:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


@dataclass
class SigmaSeries:
    """A sigma series together with where it came from."""

    sigma: Series
    source: str = ""
    prefactor: tuple = (0, 0)
    kappa: object = 0

    @property
    def order(self) -> int:
        return self.sigma.order


def _as_sigma(s) -> Series:
    return s.sigma if isinstance(s, SigmaSeries) else s


def residual(spec: OdeSpec, s) -> Series:
    """Left-hand side of the equation evaluated on ``s`` (a Series or SigmaSeries)."""
    sigma = _as_sigma(s)
    if sigma.order < 4:
        raise OdeOrderError(f"sigma of order {sigma.order} is too short; need at least 4")
    d1 = sigma.derivative()
    d2 = d1.derivative()
    parts = {"s": sigma, "ds": d1, "d2s": d2}
    param = sigma.param

    cache: dict[Lin, Series] = {}

    def lin_value(L: Lin) -> Series:
        if L in cache:
            return cache[L]
        acc = None
        for key in ("s", "ds", "d2s"):
            poly = getattr(L, key)
            if poly:
                acc = _add(acc, _poly_times(poly, parts[key]))
        if L.c:
            n = acc.order if acc is not None else sigma.order
            acc = _add(acc, Series.polynomial(list(L.c), n, None)._promote(param))
        if acc is None:
            acc = Series.zero(sigma.order, param)
        cache[L] = acc
        return acc

    total = None
    for term in ode_terms(spec):
        if not any(term.coeff):
            continue
        prod = None
        for f in term.factors:
            v = lin_value(f)
            prod = v if prod is None else prod * v
        if prod is None:
            prod = Series.one(sigma.order + 2, param)
        piece = _poly_times(term.coeff, prod)
        total = _add(total, piece)
    if total is None:
        return Series.zero(sigma.order, param)
    return total


@dataclass
class CheckReport:
    check_id: str
    status: str
    checked_order: int
    first_mismatch: tuple | None = None
    notes: str = ""

    def __post_init__(self):
        if self.status not in ("pass", "fail", "inconclusive"):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "fail" and self.first_mismatch is None:
            raise ValueError("a failing report must name its first mismatch")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        fm = None
        if self.first_mismatch is not None:
            n, exp, got = self.first_mismatch
            fm = {"order": n, "expected": str(exp), "got": str(got)}
        return {
            "check_id": self.check_id,
            "status": self.status,
            "checked_order": self.checked_order,
            "first_mismatch": fm,
            "notes": self.notes,
        }


def compare_series(check_id: str, expected: Series, got: Series, upto: int | None = None,
                   notes: str = "") -> CheckReport:
    """Coefficientwise comparison up to the jointly known order."""
    n = min(expected.order, got.order)
    if upto is not None:
        n = min(n, upto)
    for k in range(n + 1):
        if expected[k] != got[k]:
            return CheckReport(check_id, "fail", n, (k, expected.coeff_str(k), got.coeff_str(k)), notes)
    status = "pass"
    if upto is not None and n < upto:
        status = "inconclusive"
        notes = (notes + "; " if notes else "") + f"inputs only reach order {n}"
    return CheckReport(check_id, status, n, None, notes)


def vanishes(check_id: str, res: Series, upto: int | None = None, notes: str = "") -> CheckReport:
    zero = Series.zero(res.order, res.param)
    return compare_series(check_id, zero, res, upto, notes)


def additive_split_check(total, parts: Sequence, check_id: str = "additive_split") -> CheckReport:
    t = _as_sigma(total)
    if not parts:
        return vanishes(check_id, t)
    acc = _as_sigma(parts[0])
    for p in parts[1:]:
        acc = acc + _as_sigma(p)
    n = min(t.order, acc.order)
    return compare_series(check_id, t.truncate(n), acc.truncate(n))
