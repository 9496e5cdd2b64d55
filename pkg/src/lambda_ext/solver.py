"""Order-by-order construction of one-parameter analytic solution families.

The unknown is the sigma series itself.  Its constant term is fixed by the
seed; every later coefficient ``s_n`` is found from the first residual
order at which it appears.  Near ``sigma = 0`` the equations have no linear
part, so the dependence on ``s_n`` is sampled at four points and fitted by
a cubic (every residual here is at most cubic in sigma).  A free parameter
is adjoined when a later coefficient shows up no later than ``s_n`` itself:
the residual then cannot pin ``s_n`` down at this step.

The object ``t^v c0 (1 + ...)`` is recovered afterwards by integrating the
logarithmic derivative that sigma encodes.
"""

from __future__ import annotations

import logging
from math import comb
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ._backend import ONE, ZERO, Q, fmt_q, to_q
from .odes import OdeSpec, SigmaSeries, residual
from .series import ParamPoly, PrefactoredSeries, Series, sigma_transform

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The seed does not extend, or the residual is not in a solvable shape."""


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedAnsatz:
    """``t^a (1-t)^b F`` with ``F = c0 t^v (1 + ...)`` and sigma offset ``kappa``."""

    valuation: int = 0
    leading: object = 1
    prefactor: tuple = (0, 0)
    kappa: object = 0
    # known body terms u_1.., u_m of F/(c0 t^v); used only to pick between
    # distinct roots when the residual is not linear in the new coefficient
    branch_terms: tuple = ()
    # "nonzero": when s_n = 0 is one of two roots, take the other one
    root: str = "auto"

    def __post_init__(self):
        if not to_q(self.leading):
            raise ValueError("seed leading coefficient must be nonzero")

    @property
    def a(self):
        return to_q(self.prefactor[0])

    @property
    def b(self):
        return to_q(self.prefactor[1])

    @property
    def k(self):
        return to_q(self.kappa)

    @property
    def sigma0(self):
        return -(self.a + self.valuation)

    def branch_sigma(self):
        if not self.branch_terms:
            return None
        body = Series([ONE] + [to_q(u) for u in self.branch_terms])
        return sigma_transform(PrefactoredSeries(self.a + self.valuation, self.b, body), self.k)


# sampling points for the new coefficient, and the inverse Vandermonde matrix
_XS = (0, 1, -1, 2)


def _vandermonde_inverse(xs):
    n = len(xs)
    m = [[Fraction(x) ** j for j in range(n)] + [Fraction(int(i == r)) for i in range(n)] for r, x in enumerate(xs)]
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r][col])
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [[to_q(v) for v in row[n:]] for row in m]


_VINV = _vandermonde_inverse(_XS)
# generic values for the look-ahead probe
_X0 = Q(3, 7)
_Y0 = Q(5, 11)


def _fit(values):
    """Coefficients c0..c3 of the cubic through the sampled values."""
    out = []
    for row in _VINV:
        acc = None
        for w, v in zip(row, values):
            if not w:
                continue
            term = v * w
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def _is_zero(c) -> bool:
    return not c


def _div(num, den):
    if isinstance(den, ParamPoly):
        if den.is_constant():
            den = den.constant()
        else:
            if not isinstance(num, ParamPoly):
                num = ParamPoly([num], den.name)
            return num.exact_div(den)
    return num / den


def _normalize(c, param):
    if param is None:
        return c
    if isinstance(c, ParamPoly):
        return c
    return ParamPoly([c], param)


@dataclass
class FamilySeries:
    """A solved family: sigma, the object ``F`` and how they were obtained."""

    spec: OdeSpec
    seed: SeedAnsatz
    sigma: Series
    series: Series
    degeneracy_orders: list = field(default_factory=list)
    parameter_name: str | None = None

    @property
    def order(self) -> int:
        return self.series.order

    def full(self) -> PrefactoredSeries:
        """``t^a (1-t)^b F`` -- the quantity the equation actually sees."""
        return PrefactoredSeries(self.seed.a, self.seed.b, Series(self.series.coeffs, self.series.order, self.series.param))

    def full_series(self) -> Series:
        return self.full().to_series(self.order)

    def sigma_series(self) -> SigmaSeries:
        return SigmaSeries(self.sigma, self.spec.label(), (self.seed.a, self.seed.b), self.seed.k)

    def specialize(self, value) -> "FamilySeries":
        name = value.name if isinstance(value, ParamPoly) else None
        return FamilySeries(self.spec, self.seed, self.sigma.specialize(value), self.series.specialize(value),
                            list(self.degeneracy_orders), name)

    def reparametrize(self, pmap: "ParameterMap") -> "FamilySeries":
        inner = pmap.as_poly()
        return FamilySeries(self.spec, self.seed, self.sigma.compose_param(inner),
                            self.series.compose_param(inner), list(self.degeneracy_orders), inner.name)

    def report(self) -> list[str]:
        lines = [f"family of {self.spec.label()} to order {self.order}"]
        for n in self.degeneracy_orders:
            lines.append(f"degeneracy at n={n}")
        return lines


def _unique_root(c, deg):
    """The root r when the cubic fit is c_deg (x - r)^deg, else None."""
    root = -_div(c[deg - 1], c[deg] * deg)
    for k in range(deg - 2, -1, -1):
        if c[k] != c[deg] * comb(deg, k) * (-root) ** (deg - k):
            return None
    return root


def _hinted_root(c, deg, hint, n):
    if hint is None or n > hint.order:
        return None
    x = hint[n]
    val = c[deg]
    for k in range(deg - 1, -1, -1):
        val = val * x + c[k]
    return x if _is_zero(val) else None


def _residual_upto(spec, coeffs, w, param):
    s = Series(coeffs[: w + 1], w, param)
    return residual(spec, s)


def solve_family(spec: OdeSpec, seed: SeedAnsatz, order: int, pins: dict | None = None,
                 param_name: str | None = None, max_window: int = 64) -> FamilySeries:
    """Solve for sigma to ``order`` and rebuild ``F = c0 t^v (1 + ...)``.

    ``pins`` maps a degeneracy order to a rational value used instead of a
    fresh parameter (specialising before solving).
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    pins = dict(pins or {})
    param = None
    degeneracies: list[int] = []
    s = [seed.sigma0]
    # orders of the residual already known to vanish
    settled = -1
    hint = seed.branch_sigma()
    for n in range(1, order + 1):
        W = 6
        while True:
            w = n + W
            base = s + [ZERO] * (w + 1 - len(s))

            def probe(x, y=ZERO):
                c = list(base)
                c[n] = c[n] + x if x else c[n]
                if y:
                    c[n + 1] = y
                    c[n + 2] = 3 * y
                return _residual_upto(spec, c, w, param)

            rs = [probe(Q(x)) for x in _XS]
            r_plain = probe(_X0)
            r_look = probe(_X0, _Y0)
            top = min(r.order for r in rs + [r_plain, r_look])
            # coefficients above w - 2 may see the zero padding beyond n+2
            top = min(top, w - 2)
            r_x = next((r for r in range(top + 1) if any(rs[i][r] != rs[0][r] for i in range(1, 4))), None)
            r_y = next((r for r in range(top + 1) if r_look[r] != r_plain[r]), None)
            if r_x is not None or r_y is not None:
                break
            W *= 2
            if W > max_window:
                raise SolverError(f"order {n}: s_{n} never enters the residual within the search window")
        stop = min(v for v in (r_x, r_y) if v is not None)
        for r in range(settled + 1, stop):
            if not _is_zero(rs[0][r]):
                raise SolverError(f"inconsistent seed: residual at t^{r} is {rs[0].coeff_str(r)} "
                                  f"independently of s_{n}")
        settled = max(settled, stop - 1)
        if r_x is not None and (r_y is None or r_x < r_y):
            c = _fit([r[r_x] for r in rs])
            deg = max(i for i in range(4) if not _is_zero(c[i]))
            if deg == 1:
                x = -_div(c[0], c[1])
            else:
                x = _unique_root(c, deg)
                if x is None:
                    x = _hinted_root(c, deg, hint, n)
                if x is None and seed.root == "nonzero" and deg == 2 and _is_zero(c[0]):
                    x = -_div(c[1], c[2])
                if x is None:
                    raise SolverError(f"order {n}: residual at t^{r_x} is a degree-{deg} polynomial in "
                                      f"s_{n} without a unique root")
            s.append(_normalize(x, param) if param else x)
        else:
            # s_n is not determined here: adjoin a parameter (or use a pin)
            if n in pins:
                s.append(_normalize(to_q(pins[n]), param) if param else to_q(pins[n]))
                degeneracies.append(n)
                continue
            if param is not None:
                raise SolverError(f"second degeneracy at n={n}; only one-parameter families are supported")
            param = param_name or f"p_{n}"
            s = [_normalize(c, param) for c in s]
            s.append(ParamPoly([0, 1], param))
            degeneracies.append(n)
            log.debug("adjoined %s at n=%d", param, n)
    sigma = Series(s, order, param)
    body = rebuild_body(sigma, seed)
    obj = body.scale(to_q(seed.leading)).shift(seed.valuation)
    obj = obj.truncate(order)
    return FamilySeries(spec, seed, sigma, obj, degeneracies, param)


def rebuild_body(sigma: Series, seed: SeedAnsatz) -> Series:
    """B with B(0)=1 such that sigma_transform(t^(a+v) (1-t)^b B, kappa) = sigma."""
    A = seed.a + seed.valuation
    beta = seed.b + seed.k
    n = sigma.order
    lin = Series.polynomial([-A, A + beta], n)
    num = sigma - lin
    if num[0]:
        raise SolverError("sigma constant term does not match the seed valuation")
    if n == 0:
        return Series.one(0, sigma.param)
    q = num.shift(-1)  # order n-1
    logd = -(q * Series.binomial(-1, n - 1))  # divide by (t - 1)
    return logd.integral(0).exp()


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterMap:
    """solver parameter = c0 + c1 x + c2 x^2 in the printed parameter ``target``."""

    kind: str
    coefficients: tuple
    source: str
    target: str
    branch: str = "+"

    def as_poly(self) -> ParamPoly:
        return ParamPoly(self.coefficients, self.target)

    def describe(self) -> str:
        return f"{self.source} = {format_map(self.coefficients, self.target)}"


def format_map(coeffs, var):
    return str(ParamPoly(coeffs, var))


def calibrate_parameter(fam: FamilySeries, ref: Series, upto: int | None = None) -> ParameterMap:
    """Find the affine or quadratic substitution turning ``fam`` into ``ref``.

    The map is read off the first order where the family depends on its
    parameter, then every other order is checked.
    """
    s = fam.series
    if s.param is None:
        raise CalibrationError("family has no free parameter")
    if ref.param is None:
        raise CalibrationError("reference has no parameter to calibrate against")
    n = min(s.order, ref.order) if upto is None else min(s.order, ref.order, upto)
    d = next((k for k in range(n + 1) if s[k].degree >= 1), None)
    if d is None:
        raise CalibrationError("family does not depend on its parameter within the compared range")
    for k in range(d):
        if s[k].constant() != ref[k].constant() or ref[k].degree >= 1:
            raise CalibrationError(f"family and reference differ at parameter-free order t^{k}")
    fk = s[d]
    if fk.degree != 1:
        raise CalibrationError(f"family coefficient at t^{d} is not affine in its parameter")
    A, B = fk.coefficient(0), fk.coefficient(1)
    R = ref[d]
    coeffs = [(R.coefficient(0) - A) / B] + [c / B for c in R.coeffs[1:]]
    while coeffs and not coeffs[-1]:
        coeffs.pop()
    if len(coeffs) > 3:
        raise CalibrationError("no affine or quadratic parameter map fits")
    kind = "affine" if len(coeffs) <= 2 else "quadratic"
    pmap = ParameterMap(kind, tuple(coeffs), s.param, ref.param)
    mapped = s.compose_param(pmap.as_poly())
    for k in range(n + 1):
        if mapped[k] != ref[k]:
            raise CalibrationError(f"map {pmap.describe()} fails at t^{k}: family {mapped.coeff_str(k)} "
                                   f"vs reference {ref.coeff_str(k)}")
    return pmap


def calibrate_against(fam: FamilySeries, ref: Series, upto: int | None = None) -> tuple[ParameterMap, int | None]:
    """Like :func:`calibrate_parameter`, but returns the first mismatch instead of raising there."""
    try:
        return calibrate_parameter(fam, ref, upto), None
    except CalibrationError as exc:
        msg = str(exc)
        if " fails at t^" not in msg:
            raise
        k = int(msg.split(" fails at t^")[1].split(":")[0])
        return calibrate_parameter(fam, ref, k - 1), k


@dataclass
class NormalizationResult:
    matches: list
    checked_order: int

    @property
    def unique(self) -> bool:
        return len(self.matches) == 1

    @property
    def best(self):
        return self.matches[0] if self.matches else None


DEFAULT_GRID_A = tuple(Q(k, 4) for k in range(-4, 5))
DEFAULT_GRID_B = tuple(Q(k, 4) for k in range(-4, 5))
DEFAULT_KAPPA = (Q(0), Q(-1, 4))


def default_grid():
    return [(a, b, k) for a in DEFAULT_GRID_A for b in DEFAULT_GRID_B for k in DEFAULT_KAPPA]


def calibrate_normalization(ref: PrefactoredSeries, spec: OdeSpec, grid: Sequence | None = None,
                            upto: int | None = None) -> NormalizationResult:
    """Every grid triple (a, b, kappa) whose sigma annihilates the residual.

    Raises :class:`CalibrationError` when nothing in the grid works.
    """
    grid = list(grid if grid is not None else default_grid())
    matches = []
    checked = None
    for a, b, k in grid:
        f = PrefactoredSeries(ref.a + to_q(a), ref.b + to_q(b), ref.body)
        sig = sigma_transform(f, k)
        if upto is not None:
            sig = sig.truncate(min(upto + 2, sig.order))
        r = residual(spec, sig)
        checked = r.order if checked is None else min(checked, r.order)
        if r.is_zero():
            matches.append((to_q(a), to_q(b), to_q(k)))
    if not matches:
        raise CalibrationError(f"no grid member annihilates {spec.label()}")
    return NormalizationResult(matches, checked)


def fmt_triple(tr) -> str:
    return "(" + ", ".join(fmt_q(x) for x in tr) + ")"
