"""Named, reportable checks: identities, deformations, residuals, Toda, integrality.

Every check returns a :class:`CheckReport`.  Checks are looked up by id in
:data:`CHECKS`; the suite manifest (``data/suite.txt``) lists ids with the
order to run them at and the expected status, so negative controls sit in
the same battery as the rest.
"""

from __future__ import annotations

import ast
import operator
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

from ._backend import Q, fmt_q, to_q
from .catalog import default_catalog
from .families import (calibrated_family, diagonal_family_def, family_in, raw_family, reflect, shift_half)
from .odes import CheckReport, OdeSpec, compare_series, residual, vanishes
from .series import ParamPoly, PrefactoredSeries, Series, sigma_transform
from .solver import (_XS, _X0, _Y0, CalibrationError, SolverError, _div, _fit, _is_zero, _unique_root,
                     calibrate_against)

SLACK = 8   # extra solver orders so that valuations and derivatives never eat into the checked range


class UnknownCheck(KeyError):
    def __str__(self):
        return f"unknown check id {self.args[0]!r}"


# --------------------------------------------------------------------------
# small helpers
# --------------------------------------------------------------------------


def _cat():
    return default_catalog()


def _closed(eid: str, order: int) -> Series:
    return _cat().series(eid, order)


def _fam(name: str, order: int, parameter: str | None = None) -> Series:
    if parameter is None:
        return calibrated_family(name, order + SLACK).series
    return family_in(name, order + SLACK, parameter)


def _om(b, n: int) -> Series:
    """(1 - t)^b to order n."""
    return Series.binomial(b, n)


def _times_om(s: Series, b) -> Series:
    return s * _om(b, s.order)


def _at(s: Series, value) -> Series:
    return s.specialize(to_q(value))


def _dlog(C: Series) -> Series:
    """C'/C."""
    return C.derivative() * C.truncate(C.order - 1).inverse()


def _tt1(s: Series) -> Series:
    """t (t - 1) s."""
    return (s * Series.polynomial([-1, 1], s.order)).shift(1)


def _combine(check_id: str, parts: list[CheckReport], notes: str = "", checked: int | None = None) -> CheckReport:
    """One report out of several sub-comparisons: the first failure wins.

    ``checked`` names the order of the principal comparison when some parts
    (printed prefixes) are necessarily shorter.
    """
    for p in parts:
        if p.status == "fail":
            sub = f"{p.check_id}: " if p.check_id != check_id else ""
            return CheckReport(check_id, "fail", p.checked_order, p.first_mismatch,
                               "; ".join(x for x in (sub + p.notes if p.notes else sub.rstrip(": "), notes) if x))
    status = "inconclusive" if any(p.status == "inconclusive" for p in parts) else "pass"
    if checked is None:
        checked = min(p.checked_order for p in parts)
    extra = [p.notes for p in parts if p.notes]
    return CheckReport(check_id, status, checked, None, "; ".join(extra + ([notes] if notes else [])))


def _eq(check_id: str, lhs: Series, rhs: Series, order: int, notes: str = "") -> CheckReport:
    return compare_series(check_id, lhs, rhs, order, notes)


# --------------------------------------------------------------------------
# identities
# --------------------------------------------------------------------------

IDENTITIES: dict[str, Callable[[int], CheckReport]] = {}


def _identity(name):
    def deco(fn):
        IDENTITIES[name] = fn
        return fn
    return deco


def _reflection(cid, lower, upper, b, order, swap=False):
    """(1-t)^b * upper(alpha) = lower(1 - alpha), or with alpha <-> 1 - alpha."""
    lo, up = _fam(lower, order), _fam(upper, order)
    if swap:
        return _eq(cid, lo, _times_om(reflect(up), b), order)
    return _eq(cid, reflect(lo), _times_om(up, b), order)


for _name, _lo, _up, _b, _sw in (
        ("identity_f2_f1", "f1", "f2", Q(1, 4), False), ("identity_f2_f1_b", "f1", "f2", Q(1, 4), True),
        ("identity_f4_f3", "f3", "f4", Q(1, 4), False), ("identity_f4_f3_b", "f3", "f4", Q(1, 4), True),
        ("F2_F1_reflect", "F1_25", "F2_25", None, False), ("F2_F1_reflect_b", "F1_25", "F2_25", None, True)):
    if _b is None:
        # F2(alpha) = (1-t)^(1/2) F1(1 - alpha)
        def _fn(order, _n=_name, _sw=_sw):
            F1, F2 = _fam("F1_25", order), _fam("F2_25", order)
            if _sw:
                return _eq(_n, reflect(F2), _times_om(F1, Q(1, 2)), order)
            return _eq(_n, F2, _times_om(reflect(F1), Q(1, 2)), order)
    else:
        def _fn(order, _n=_name, _lo=_lo, _up=_up, _b=_b, _sw=_sw):
            return _reflection(_n, _lo, _up, _b, order, _sw)
    IDENTITIES[_name] = _fn


def _fs(order):
    return [_fam(f"f{j}", order) for j in range(1, 5)]


@_identity("identitythus")
def _identitythus(order):
    f1, f2, f3, f4 = _fs(order)
    return _eq("identitythus", _times_om(f2 * f4, Q(1, 2)), reflect(f1) * reflect(f3), order)


@_identity("identitythus_b")
def _identitythus_b(order):
    f1, f2, f3, f4 = _fs(order)
    return _eq("identitythus_b", _times_om(reflect(f2) * reflect(f4), Q(1, 2)), f1 * f3, order)


@_identity("identitythus2")
def _identitythus2(order):
    f1, f2, f3, f4 = _fs(order)
    return _eq("identitythus2", f4 * reflect(f1), f2 * reflect(f3), order)


@_identity("identitythus2_b")
def _identitythus2_b(order):
    f1, f2, f3, f4 = _fs(order)
    return _eq("identitythus2_b", reflect(f4) * f1, reflect(f2) * f3, order)


def _half(j, order):
    return _at(_fam(f"f{j}", order), Q(1, 2))


def _verif(cid, pairs, closed, order):
    parts = []
    rhs = _closed(closed, order)
    for (i, k), b in pairs:
        lhs = _half(i, order) * _half(k, order)
        if b:
            lhs = _times_om(lhs, b)
        parts.append(_eq(f"{cid}[f{i}f{k}]", lhs, rhs, order))
        # the algebraic closed forms on their own
        cl = (_cat().expand_entry(f"f{i}_05_alphahalf", order) * _cat().expand_entry(f"f{k}_05_alphahalf", order))
        cl = cl * PrefactoredSeries(0, b or 0, Series.one(cl.order))
        parts.append(_eq(f"{cid}[closed f{i}f{k}]", cl.to_series(order), rhs, order))
    return _combine(cid, parts)


@_identity("verif_f1f3")
def _verif_f1f3(order):
    return _verif("verif_f1f3", [((1, 3), None)], "verif_closed", order)


@_identity("verif_f2f4")
def _verif_f2f4(order):
    return _verif("verif_f2f4", [((2, 4), Q(1, 2))], "verif_closed", order)


@_identity("verif2_f1f4")
def _verif2_f1f4(order):
    return _verif("verif2_f1f4", [((1, 4), None)], "verif2_closed", order)


@_identity("verif2_f2f3")
def _verif2_f2f3(order):
    return _verif("verif2_f2f3", [((2, 3), None)], "verif2_closed", order)


for _j in range(1, 5):
    def _fn(order, _j=_j):
        return _eq(f"alphahalf_f{_j}", _half(_j, order), _closed(f"f{_j}_05_alphahalf", order), order)
    IDENTITIES[f"alphahalf_f{_j}"] = _fn

for _j in range(1, 5):
    for _al in (0, 1):
        def _fn(order, _j=_j, _al=_al):
            return _eq(f"particular_f{_j}_{_al}", _at(_fam(f"f{_j}", order), _al),
                       _closed(f"f{_j}_05_alpha{_al}", order), order)
        IDENTITIES[f"particular_f{_j}_{_al}"] = _fn

for _k in (1, 2):
    for _al in (0, 1):
        def _fn(order, _k=_k, _al=_al):
            return _eq(f"particular_F{_k}_{_al}", _at(_fam(f"F{_k}_25", order), _al),
                       _closed(f"F{_k}_25_alpha{_al}", order), order)
        IDENTITIES[f"particular_F{_k}_{_al}"] = _fn


def _F1F2(cid, k, order):
    parts = []
    for al in (0, 1):
        closed = _closed(f"F{k}_25_alpha{al}", order)
        printed = _cat().reference_series(f"F{k}_25_alpha{al}_printed")
        parts.append(_eq(f"{cid}[printed alpha={al}]", printed, closed.truncate(printed.order), printed.order))
        parts.append(_eq(f"{cid}[family alpha={al}]", _at(_fam(f"F{k}_25", order), al), closed, order))
    return _combine(cid, parts, "printed prefix through t^7", checked=order)


IDENTITIES["F1F2a0"] = lambda order: _F1F2("F1F2a0", 1, order)
IDENTITIES["F1F2a1"] = lambda order: _F1F2("F1F2a1", 2, order)


def _product(names, const, order, shift=6):
    """const (1-t)^(1/2) t^-shift prod(families); needs SLACK >= shift."""
    acc = None
    for n in names:
        s = _fam(n, order).truncate(order + shift)
        acc = s if acc is None else acc * s
    return _times_om(acc.shift(-shift), Q(1, 2)).scale(const)


@_identity("C05_factorization")
def _c05_factor(order):
    fam = _at(_fam("C05", order), 1)
    return _eq("C05_factorization", fam, _closed("C05_product", order), order, "lambda^2 = 1 member vs alpha = 0 factors")


@_identity("C05_lambda_alpha")
def _c05_lambda_alpha(order):
    lhs = _fam("C05", order, "alpha")
    rhs = _product(["f1", "f2", "f3", "f4"], Q(256, 81), order)
    return _eq("C05_lambda_alpha", lhs, rhs, order, "lambda^2 = (2 alpha - 1)^2")


@_identity("C05_lambda0")
def _c05_lambda0(order):
    fam = _at(_fam("C05", order), 0)
    return _combine("C05_lambda0", [
        _eq("C05_lambda0[family]", fam, _closed("C05_lambda0_closed", order), order),
        _eq("C05_lambda0[product]", _closed("C05_lambda0_product", order), _closed("C05_lambda0_closed", order), order),
    ])


def _lambdamu(cid, name, order):
    lam = _fam(name, order, "lambda_sq").compose_param(ParamPoly([1, -1], "mu"))
    return _eq(cid, lam, _fam(name, order, "mu"), order, "lambda^2 = 1 - mu")


IDENTITIES["lambdamu_C05"] = lambda order: _lambdamu("lambdamu_C05", "C05", order)
IDENTITIES["lambdamu_C25"] = lambda order: _lambdamu("lambdamu_C25", "C25", order)


@_identity("C25_factorization")
def _c25_factor(order):
    fam = _at(_fam("C25", order), 1)
    return _eq("C25_factorization", fam, _closed("C25_product", order), order, "lambda^2 = 1 member vs alpha = 0 factors")


@_identity("C25_lambda_alpha")
def _c25_lambda_alpha(order):
    lhs = _fam("C25", order, "alpha")
    rhs = _product(["F1_25", "F2_25"], Q(256, 2025), order)
    return _eq("C25_lambda_alpha", lhs, rhs, order, "lambda^2 = (2 alpha - 1)^2")


@_identity("F2_F1_half")
def _f2f1_half(order):
    F1, F2 = (_at(_fam(n, order), Q(1, 2)) for n in ("F1_25", "F2_25"))
    c1, c2 = _closed("F1_25_alphahalf", order), _closed("F2_25_alphahalf", order)
    return _combine("F2_F1_half", [
        _eq("F2_F1_half[family]", F2, _times_om(F1, Q(1, 2)), order),
        _eq("F2_F1_half[closed]", c2, _times_om(c1, Q(1, 2)), order),
        _eq("F2_F1_half[family vs closed]", F1, c1, order),
    ])


@_identity("C25_lambda0_square")
def _c25_l0sq(order):
    F2 = _at(_fam("F2_25", order), Q(1, 2))
    lhs = (F2 * F2).shift(-6).truncate(order).scale(Q(256, 2025))
    return _combine("C25_lambda0_square", [
        _eq("C25_lambda0_square", lhs, _closed("C25_lambda0_closed", order), order),
        _eq("C25_lambda0_square[family]", _at(_fam("C25", order), 0), _closed("C25_lambda0_closed", order), order),
    ])


def _c11_at_lambda1(order):
    return _at(_fam("C11", order), 0)   # M_def = 4 (1 - lambda^2) = 0


@_identity("factodiag1")
def _factodiag1(order):
    C = _c11_at_lambda1(order)
    return _eq("factodiag1", C * C, _closed("xy_even", order), order, "N=1, lambda=1")


@_identity("xy_even")
def _xy_even(order):
    C = _c11_at_lambda1(order)
    return _eq("xy_even", C * C, _closed("xy_even", order), order, "even separation, N=1, lambda=1")


@_identity("factodiag2")
def _factodiag2(order):
    C1 = _c11_at_lambda1(order)
    C0 = Series.one(order)   # C(0,0) = 1
    return _eq("factodiag2", C1 * C0, _closed("xy_odd", order), order,
               "N=1, lambda=1; product definition only, no independent printed series")


@_identity("sigmamother")
def _sigmamother(order):
    fam = calibrated_family("C11", order + SLACK).family
    C = fam.series
    lhs = fam.sigma.truncate(order) + Series.polynomial([0, Q(1, 4)], order)
    rhs = _tt1(_dlog(C)).truncate(order)
    return _eq("sigmamother", lhs, rhs, order, "C(1,1) family, sigma + t/4 = t (t-1) (ln C)'")


@_identity("canbe")
def _canbe(order):
    chain = toda_chain(1, order, "physical")
    return canbe_report(chain, order, "canbe")


# --------------------------------------------------------------------------
# deformations
# --------------------------------------------------------------------------

DEFORMATIONS: dict[str, Callable[[int], CheckReport]] = {}


def _deformation(name):
    def deco(fn):
        DEFORMATIONS[name] = fn
        return fn
    return deco


def _beta_family(name, order):
    return shift_half(_fam(name, order))


def _logderiv(s: Series) -> Series:
    """t (t - 1) d/dt ln s, for s = c t^v (1 + ...)."""
    return sigma_transform(PrefactoredSeries(0, 0, s), 0)


def _beta1(cid, name, G, printed, order):
    fam = _beta_family(name, order)
    b1 = fam.coefficient_of_param(1)
    ref = _cat().reference_series(printed)
    return _combine(cid, [
        _eq(f"{cid}[closed]", b1, _closed(G, order), order),
        _eq(f"{cid}[printed]", ref, b1.truncate(ref.order), ref.order),
    ], f"printed prefix through t^{ref.order}", checked=order)


@_deformation("f1_beta1")
def _f1_beta1(order):
    return _beta1("f1_beta1", "f1", "f1_beta_G", "f1_beta1_printed", order)


@_deformation("F1_beta1")
def _F1_beta1(order):
    return _beta1("F1_beta1", "F1_25", "F1_beta_G", "F1_beta1_printed", order)


@_deformation("f1_beta0")
def _f1_beta0(order):
    return _eq("f1_beta0", _beta_family("f1", order).coefficient_of_param(0), _closed("f1_05_alphahalf", order), order)


@_deformation("F1_beta0")
def _F1_beta0(order):
    return _eq("F1_beta0", _beta_family("F1_25", order).coefficient_of_param(0),
               _closed("F1_25_alphahalf", order), order)


def _betalog(cid, name, log0, log1, order, printed=None):
    L = _logderiv(_beta_family(name, order))
    parts = [
        _eq(f"{cid}[beta^0]", L.coefficient_of_param(0), _closed(log0, order), order),
        _eq(f"{cid}[beta^1]", L.coefficient_of_param(1), _closed(log1, order), order),
    ]
    if printed:
        ref = _cat().reference_series(printed)
        parts.append(_eq(f"{cid}[printed]", ref, L.coefficient_of_param(0).truncate(ref.order), ref.order))
    return _combine(cid, parts, checked=order)


DEFORMATIONS["f1_betalog"] = lambda order: _betalog("f1_betalog", "f1", "f1_beta_log0", "f1_beta_log1", order)
DEFORMATIONS["F1_betalog"] = lambda order: _betalog("F1_betalog", "F1_25", "F1_beta_log0", "F1_beta_log1", order,
                                                    "F1_beta_log0_printed")


@_deformation("C11_M1")
def _c11_m1(order):
    C = _fam("C11", order)
    return _combine("C11_M1", [
        _eq("C11_M1[M^0]", C.coefficient_of_param(0), _closed("C11_lowT", order), order),
        _eq("C11_M1[M^1]", C.coefficient_of_param(1), _closed("g1_11", order), order),
    ])


@_deformation("C11_lambda_forms")
def _c11_lambda(order):
    C = _times_om(_fam("C11", order, "lambda_sq"), Q(-1, 4))
    return _combine("C11_lambda_forms", [
        _eq("C11_lambda_forms[lambda^0]", C.coefficient_of_param(0), Series.one(order), order),
        _eq("C11_lambda_forms[lambda^2]", C.coefficient_of_param(1), _closed("form11_f2", order), order),
        _eq("C11_lambda_forms[lambda^4]", C.coefficient_of_param(2), _closed("form11_f4", order), order),
    ])


@_deformation("C11_rho")
def _c11_rho(order):
    C = _fam("C11", order, "rho_def")
    parts = [_eq("C11_rho[rho^0]", C.coefficient_of_param(0), _closed("G0_11", order), order)]
    for k in (1, 2, 3):
        parts.append(_eq(f"C11_rho[rho^{k}]", C.coefficient_of_param(k), _closed(f"C11_rho{k}_expansion", order), order))
    return _combine("C11_rho", parts, "M = rho + 2")


# --------------------------------------------------------------------------
# ODE residuals on closed forms
# --------------------------------------------------------------------------

RESIDUALS: dict[str, Callable[[int], CheckReport]] = {}


def _sigma_of(eid: str, a, b, kappa, order: int) -> Series:
    f = _cat().expand_entry(eid, order + 4)
    f = PrefactoredSeries(f.a + to_q(a), f.b + to_q(b), f.body)
    return sigma_transform(f, kappa)


def _residual_check(cid, spec, eid, a, b, kappa, order, notes=""):
    sig = _sigma_of(eid, a, b, kappa, order)
    return vanishes(cid, residual(spec, sig), order, notes)


_RESID = [
    ("residual_C05", OdeSpec("EQNMODD", 5, 0), "C05_product", 0, 0, Q(-1, 4)),
    ("residual_C25", OdeSpec("EQNMODD", 5, 2), "C25_product", 0, 0, Q(-1, 4)),
    ("residual_C11", OdeSpec("DIAG_PVI", 1), "C11_lowT", 0, 0, Q(-1, 4)),
    ("residual_F1_25", OdeSpec("NONLINEAREQ", 5, 2), "F1_25_alpha0", -3, Q(3, 8), 0),
    ("residual_F2_25", OdeSpec("NONLINEAREQ", 5, 2), "F2_25_alpha0", -3, Q(-1, 8), 0),
]
for _j, (_a, _b) in enumerate(((Q(-13, 8), Q(-1, 16)), (Q(-13, 8), Q(3, 16)),
                               (Q(-11, 8), Q(-1, 16)), (Q(-11, 8), Q(3, 16))), 1):
    for _al in (0, 1):
        _RESID.append((f"residual_f{_j}_{_al}", OdeSpec("FOURFACT", 5), f"f{_j}_05_alpha{_al}", _a, _b, 0))

for _cid, _spec, _eid, _a, _b, _k in _RESID:
    RESIDUALS[_cid] = (lambda order, _cid=_cid, _spec=_spec, _eid=_eid, _a=_a, _b=_b, _k=_k:
                       _residual_check(_cid, _spec, _eid, _a, _b, _k, order))


def _pair_residual(cid, i, k, a, b, order):
    cat = _cat()
    f = cat.expand_entry(f"f{i}_05_alpha0", order + 4) * cat.expand_entry(f"f{k}_05_alpha0", order + 4)
    f = PrefactoredSeries(f.a + to_q(a), f.b + to_q(b), f.body)
    return vanishes(cid, residual(OdeSpec("NONLINEAREQ", 5, 0), sigma_transform(f, 0)), order)


RESIDUALS["residual_f1f3_05"] = lambda order: _pair_residual("residual_f1f3_05", 1, 3, -3, Q(-1, 8), order)
RESIDUALS["residual_f2f4_05"] = lambda order: _pair_residual("residual_f2f4_05", 2, 4, -3, Q(3, 8), order)


# --------------------------------------------------------------------------
# Toda recurrence
# --------------------------------------------------------------------------


def toda_lhs(C: Series, N: int) -> Series:
    """t (ln C)'' + (ln C)' + N^2/(1-t)^2."""
    D = _dlog(C).shift(1).derivative()
    return D + _om(-2, D.order).scale(Q(N * N))


def toda_ratio(Cp: Series, C: Series, Cn: Series) -> Series:
    n = min(Cp.order, C.order, Cn.order)
    C = C.truncate(n)
    return Cp.truncate(n) * Cn.truncate(n) * (C * C).inverse()


def toda_residual(Cp: Series, C: Series, Cn: Series, N: int) -> Series:
    """Left minus right side of the Toda relation."""
    lhs = toda_lhs(C, N)
    rhs = _times_om(toda_ratio(Cp, C, Cn), -2).scale(Q(N * N) - Q(1, 4))
    n = min(lhs.order, rhs.order)
    return lhs.truncate(n) - rhs.truncate(n)


def _toda_x(C: Series, N: int) -> Series:
    """(1-t)^2 (t (ln C)'' + (ln C)') + N^2 = (N^2 - 1/4) C_{N-1} C_{N+1} / C_N^2."""
    D = _dlog(C).shift(1).derivative()
    return _times_om(D, 2) + Series.constant(Q(N * N), D.order)


def toda_step(Cp: Series, C: Series, N: int) -> Series:
    """C_{N+1} from C_{N-1} and C_N."""
    X = _toda_x(C, N)
    n = X.order
    C = C.truncate(n)
    return (X * C * C * Cp.truncate(n).inverse()).scale(1 / (Q(N * N) - Q(1, 4)))


def toda_step_back(C: Series, Cn: Series, N: int) -> Series:
    """C_{N-1} from C_N and C_{N+1}."""
    return toda_step(Cn, C, N)


def constant_control(N: int, order: int) -> Series:
    """Toda residual of C_k = 1 for all k; equals (1/4)/(1-t)^2."""
    one = Series.one(order + 2)
    return toda_residual(one, one, one, N).truncate(order)


@dataclass
class TodaChain:
    N: int
    mode: str
    C: dict                       # index -> Series (C_{N-2} .. C_{N+2})
    alignments: list = field(default_factory=list)
    param: str | None = None


def _align_toda(members: dict, unknown: set, N: int, upto: int) -> list[str]:
    """Fix the free parameters of the unknown neighbours.

    Walks up the orders of the Toda residual; at the first order that
    depends on exactly one unknown parameter, the residual (a polynomial of
    degree <= 3 in it, sampled at four points) must have a unique root.
    """
    notes = []
    for k in range(upto + 1):
        if not unknown:
            break
        w = k + 2

        def val(xp=_X0, xn=_Y0):
            P = members["prev"].truncate(w)
            Nx = members["next"].truncate(w)
            if "prev" in unknown:
                P = P.specialize(xp)
            if "next" in unknown:
                Nx = Nx.specialize(xn)
            return toda_residual(P, members["cur"].truncate(w), Nx, N)[k]

        base = val()
        deps = []
        for key in sorted(unknown):
            samples = [val(xp=Q(x)) if key == "prev" else val(xn=Q(x)) for x in _XS]
            if any(s != samples[0] for s in samples) or any(s != base for s in samples):
                deps.append((key, samples))
        if not deps:
            if not _is_zero(base):
                raise CalibrationError(f"Toda residual at t^{k} is {base} whatever the free parameters")
            continue
        if len(deps) > 1:
            raise CalibrationError(f"both neighbour parameters first enter at t^{k}")
        key, samples = deps[0]
        c = _fit(samples)
        deg = max((i for i in range(4) if not _is_zero(c[i])), default=0)
        if deg == 0:
            raise CalibrationError(f"Toda residual at t^{k} is constant in the {key} parameter")
        root = -_div(c[0], c[1]) if deg == 1 else _unique_root(c, deg)
        if root is None:
            raise CalibrationError(f"no unique parameter value kills the Toda residual at t^{k}")
        fam = members[key]
        name = fam.param
        members[key] = fam.specialize(root)
        unknown.discard(key)
        notes.append(f"{name} = {root} (fixed at t^{k})")
    if unknown:
        raise CalibrationError(f"parameters of {sorted(unknown)} never enter the Toda residual up to t^{upto}")
    return notes


def _physical_chain(upto_index: int, order: int) -> dict:
    C = {0: Series.one(order), 1: _closed("C11_lowT", order)}
    for k in range(1, upto_index):
        C[k + 1] = toda_step(C[k - 1], C[k], k)
    return C


def toda_chain(N: int, order: int, mode: str = "calibrated") -> TodaChain:
    """C_{N-2} .. C_{N+2} with C_{N-1}, C_N, C_{N+1} on their DIAG_PVI families.

    physical: C_0 = 1, C_1 = E (lambda = 1), C_k for 2 <= k <= N from the
    recurrence; only the C_{N+1} family parameter is aligned.
    calibrated: C_{N-1}, C_N, C_{N+1} are all solver families; C_N keeps its
    parameter and the two neighbours are aligned to it.
    """
    if N < 1:
        raise ValueError("the chain needs N >= 1")
    if mode not in ("physical", "calibrated"):
        raise ValueError(f"unknown lambda_mode {mode!r}")
    work = order + SLACK
    nxt = raw_family(diagonal_family_def(N + 1).name, work).series
    if mode == "physical":
        base = _physical_chain(N, work)
        members = {"prev": base[N - 1], "cur": base[N], "next": nxt}
        unknown = {"next"}
    else:
        members = {"prev": raw_family(diagonal_family_def(N - 1).name, work).series,
                   "cur": raw_family(diagonal_family_def(N).name, work).series, "next": nxt}
        unknown = {"prev", "next"}
    notes = _align_toda(members, unknown, N, work - 4)
    C = {N - 1: members["prev"], N: members["cur"], N + 1: members["next"]}
    C[N + 2] = toda_step(C[N], C[N + 1], N + 1)
    C[N - 2] = toda_step_back(C[N - 1], C[N], N - 1)
    return TodaChain(N, mode, C, notes, members["cur"].param)


def _R(chain: TodaChain, k: int) -> Series:
    C = chain.C
    return toda_ratio(C[k - 1], C[k], C[k + 1])


def _sigmas(chain: TodaChain):
    N, C = chain.N, chain.C
    sigma = sigma_transform(PrefactoredSeries.of(C[N]), Q(-1, 4))
    n = min(C[N - 1].order, C[N + 1].order)
    Sigma = sigma_transform(PrefactoredSeries.of(C[N - 1].truncate(n) * C[N + 1].truncate(n)), 0)
    return sigma, Sigma


def becomes_residual(chain: TodaChain) -> Series:
    """The sigma/Sigma form of the Toda relation."""
    N = chain.N
    s, S = _sigmas(chain)
    d1 = s.derivative()
    d2 = d1.derivative()
    n = min(d2.order, S.order)
    s, d1, d2, S = (x.truncate(n) for x in (s, d1, d2, S))
    t = Series.polynomial([0, 1], n)
    tm1 = Series.polynomial([-1, 1], n)
    k = Q(4 * N * N - 1)
    out = (d2 * tm1 * tm1 * t).scale(8)
    out = out + (tm1 * (t + s.scale(4)) * d1).scale(4)
    out = out - (s * s).scale(16)
    out = out + ((Series.constant(k, n) - t) * s).scale(4)
    out = out + t.scale(k)
    out = out - ((Series.constant(k, n) + (tm1 * d1).scale(4) - s.scale(4)) * S).scale(2)
    return out


def canbe_report(chain: TodaChain, order: int, cid: str = "canbe") -> CheckReport:
    N = chain.N
    s, S = _sigmas(chain)
    P = PrefactoredSeries(0, -2, _R(chain, N))     # (N^2 - 1/4)/(1-t)^2 R_N up to a constant
    lhs = sigma_transform(P, 0)
    n = min(S.order, s.order, lhs.order)
    rhs = S.truncate(n) - s.truncate(n).scale(2) - Series.polynomial([0, Q(5, 2)], n)
    return _eq(cid, lhs.truncate(n), rhs, order, f"N={N}, {chain.mode}")


def toda3_residual(chain: TodaChain) -> Series:
    """D ln R_N + 2/(1-t)^2 - sum_k c_k R_k/(1-t)^2 with D = d/dt t d/dt."""
    N = chain.N
    R = {k: _R(chain, k) for k in (N - 1, N, N + 1)}
    D = _dlog(R[N]).shift(1).derivative()
    n = min(D.order, *(r.order for r in R.values()))
    w = lambda m: Q(m * m) - Q(1, 4)
    rhs = R[N - 1].truncate(n).scale(w(N - 1)) + R[N + 1].truncate(n).scale(w(N + 1)) - R[N].truncate(n).scale(2 * w(N))
    return D.truncate(n) + _times_om(Series.constant(2, n) - rhs, -2)


def toda3b_residual(chain: TodaChain) -> Series:
    """(1/t) (t d/dt)^2 ln P_N - (P_{N-1} + P_{N+1} - 2 P_N)."""
    N = chain.N
    w = lambda m: Q(m * m) - Q(1, 4)
    P = {k: _times_om(_R(chain, k), -2).scale(w(k)) for k in (N - 1, N, N + 1)}
    # ln P_N has derivative R'/R + 2/(1-t)
    g = _dlog(_R(chain, N))
    g = g + _om(-1, g.order).scale(2)
    D = g.shift(1).derivative()
    n = min(D.order, *(p.order for p in P.values()))
    return D.truncate(n) - (P[N - 1].truncate(n) + P[N + 1].truncate(n) - P[N].truncate(n).scale(2))


def toda_subchecks(N: int, order: int, lambda_mode: str = "calibrated") -> tuple[list[CheckReport], TodaChain]:
    chain = toda_chain(N, order, lambda_mode)
    C = chain.C
    tag = f"toda_N{N}_{lambda_mode}"
    parts = [
        vanishes(f"{tag}[Toda]", toda_residual(C[N - 1], C[N], C[N + 1], N), order),
        vanishes(f"{tag}[becomes]", becomes_residual(chain), order),
        canbe_report(chain, order, f"{tag}[canbe]"),
        vanishes(f"{tag}[Toda3]", toda3_residual(chain), order),
        vanishes(f"{tag}[Toda3b]", toda3b_residual(chain), order),
    ]
    # the aligned C_{N+1} must be a member of its own family, not just a Toda output
    nxt = C[N + 1]
    pvi = residual(OdeSpec("DIAG_PVI", N + 1), sigma_transform(PrefactoredSeries.of(nxt), Q(-1, 4)))
    parts.append(vanishes(f"{tag}[DIAG_PVI({N + 1})]", pvi, order))
    return parts, chain


def check_toda(N: int, order: int, lambda_mode: str = "calibrated") -> CheckReport:
    cid = f"toda_N{N}_{lambda_mode}"
    try:
        parts, chain = toda_subchecks(N, order, lambda_mode)
    except (CalibrationError, SolverError) as exc:
        return CheckReport(cid, "inconclusive", 0, None, f"calibration failure: {exc}")
    notes = "; ".join(chain.alignments)
    return _combine(cid, parts, notes)


def check_toda_constant(N: int, order: int) -> CheckReport:
    """Negative control: C_k = 1 for all k must fail."""
    res = constant_control(N, order)
    expected = _om(-2, order).scale(Q(1, 4))
    rep = vanishes(f"toda_constant_N{N}", res, order)
    ok = res == expected
    note = "residual equals (1/4)/(1-t)^2" if ok else "residual differs from (1/4)/(1-t)^2"
    return CheckReport(rep.check_id, rep.status, rep.checked_order, rep.first_mismatch, note)


# --------------------------------------------------------------------------
# globally bounded series
# --------------------------------------------------------------------------


@dataclass
class GBReport:
    parameter_value: object
    rescale_factor: int
    verified_prefix: int
    all_integer: bool
    notes: str = ""

    def to_json(self) -> dict:
        return {"parameter_value": fmt_q(to_q(self.parameter_value)), "rescale_factor": self.rescale_factor,
                "verified_prefix": self.verified_prefix, "all_integer": self.all_integer, "notes": self.notes}


def _prime_support(n: int, bound: int) -> tuple[dict, int]:
    """Exponents of the primes <= bound dividing n, and the unfactored rest."""
    out = {}
    p = 2
    while p <= bound and n > 1:
        if p * p > n:
            if n <= bound:
                out[n] = out.get(n, 0) + 1
                n = 1
            break
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    return out, n


def _vp(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def gb_check(family, param, max_rescale: int = 4096, order: int | None = None,
             rescale: int | None = None) -> GBReport:
    """Smallest t -> N t making the prefix integral (evidence, not proof).

    ``family`` is a FamilySeries or a Series over the parameter ring; with
    ``rescale`` given that factor is tested instead of searched for.
    """
    s = family.series if hasattr(family, "series") else family
    if order is not None:
        s = s.truncate(min(order, s.order))
    s = s.specialize(to_q(param)) if s.param is not None else s
    notes = ""
    if rescale is None:
        exps: dict = {}
        leftover = False
        for n in range(1, s.order + 1):
            c = to_q(s[n])
            d = int(c.denominator)
            if d == 1:
                continue
            primes, rest = _prime_support(d, max_rescale)
            if rest > 1:
                leftover = True
            for p in primes:
                e = -(-_vp(d, p) // n)
                exps[p] = max(exps.get(p, 0), e)
        N = 1
        for p, e in sorted(exps.items()):
            N *= p ** e
        if leftover or N > max_rescale:
            return GBReport(to_q(param), N, 0, False,
                            f"no rescale factor <= {max_rescale} found (denominator support needs {N}"
                            + (" and primes above the bound" if leftover else "") + ")")
    else:
        N = int(rescale)
    r = s.rescale(N)
    prefix = 0
    for n in range(r.order + 1):
        if to_q(r[n]).denominator != 1:
            break
        prefix += 1
    all_int = prefix == r.order + 1
    if not all_int:
        notes = f"first non-integer coefficient at t^{prefix}"
    return GBReport(to_q(param), N, prefix, all_int, notes)


def _glob_check(M, order) -> CheckReport:
    cid = f"glob_M{M}"
    fam = calibrated_family("C11", order + SLACK).family
    rep = gb_check(fam, M, order=order, rescale=16)
    parts = []
    if not rep.all_integer:
        n = rep.verified_prefix
        got = fam.series.specialize(Q(M)).rescale(16)[n]
        parts.append(CheckReport(cid, "fail", order, (n, "integer", fmt_q(got)), rep.notes))
    else:
        parts.append(CheckReport(cid, "pass", order, None, f"integer prefix verified: {rep.verified_prefix} terms"))
    ref = _cat().reference_series("C11_glob")
    mine = fam.series.rescale(16).truncate(ref.order)
    parts.append(_eq(f"{cid}[printed]", ref.specialize(Q(M)), mine.specialize(Q(M)), ref.order))
    return _combine(cid, parts, f"printed prefix through t^{ref.order}", checked=order)


def _gb_rational(M, order) -> CheckReport:
    cid = f"gb_M{fmt_q(to_q(M)).replace('/', '_')}"
    fam = calibrated_family("C11", order + SLACK).family
    rep = gb_check(fam, to_q(M), order=order)
    if rep.all_integer:
        return CheckReport(cid, "pass", order, None,
                           f"rescale {rep.rescale_factor}; integer prefix verified: {rep.verified_prefix} terms")
    return CheckReport(cid, "inconclusive", order, None, rep.notes)


def glob_consistency(order: int = 10) -> CheckReport:
    """The rescaled printed series is 16^n times the printed t-series where both exist."""
    g = _cat().reference_series("C11_glob")
    m = _cat().reference_series("C11_M")
    n = min(g.order, m.order, order)
    return _eq("glob_consistency", g.truncate(n), m.truncate(n).rescale(16), n)


# --------------------------------------------------------------------------
# valuation law
# --------------------------------------------------------------------------

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow}


def eval_law(expr: str, N: int):
    """Evaluate a small arithmetic expression in N exactly."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            left, right = ev(node.left), ev(node.right)
            if type(node.op) is ast.Pow:
                if right.denominator != 1:
                    raise ValueError(f"non-integer exponent in law {expr!r}")
                right = int(right)
            return _OPS[type(node.op)](left, right)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return Q(node.value)
        if isinstance(node, ast.Name) and node.id == "N":
            return Q(N)
        raise ValueError(f"unsupported syntax in law {expr!r}")
    # '^' is exponentiation here, with Python's precedence for '**'
    return ev(ast.parse(expr.replace("^", "**"), mode="eval"))


def valuation_law(N: int):
    for eid in _cat().ids("valuation_law"):
        law, applies = _cat().get(eid).payload
        if N in applies:
            return eval_law(law, N), eid
    raise KeyError(f"no valuation law covers N={N}")


def check_valuation(N: int, order: int = 12) -> CheckReport:
    cid = f"valuation_f1_N{N}"
    expected, law = valuation_law(N)
    s = _closed(f"f1_N{N}", order)
    v = s.valuation()
    if v is None or Q(v) != expected:
        return CheckReport(cid, "fail", order, (v if v is not None else order, fmt_q(expected), str(v)),
                           f"law {law}")
    return CheckReport(cid, "pass", order, None, f"valuation {v} per {law}")


# --------------------------------------------------------------------------
# negative controls
# --------------------------------------------------------------------------

EPS = Q(1, 2 ** 50)


def neg_identity_f2_f1(order: int, at: int = 5) -> CheckReport:
    """identity_f2_f1 with f1 nudged by 2^-50 at t^at."""
    f1 = _fam("f1", order)
    c = f1.coeffs
    c[at] = c[at] + EPS
    f1 = Series(c, f1.order, f1.param)
    f2 = _fam("f2", order)
    return _eq("neg_identity_f2_f1", reflect(f1), _times_om(f2, Q(1, 4)), order, f"perturbed at t^{at}")


def neg_C05_lambda(order: int, at: int = 7) -> CheckReport:
    """Calibration of C05 against its printed series with t^at nudged."""
    ref = _cat().reference_series("C05_lambda")
    c = ref.coeffs
    c[at] = c[at] + EPS
    ref = Series(c, ref.order, ref.param)
    fam = raw_family("C05", max(order, ref.order) + SLACK)
    pmap, bad = calibrate_against(fam, ref)
    if bad is None:
        return CheckReport("neg_C05_lambda", "pass", ref.order, None, pmap.describe())
    got = fam.reparametrize(pmap).series
    return CheckReport("neg_C05_lambda", "fail", ref.order, (bad, ref.coeff_str(bad), got.coeff_str(bad)),
                       f"perturbed at t^{at}")


# --------------------------------------------------------------------------
# solver reproduction
# --------------------------------------------------------------------------


def check_reproduction(name: str, parameter: str | None = None, order: int | None = None) -> CheckReport:
    """Calibrated family against its printed series, every printed order."""
    cal = calibrated_family(name, max(order or 0, 12) + SLACK, parameter)
    cid = f"solver_{cal.reference}"
    ref = _cat().reference_series(cal.reference)
    return _eq(cid, ref, cal.series.truncate(ref.order), ref.order, cal.pmap.describe())


# --------------------------------------------------------------------------
# registry, suite
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    kind: str
    run: Callable[[int], object]
    default_order: int = 20


CHECKS: dict[str, Check] = {}
for _cid, _fn in IDENTITIES.items():
    CHECKS[_cid] = Check("identity", _fn)
for _cid, _fn in DEFORMATIONS.items():
    CHECKS[_cid] = Check("deformation", _fn)
for _cid, _fn in RESIDUALS.items():
    CHECKS[_cid] = Check("residual", _fn, 30)
for _mode in ("physical", "calibrated"):
    CHECKS[f"toda_N1_{_mode}"] = Check("toda", lambda order, _m=_mode: check_toda(1, order, _m))
CHECKS["toda_constant_N1"] = Check("toda", lambda order: check_toda_constant(1, order))
for _M in range(6):
    CHECKS[f"glob_M{_M}"] = Check("arithmetic", lambda order, _M=_M: _glob_check(_M, order), 25)
for _M in ("1/2", "1/3", "2/5"):
    CHECKS[f"gb_M{_M.replace('/', '_')}"] = Check("arithmetic", lambda order, _M=_M: _gb_rational(_M, order), 25)
CHECKS["glob_consistency"] = Check("arithmetic", glob_consistency, 10)
for _N in (5, 7, 9):
    CHECKS[f"valuation_f1_N{_N}"] = Check("property", lambda order, _N=_N: check_valuation(_N, order), 12)
CHECKS["neg_identity_f2_f1"] = Check("negative", neg_identity_f2_f1)
CHECKS["neg_C05_lambda"] = Check("negative", neg_C05_lambda, 9)
for _n, _p in (("C05", "lambda_sq"), ("C05", "mu"), ("C25", "lambda_sq"), ("C25", "mu"), ("C11", "M_def"),
               ("f1", None), ("f2", None), ("f3", None), ("f4", None), ("F1_25", None), ("F2_25", None)):
    _id = f"solver_{_n}" + (f"_{_p}" if _p else "")
    CHECKS[_id] = Check("solver", lambda order, _n=_n, _p=_p: check_reproduction(_n, _p, order), 9)


def _lookup(check_id: str, kinds: tuple | None = None) -> Check:
    c = CHECKS.get(check_id)
    if c is None or (kinds and c.kind not in kinds):
        raise UnknownCheck(check_id)
    return c


def check_identity(id: str, order: int) -> CheckReport:
    return _lookup(id, ("identity",)).run(order)


def check_deformation(id: str, order: int) -> CheckReport:
    return _lookup(id, ("deformation",)).run(order)


def run_check(check_id: str, order: int | None = None) -> CheckReport:
    c = _lookup(check_id)
    rep = c.run(order if order is not None else c.default_order)
    if isinstance(rep, CheckReport) and rep.check_id != check_id:
        rep = CheckReport(check_id, rep.status, rep.checked_order, rep.first_mismatch, rep.notes)
    return rep


@dataclass(frozen=True)
class SuiteItem:
    check_id: str
    order: int | None = None
    expect: str = "pass"
    expect_order: int | None = None   # for expected failures: where the mismatch must be


def parse_manifest(text: str) -> list[SuiteItem]:
    """Lines ``check_id [order] [expect=fail[@k]]``; ``#`` starts a comment."""
    items = []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        bits = ln.split()
        order = None
        expect, at = "pass", None
        for b in bits[1:]:
            if b.startswith("expect="):
                e = b[7:]
                if "@" in e:
                    e, k = e.split("@")
                    at = int(k)
                if e not in ("pass", "fail", "inconclusive"):
                    raise ValueError(f"bad expectation {b!r} for {bits[0]}")
                expect = e
            else:
                order = int(b)
        items.append(SuiteItem(bits[0], order, expect, at))
    return items


def default_manifest() -> list[SuiteItem]:
    return parse_manifest(resources.files("lambda_ext").joinpath("data/suite.txt").read_text(encoding="utf-8"))


def load_manifest(path: str | Path | None = None) -> list[SuiteItem]:
    if path is None:
        return default_manifest()
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


def meets_expectation(item: SuiteItem, rep: CheckReport) -> bool:
    if rep.status != item.expect:
        return False
    if item.expect == "fail" and item.expect_order is not None:
        return rep.first_mismatch is not None and rep.first_mismatch[0] == item.expect_order
    return True


def _run_item(item: SuiteItem, order: int | None):
    o = order if order is not None and item.order is None else item.order
    return run_check(item.check_id, o)


def run_suite(items: list[SuiteItem] | None = None, order: int | None = None,
              jobs: int = 1) -> list[tuple[SuiteItem, CheckReport]]:
    """Run every manifest item; ``order`` overrides items without their own order.

    Results come back sorted by check id whatever ``jobs`` is.
    """
    items = list(items if items is not None else default_manifest())
    for it in items:
        _lookup(it.check_id)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            reps = list(ex.map(_run_item, items, [order] * len(items)))
    else:
        reps = [_run_item(it, order) for it in items]
    return sorted(zip(items, reps), key=lambda p: p[0].check_id)


__all__ = [
    "CHECKS", "Check", "GBReport", "SuiteItem", "TodaChain", "UnknownCheck", "becomes_residual",
    "check_deformation", "check_identity", "check_reproduction", "check_toda", "check_toda_constant",
    "check_valuation", "constant_control", "default_manifest", "gb_check", "glob_consistency", "load_manifest",
    "meets_expectation", "neg_C05_lambda", "neg_identity_f2_f1", "parse_manifest", "run_check", "run_suite",
    "toda3_residual", "toda3b_residual", "toda_chain", "toda_residual", "toda_step", "toda_subchecks",
    "valuation_law",
]
