import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambda_ext import ParamPoly, PrefactoredSeries, Q, Series, sigma_transform
from lambda_ext.catalog import default_catalog
from lambda_ext.families import FAMILIES, raw_family
from lambda_ext.odes import (CheckReport, OdeOrderError, OdeSpec, SigmaSeries, additive_split_check, compare_series,
                             residual)
from lambda_ext.special import elliptic_e

Q4 = Q(-1, 4)


def _sigma(eid, order, kappa=0, a=0, b=0):
    f = default_catalog().expand_entry(eid, order + 2)
    f = PrefactoredSeries(f.a + a, f.b + b, f.body)
    return sigma_transform(f, kappa).truncate(order)


@pytest.mark.parametrize("args", [("EQNMODD", 5, 0), ("EQNMODD", 5, 2), ("NONLINEAREQ", 3, 0), ("NONLINEAREQ", 4, 1)])
def test_valid_specs(args):
    assert OdeSpec(*args).label().startswith(args[0])


@pytest.mark.parametrize("args", [("EQNMODD", 5, 1), ("EQNMODD", 3, 4), ("NONLINEAREQ", 5, None), ("PVII", 1, None)])
def test_invalid_specs(args):
    with pytest.raises(ValueError):
        OdeSpec(*args)


def test_short_sigma_rejected():
    with pytest.raises(OdeOrderError):
        residual(OdeSpec("DIAG_PVI", 1), Series.zero(3))


@pytest.mark.parametrize("spec", [OdeSpec("EQNMODD", 5, 0), OdeSpec("EQNMODD", 5, 2), OdeSpec("NONLINEAREQ", 5, 2)])
def test_zero_sigma_is_a_solution(spec):
    assert residual(spec, Series.zero(12)).is_zero()


def test_c05_closed_form():
    sig = _sigma("C05_product", 32, Q4)
    r = residual(OdeSpec("EQNMODD", 5, 0), SigmaSeries(sig, "C05_product", (0, 0), Q4))
    assert r.order >= 30
    assert r.is_zero()


def test_c11_is_e():
    E = PrefactoredSeries(0, 0, elliptic_e(34))
    r = residual(OdeSpec("DIAG_PVI", 1), sigma_transform(E, Q4))
    assert r.order >= 30 and r.is_zero()


def test_residual_detects_a_wrong_equation():
    E = PrefactoredSeries(0, 0, elliptic_e(20))
    assert not residual(OdeSpec("DIAG_PVI", 2), sigma_transform(E, Q4)).is_zero()


def _split(total_id, factor_ids, const, n):
    total = _sigma(total_id, n, Q4)
    pref = sigma_transform(PrefactoredSeries(-6, Q(1, 2), Series.constant(const, n)), Q4)
    parts = [pref] + [_sigma(f, n) for f in factor_ids]
    return additive_split_check(total, parts, total_id)


def test_additive_split_c05():
    rep = _split("C05_product", [f"f{j}_05_alpha0" for j in range(1, 5)], Q(256, 81), 25)
    assert rep.passed and rep.checked_order == 25


def test_additive_split_c25():
    rep = _split("C25_product", ["F1_25_alpha0", "F2_25_alpha0"], Q(256, 2025), 25)
    assert rep.passed and rep.checked_order == 25


def test_additive_split_trivial():
    z = Series.zero(6)
    assert additive_split_check(z, [z, z]).passed


def test_additive_split_reports_mismatch():
    rep = additive_split_check(Series.polynomial([0, 1], 6), [Series.polynomial([0, 1, 1], 6)])
    assert rep.status == "fail" and rep.first_mismatch[0] == 2


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_fourfact_shared_by_all_factors(j):
    a, b, k = FAMILIES[f"f{j}"].normalization
    for alpha in (0, 1):
        sig = _sigma(f"f{j}_05_alpha{alpha}", 24, k, a, b)
        assert residual(OdeSpec("FOURFACT", 5), sig).is_zero()


@settings(max_examples=3, deadline=None)
@given(st.builds(Q, st.integers(-9, 9), st.integers(1, 7)))
def test_residual_commutes_with_specialization(x):
    fam = raw_family("C05", 14)
    spec = OdeSpec("EQNMODD", 5, 0)
    r = residual(spec, fam.sigma)
    assert r.specialize(x) == residual(spec, fam.sigma.specialize(x))


def test_check_report_invariant():
    with pytest.raises(ValueError):
        CheckReport("x", "fail", 3)
    with pytest.raises(ValueError):
        CheckReport("x", "maybe", 3)


def test_compare_series_first_mismatch():
    a = Series([ParamPoly([1], "mu"), ParamPoly([1, 1], "mu")])
    b = Series([ParamPoly([1], "mu"), ParamPoly([1, 2], "mu")])
    rep = compare_series("c", a, b)
    assert rep.first_mismatch == (1, "1 + mu", "1 + 2*mu")
    assert rep.to_json()["first_mismatch"]["order"] == 1
