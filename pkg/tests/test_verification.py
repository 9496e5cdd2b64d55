import json

import pytest

from lambda_ext import Q, Series
from lambda_ext.catalog import default_catalog
from lambda_ext.families import calibrated_family
from lambda_ext.special import elliptic_e
from lambda_ext.verification import (CHECKS, IDENTITIES, EPS, SuiteItem, UnknownCheck, check_deformation,
                                     check_identity, check_toda, check_toda_constant, check_valuation,
                                     constant_control, gb_check, glob_consistency, meets_expectation,
                                     neg_C05_lambda, neg_identity_f2_f1, parse_manifest, run_check, run_suite,
                                     valuation_law)


def test_reflection_identity():
    rep = check_identity("identity_f2_f1", 9)
    assert rep.passed and rep.checked_order == 9


def test_verif_closed_value():
    closed = default_catalog().series("verif_closed", 6)
    assert closed.coeffs[3:5] == [Q(-9, 16), Q(9, 128)]
    assert check_identity("verif_f1f3", 20).passed


def test_xy_even():
    rep = check_identity("xy_even", 20)
    assert rep.passed
    assert default_catalog().series("xy_even", 2)[1] == Q(-1, 2)


def test_identity_rejects_other_kinds():
    with pytest.raises(UnknownCheck):
        check_identity("f1_beta1", 10)
    with pytest.raises(UnknownCheck):
        run_check("nope")


def test_beta1_deformation():
    assert check_deformation("f1_beta1", 20).passed
    assert check_deformation("f1_beta0", 20).passed


def test_m1_deformation():
    s = calibrated_family("C11", 10).series.coefficient_of_param(1)
    assert s[2] == Q(-3, 256)
    assert check_deformation("C11_M1", 20).passed


def test_toda_calibrated():
    rep = check_toda(1, 20, "calibrated")
    assert rep.passed and rep.checked_order == 20


def test_toda_physical():
    assert check_toda(1, 20, "physical").passed


def test_toda_constant_control():
    r = constant_control(1, 15)
    assert r == Series([Q(n + 1, 4) for n in range(16)])
    rep = check_toda_constant(1, 15)
    assert rep.status == "fail" and rep.first_mismatch[0] == 0
    assert rep.notes == "residual equals (1/4)/(1-t)^2"


def test_canbe():
    assert check_identity("canbe", 20).passed


def test_gb_m1_printed_integers():
    rep = gb_check(calibrated_family("C11", 12).series, 1, order=10, rescale=16)
    assert rep.verified_prefix == 11 and rep.all_integer
    s = calibrated_family("C11", 12).series.specialize(1).rescale(16)
    assert s.coeffs[:7] == [1, -4, -15, -116, -1141, -12684, -151859]


def test_gb_m0_is_rescaled_e():
    s = calibrated_family("C11", 12).series.specialize(0).rescale(16)
    assert s.coeffs[:5] == [1, -4, -12, -80, -700]
    assert s.truncate(12) == elliptic_e(12).rescale(16)


def test_gb_search_half():
    rep = gb_check(calibrated_family("C11", 28).series, Q(1, 2), order=20)
    assert rep.all_integer and rep.verified_prefix == 21
    assert rep.rescale_factor <= 64
    assert json.loads(json.dumps(rep.to_json()))["parameter_value"] == "1/2"


def test_gb_search_gives_up():
    s = Series([Q(1), Q(1, 10007), Q(1, 10007 ** 2)])
    rep = gb_check(s, 0, max_rescale=100)
    assert not rep.all_integer and rep.verified_prefix == 0


def test_glob_consistency():
    assert glob_consistency(10).passed


@pytest.mark.parametrize("N, v", [(5, 1), (7, 4), (9, 4)])
def test_valuation_law(N, v):
    value, law = valuation_law(N)
    assert value == v and law.startswith("f1N_odd")
    assert check_valuation(N).passed


def test_negative_controls():
    assert EPS == Q(1, 2 ** 50)
    r = neg_identity_f2_f1(12)
    assert r.status == "fail" and r.first_mismatch[0] == 5
    r = neg_C05_lambda(12)
    assert r.status == "fail" and r.first_mismatch[0] == 7


def test_every_identity_is_registered():
    for cid in IDENTITIES:
        assert CHECKS[cid].kind == "identity"


def test_manifest_parsing():
    items = parse_manifest("# header\nfoo\nbar 30  # comment\nbaz expect=fail@4\n\nqux 12 expect=inconclusive\n")
    assert items == [SuiteItem("foo", None, "pass", None), SuiteItem("bar", 30, "pass", None),
                     SuiteItem("baz", None, "fail", 4), SuiteItem("qux", 12, "inconclusive", None)]
    with pytest.raises(ValueError):
        parse_manifest("foo expect=maybe")


def test_suite_ordering_and_expectations():
    items = parse_manifest("toda_constant_N1 expect=fail@0\nidentity_f2_f1 12\nneg_identity_f2_f1 expect=fail@5\n")
    serial = run_suite(items, 10, jobs=1)
    parallel = run_suite(items, 10, jobs=2)
    assert [it.check_id for it, _ in serial] == sorted(it.check_id for it in items)
    assert [r for _, r in serial] == [r for _, r in parallel]
    assert all(meets_expectation(it, r) for it, r in serial)


def test_suite_rejects_unknown_ids_up_front():
    with pytest.raises(UnknownCheck):
        run_suite(parse_manifest("identity_f2_f1\nno_such_check"))


def test_expectation_must_match_order():
    rep = neg_identity_f2_f1(12)
    assert not meets_expectation(SuiteItem("neg_identity_f2_f1", None, "fail", 6), rep)
    assert not meets_expectation(SuiteItem("neg_identity_f2_f1", None, "pass", None), rep)
