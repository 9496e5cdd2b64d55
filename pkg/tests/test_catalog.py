import pytest

from lambda_ext import Q, Series
from lambda_ext.catalog import (Catalog, CatalogError, EKPolynomial, OrderBeyondPrinted, UnknownEntry,
                                default_catalog, parse_catalog)
from lambda_ext.special import elliptic_e
from lambda_ext.verification import eval_law


@pytest.fixture(scope="module")
def cat():
    return default_catalog()


def test_regime_metadata(cat):
    e = cat.get("C05_lambda")
    assert e.regime == {"temperature": "low", "nu_condition": "ν = −k", "t_def": "t = k²"}


def test_expand_factor_at_alpha0(cat):
    s = cat.series("f1_05_alpha0", 4)
    assert s.coeffs == [0, Q(3, 2), Q(-9, 16), Q(-15, 128), Q(-105, 2048)]


def test_expand_two_factor_member(cat):
    f = cat.expand_entry("F2_25_alpha0", 3)
    assert f.a == 3
    assert f.to_series(6).coeffs[3:] == [Q(-45, 16), Q(45, 128), Q(315, 2048), Q(315, 4096)]


def test_c11_is_e(cat):
    assert cat.series("C11_lowT", 25) == elliptic_e(25)


def test_printed_series(cat):
    s = cat.reference_series("C05_lambda", 6)
    assert s.coeff_str(6) == "-1463/65536 - 25/1048576*lambda_sq"
    assert cat.reference_series("C25_lambda", 6).coeff_str(6) == "-1463/65536 - 49/1048576*lambda_sq"
    assert cat.reference_series("C11_M", 6).coeff_str(6) == "-4851/1048576 - 9281/2097152*M_def + 5/16777216*M_def^2"


def test_beyond_printed(cat):
    with pytest.raises(OrderBeyondPrinted):
        cat.reference_series("C05_lambda", 9)


def test_unknown_entry(cat):
    with pytest.raises(UnknownEntry):
        cat.get("no_such_entry")
    with pytest.raises(KeyError):
        cat.series("no_such_entry", 3)


def test_tags(cat):
    assert cat.tag("C05_lambda", 6) == "C05L"
    assert cat.tag("f4_alpha", 9) == "f_4alpha"


def test_flags(cat):
    assert any(f.startswith("ambiguous") for f in cat.get("f4_alpha").flags)
    assert any("77403" in f for f in cat.get("C25_mu").flags)


def test_homogeneity(cat):
    for eid in cat.ids("ek_polynomial"):
        e = cat.get(eid)
        assert isinstance(e.payload, EKPolynomial)
        mixed = any(f.startswith("inhomogeneous") for f in e.flags)
        assert e.payload.is_homogeneous() != mixed, eid


@pytest.mark.parametrize("N, law", [(5, "f1N_odd1mod4"), (7, "f1N_odd3mod4"), (9, "f1N_odd1mod4")])
def test_leading_valuation_law(cat, N, law):
    expr, applies = cat.get(law).payload
    assert N in applies
    v = eval_law(expr, N)
    assert v.denominator == 1
    v = int(v)
    s = cat.series(f"f1_N{N}", v + 3)
    assert s.valuation() == v
    assert s[v - 1] == 0


@pytest.mark.parametrize("lam, mu, n", [("C05_lambda", "C05_mu", 8), ("C25_lambda", "C25_mu", 8)])
def test_cross_fixture_consistency(cat, lam, mu, n):
    a = cat.reference_series(lam, n).specialize(1)
    b = cat.reference_series(mu, n).specialize(0)
    assert a == b


def test_cross_fixture_values(cat):
    assert cat.reference_series("C05_mu", 6).specialize(0)[6] == Q(-23433, 1048576)
    assert cat.reference_series("C25_mu", 6).specialize(0)[6] == Q(-23457, 1048576)


def test_every_entry_loads(cat):
    for eid in cat.ids("ek_polynomial") + cat.ids("alg_expr"):
        f = cat.expand_entry(eid, 6)
        assert f.order >= 6, eid
    for eid in cat.ids("reference_series"):
        e = cat.get(eid)
        assert cat.reference_series(eid).order == e.printed_order
        assert set(e.tags) == set(range(e.printed_order + 1)), eid


def test_parse_minimal():
    text = """
x | alg_expr | - | (1-t)^(1/2)
p | reference_series | mu | printed
    t^0 : 1  @A
    t^1 : 1/2 - 3*mu  @A
"""
    c = Catalog.from_text(text)
    assert c.series("x", 2) == Series.binomial(Q(1, 2), 2)
    assert c.reference_series("p").coeff_str(1) == "1/2 - 3*mu"


@pytest.mark.parametrize("text", [
    "x | nonsense | - | 1",
    "x | alg_expr | - | t\nx | alg_expr | - | t",
    "p | reference_series | mu | printed\n    t^0 : 1\n    t^2 : 1",
    "p | reference_series | mu | printed\n    t^0 : 1 + alpha",
    "  t^0 : 1",
    "no separators here",
])
def test_parse_errors(text):
    with pytest.raises(CatalogError):
        parse_catalog(text)


def test_env_override(tmp_path, monkeypatch):
    f = tmp_path / "cat.txt"
    f.write_text("only | alg_expr | - | E\n", encoding="utf-8")
    monkeypatch.setenv("LAMBDA_EXT_CATALOG", str(f))
    c = default_catalog()
    assert c.ids() == ["only"]
    assert c.source == str(f)
