from fractions import Fraction
from math import factorial

import pytest

from lambda_ext import Q, Series
from lambda_ext.series import pow_rational
from lambda_ext.special import (Const, ExpressionError, InvalidHypergeometric, elliptic_e, elliptic_e_prime,
                                elliptic_k, elliptic_k_prime, eval_alg_expr, hyp2f1_series, parse_expr,
                                shifted_series)


def _poch(x, n):
    out = Fraction(1)
    for k in range(n):
        out *= x + k
    return out


def _direct(a, b, c, n):
    a, b, c = Fraction(a), Fraction(b), Fraction(c)
    return _poch(a, n) * _poch(b, n) / (_poch(c, n) * factorial(n))


@pytest.mark.parametrize("abc", [("1/2", "1/2", 1), ("1/2", "-1/2", 1), ("3/2", "3/2", 3), ("-1/3", "2/5", "7/4")])
def test_hyp2f1_matches_factorial_formula(abc):
    s = hyp2f1_series(*abc, 15)
    for n in range(16):
        assert Fraction(str(s[n])) == _direct(*abc, n)


def test_hyp2f1_printed_values():
    assert hyp2f1_series(Q(1, 2), Q(1, 2), 1, 3).coeffs == [1, Q(1, 4), Q(9, 64), Q(25, 256)]
    assert elliptic_e(4).coeffs == [1, Q(-1, 4), Q(-3, 64), Q(-5, 256), Q(-175, 16384)]


def test_hyp2f1_zero_upper_parameter():
    assert hyp2f1_series(0, Q(1, 3), 2, 10) == Series.one(10)


def test_hyp2f1_bad_lower_parameter():
    with pytest.raises(InvalidHypergeometric):
        hyp2f1_series(1, 1, -2, 5)


def test_legendre_type_relation():
    n = 41
    E, K = elliptic_e(n), elliptic_k(n)
    lhs = E.derivative()
    rhs = (E - K).shift(-1).scale(Q(1, 2))
    assert (lhs - rhs).truncate(40).is_zero()
    assert elliptic_e_prime(40) == lhs.truncate(40)
    assert elliptic_k_prime(40) == K.derivative().truncate(40)


def test_shifted_is_square_of_its_root():
    s = shifted_series(30)
    assert s[0] == 1
    r = pow_rational(s, Q(1, 2))
    assert r * r == s


def test_shifted_definition():
    # 2(1 - sqrt(1-t))/t, times t, is 2 - 2 sqrt(1-t)
    s = shifted_series(20)
    assert s.shift(1) == (Series.constant(2, 21) - Series.binomial(Q(1, 2), 21).scale(2))


def test_two_forms_of_the_root_quotient():
    # ((1+u)^(1/2) - (1-u)^(1/2)) / u with t = u^2, against the shifted form
    n = 20
    m = 2 * n + 1
    plus = Series.binomial(Q(1, 2), m + 1).rescale(-1)
    minus = Series.binomial(Q(1, 2), m + 1)
    q = (plus - minus).shift(-1).truncate(m)
    assert all(q[k] == 0 for k in range(1, m + 1, 2))
    in_t = Series([q[2 * k] for k in range(n + 1)], n)
    assert in_t == pow_rational(shifted_series(n), Q(1, 2))


def test_eval_quarter_branch_member():
    e = parse_expr("3/2*t*(1-t)^(1/16)*((1+(1-t)^(1/2))/2)^(5/4)")
    f = eval_alg_expr(e, 8).to_series(5)
    assert f.coeffs == [0, Q(3, 2), Q(-9, 16), Q(-15, 128), Q(-15, 256), Q(-1215, 32768)]


def test_eval_prefactored_power():
    f = eval_alg_expr(parse_expr("-45/16*t^3*(1-t)^(1/8)"), 6)
    assert f.a == 3
    s = f.to_series(5)
    assert s.coeffs == [0, 0, 0, Q(-45, 16), Q(45, 128), Q(315, 2048)]


def test_eval_constant():
    assert eval_alg_expr(Const(1), 5).to_series(5) == Series.one(5)


def test_exact_cancellation_is_reported():
    with pytest.raises(ExpressionError):
        eval_alg_expr(parse_expr("E*K - K*E"), 6)


def test_eval_elliptic_nodes():
    g = eval_alg_expr(parse_expr("E^2"), 6).to_series(6)
    assert g == elliptic_e(6) * elliptic_e(6)


def test_power_of_vanishing_base_is_rejected():
    with pytest.raises(ExpressionError):
        eval_alg_expr(parse_expr("(E - E)^(1/3)"), 6)
