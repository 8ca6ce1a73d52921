from fractions import Fraction

import pytest

from nak.errors import InsufficientPrecision, InvalidInput
from nak.pisot import (PisotChabautySpec, archimedean_bound_holds, diff_exponents_two_paths,
                       level_discrepancy, limit_point_table, minimal_poly_residual, pisot_value,
                       trace_sequence)

from oracles import digits_value, vp


def _vq(x, p):
    return vp(x.numerator, p) - vp(x.denominator, p)


def _trace_int_part(t, p):
    """Integral part of t in Z[1/p]: t minus its p-adic fractional part."""
    e = vp(t.denominator, p)
    frac = Fraction(t.numerator % p ** e, p ** e) if e else Fraction(0)
    return t - frac


@pytest.mark.parametrize("p", [3, 5, 7])
@pytest.mark.parametrize("k,l", [(2, 1), (3, 1), (3, 2), (4, 1), (4, 3)])
def test_minimal_polynomial(p, k, l):
    s = PisotChabautySpec(p, k, l)
    xi = pisot_value(s, 40)
    assert xi.valuation == -k
    res = minimal_poly_residual(s, xi)
    assert res.is_zero()
    # the same check with an exact rational truncation of xi
    v = digits_value(xi.valuation, list(xi.digits), p)
    r = p ** k * v * v + v + p ** l
    assert _vq(r, p) >= xi.abs_precision - k


def test_norms():
    assert pisot_value(PisotChabautySpec(3, 2, 1), 20).norm_exponent() == 2      # |xi| = 9
    assert pisot_value(PisotChabautySpec(5, 3, 1), 20).norm_exponent() == 3      # |xi| = 125


def test_spec_validation():
    with pytest.raises(InvalidInput):
        PisotChabautySpec(4, 2, 1)
    with pytest.raises(InvalidInput):
        PisotChabautySpec(3, 1, 1)


def test_trace_values():
    s = PisotChabautySpec(3, 2, 1)
    T = trace_sequence(s, 30)
    assert T[0] == 2 and T[1] == Fraction(-1, 9) and T[2] == Fraction(-53, 81)
    assert archimedean_bound_holds(s, T)
    with pytest.raises(InvalidInput):
        trace_sequence(s, 1)


def test_trace_int_part_in_zero_minus_one():
    for s in (PisotChabautySpec(3, 2, 1), PisotChabautySpec(5, 3, 1), PisotChabautySpec(2, 3, 1)):
        T = trace_sequence(s, 200)
        for n in range(s.n0(), 201):
            assert _trace_int_part(T[n], s.p) in (0, -1)


def test_table_rows():
    s = PisotChabautySpec(3, 2, 1)
    rows = limit_point_table(s, 40)
    T = trace_sequence(s, 40)
    for r in rows[s.n0() - 1:]:
        assert r.in_zero_minus_one
        assert r.trace_int_part == _trace_int_part(T[r.n], 3)
        assert r.diff_exponent == -r.n            # |xi^n - T_n| = 3^-(l n)
        # [xi^n] is within 3^-n of 0 or -1
        assert min(r.int_part_exponent, r.int_part_plus_one_exponent) <= -r.n
    r10 = rows[9].to_json()
    assert r10 == {"n": 10, "int_part_norm_exponent": 0, "int_part_plus_one_norm_exponent": -10,
                   "xi_n_minus_T_n_norm_exponent": -10, "trace_int_part": -1, "in_zero_minus_one": True}
    with pytest.raises(InsufficientPrecision):
        limit_point_table(s, 40, prec=20)


def test_two_paths_agree():
    s = PisotChabautySpec(3, 2, 1)
    a, b = diff_exponents_two_paths(s, 10, 60)
    assert a == b == [-n for n in range(10, 61)]
    # exact oracle: xi^n - T_n = -xi2^n with xi2 = p^(l-k) / xi
    xi = pisot_value(s, 200)
    v = digits_value(xi.valuation, list(xi.digits), 3)
    T = trace_sequence(s, 20)
    for n in range(10, 21):
        assert _vq(v ** n - T[n], 3) == n


def test_level_one_discrepancy():
    rep = level_discrepancy(PisotChabautySpec(3, 2, 1), 200)
    # [xi^n] clusters near 0 and -1 = ...222, so only digits 0 and 2 occur
    assert rep.counts == [101, 0, 99]
    assert rep.discrepancy == Fraction(1, 3)
