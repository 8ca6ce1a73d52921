"""Quadratic Pisot-Chabauty numbers xi = (-1 - sqrt(1 - 4 p^(k+l)))/(2 p^k) in Q_p.

xi is a root of p^k X^2 + X + p^l.  Its conjugate xi2 has |xi2|_p = p^-l and
Archimedean size p^((l-k)/2), so xi^n = T_n - xi2^n with the trace T_n in
Z[1/p].  For large n, [xi^n] therefore sits within p^-(ln) of [T_n], which is
0 or -1.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2

from .errors import InsufficientPrecision, InvalidInput
from .field import FieldSpec, LocalFieldElement, from_fraction, from_int, hensel_sqrt, vp_int
from .measures import HAAR, report_from_cells

GUARD = 8


@dataclass(frozen=True)
class PisotChabautySpec:
    p: int
    k: int
    l: int

    def __post_init__(self):
        if not gmpy2.is_prime(self.p):
            raise InvalidInput(f"p = {self.p} is not prime")
        if not (self.k > self.l >= 1):
            raise InvalidInput("need k > l >= 1")

    @property
    def field(self):
        return FieldSpec.qp(self.p)

    def n0(self):
        """First n with 2 p^((l-k)n/2) < 1, i.e. 4 < p^((k-l)n); |T_n| < 1 from there on."""
        n = 1
        while 4 >= self.p ** ((self.k - self.l) * n):
            n += 1
        return n

    def precision_for(self, n_max):
        return (self.k + self.l) * n_max + GUARD

    def to_json(self):
        return {"p": self.p, "k": self.k, "l": self.l}


def pisot_value(spec, prec):
    """xi to relative precision prec, branch checked by |xi|_p = p^k."""
    F = spec.field
    p, k, l = spec.p, spec.k, spec.l
    disc = from_int(1 - 4 * p ** (k + l), F, prec + 2)
    # the root s = 1 mod p (mod 4 when p = 2) makes -1 - s a unit times 2
    s = hensel_sqrt(disc, 1)
    num = -1 - s
    xi = num / from_fraction(Fraction(2 * p ** k), F, prec + 4)
    if xi.valuation != -k:
        raise AssertionError("wrong square-root branch")
    return xi


def minimal_poly_residual(spec, xi):
    """p^k xi^2 + xi + p^l, which should be zero to precision."""
    F = spec.field
    return from_int(spec.p ** spec.k, F, xi.abs_precision + 2 * spec.k) * xi * xi + xi + spec.p ** spec.l


def conjugate_mod(spec, M):
    """xi2 mod p^M as an integer: the small root, by the contraction eta = -p^l - p^k eta^2."""
    p, k, l = spec.p, spec.k, spec.l
    mod = gmpy2.mpz(p) ** M
    eta = gmpy2.mpz(0)
    for _ in range(M // min(k, l) + 2):
        eta = (-(p ** l) - p ** k * eta * eta) % mod
    return eta


@dataclass
class TraceSequence:
    spec: PisotChabautySpec
    values: list

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)


def trace_sequence(spec, n_max):
    if n_max < 2:
        raise InvalidInput("n_max must be at least 2")
    p, k, l = spec.p, spec.k, spec.l
    a = Fraction(-1, p ** k)
    b = Fraction(p ** l, p ** k)
    T = [Fraction(2), a]
    for _ in range(n_max - 1):
        T.append(a * T[-1] - b * T[-2])
    for t in T:
        d = t.denominator
        if d != p ** vp_int(d, p):
            raise AssertionError("trace denominator is not a power of p")
    return TraceSequence(spec, T)


def archimedean_bound_holds(spec, T):
    """|T_n| <= 2 p^((l-k)n/2) for every n, compared exactly via squares."""
    p, k, l = spec.p, spec.k, spec.l
    for n, t in enumerate(T.values):
        # t^2 p^((k-l)n) <= 4
        if t * t * Fraction(p) ** ((k - l) * n) > 4:
            return False
    return True


@dataclass
class LimitRow:
    n: int
    int_part_exponent: object
    int_part_plus_one_exponent: object
    diff_exponent: object
    trace_int_part: object
    in_zero_minus_one: object

    def to_json(self):
        def f(e):
            return "-inf" if e == -math.inf else e
        return {"n": self.n, "int_part_norm_exponent": f(self.int_part_exponent),
                "int_part_plus_one_norm_exponent": f(self.int_part_plus_one_exponent),
                "xi_n_minus_T_n_norm_exponent": f(self.diff_exponent),
                "trace_int_part": self.trace_int_part, "in_zero_minus_one": self.in_zero_minus_one}


def _norm_exp(x):
    return -math.inf if x.is_zero() else x.norm_exponent()


def limit_point_table(spec, n_max, prec=None):
    """Rows (n, |[xi^n]|, |[xi^n] + 1|, |xi^n - T_n|, [T_n] in {0, -1}) as norm exponents."""
    need = spec.precision_for(n_max)
    if prec is None:
        prec = need
    if prec < need:
        raise InsufficientPrecision(f"need precision {need} for n <= {n_max}")
    F = spec.field
    xi = pisot_value(spec, prec)
    T = trace_sequence(spec, max(n_max, 2))
    n0 = spec.n0()
    rows = []
    y = xi
    for n in range(1, n_max + 1):
        if n > 1:
            y = y * xi
        ip = y.integral_part()
        Tn = from_fraction(T[n], F, y.abs_precision)
        diff = y - Tn
        if n >= n0:
            # [T_n] from the exact rational, then tested against 0 and -1 to precision
            t_ip = from_fraction(T[n], F, y.abs_precision).integral_part()
            t_int = 0 if t_ip.is_zero() else (-1 if (t_ip + 1).is_zero() else "other")
            member = t_int != "other"
        else:
            t_int, member = None, None
        rows.append(LimitRow(n, _norm_exp(ip), _norm_exp(ip + 1), _norm_exp(diff),
                             t_int, member))
    return rows


def diff_exponents_two_paths(spec, n_lo, n_hi):
    """(p-adic power path, integer recurrence path) exponents of |xi^n - T_n|_p."""
    F = spec.field
    p, l = spec.p, spec.l
    prec = spec.precision_for(n_hi)
    xi = pisot_value(spec, prec)
    T = trace_sequence(spec, n_hi)
    M = l * n_hi + GUARD
    eta = conjugate_mod(spec, M)
    mod = gmpy2.mpz(p) ** M
    a, b = [], []
    for n in range(n_lo, n_hi + 1):
        y = xi ** n
        a.append(_norm_exp(y - from_fraction(T[n], F, y.abs_precision)))
        # xi^n - T_n = -xi2^n, computed in Z/p^M
        e = gmpy2.powmod(eta, n, mod)
        b.append(-vp_int(int(e), p) if e else -math.inf)
    return a, b


def level_discrepancy(spec, n_max, level=1):
    """FrequencyReport of the level-`level` cells of ([xi^n])_{1 <= n <= n_max} against Haar."""
    F = spec.field
    xi = pisot_value(spec, spec.precision_for(n_max))
    cells = []
    y = xi
    for n in range(1, n_max + 1):
        if n > 1:
            y = y * xi
        ds = y.digit_array(0, level)
        cells.append(int(sum(int(d) * spec.p ** i for i, d in enumerate(ds.tolist()))))
    return report_from_cells(F, level, cells, HAAR)
