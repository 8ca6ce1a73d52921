"""Independent reference computations used by the tests.

Nothing here imports the package: each oracle recomputes its quantity from
the definitions with plain Python integers and Fractions.
"""

from fractions import Fraction
from itertools import product


def vp(n, p):
    n = abs(n)
    if n == 0:
        return float("inf")
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def long_division_digits(num, den, p, count):
    """(v, first `count` digits) of num/den in Q_p by schoolbook base-p division."""
    v = vp(num, p) - vp(den, p)
    a = num // p ** vp(num, p)
    b = den // p ** vp(den, p)
    digits = []
    # a/b = d0 + p * rest, with d0 = a * b^-1 mod p found by trial
    for _ in range(count):
        d = next(d for d in range(p) if (a - d * b) % p == 0)
        digits.append(d)
        a = (a - d * b) // p
    return v, digits


def series_division_fp(num, den, p, count):
    """First `count` coefficients of num/den in F_p[[t]] (den[0] != 0), schoolbook."""
    num = list(num) + [0] * count
    inv0 = next(c for c in range(1, p) if c * den[0] % p == 1)
    out = []
    rem = [c % p for c in num]
    for i in range(count):
        c = rem[i] * inv0 % p
        out.append(c)
        for j, d in enumerate(den):
            if i + j < len(rem):
                rem[i + j] = (rem[i + j] - c * d) % p
    return out


def digits_value(v, digits, p):
    return sum(Fraction(d) * Fraction(p) ** (v + i) for i, d in enumerate(digits))


def mu_k_bruteforce(prefix, k, p):
    """mu_k(D cap S_k) by enumerating every truncation of S_k mod t^m."""
    m = len(prefix)
    free = [i for i in range(m) if i % p ** k == 0]
    hits = 0
    for vals in product(range(p), repeat=len(free)):
        word = [0] * m
        for i, c in zip(free, vals):
            word[i] = c
        hits += word == list(prefix)
    return Fraction(hits, p ** len(free))


def mu_star_partial(prefix, p, K):
    """(1 - 1/p)(mu(D) + sum_{k=1}^K p^-k mu_k(D)) and a bound on the omitted tail."""
    m = len(prefix)
    s = Fraction(1, p ** m)
    for k in range(1, K + 1):
        s += Fraction(1, p ** k) * mu_k_bruteforce(prefix, k, p)
    tail = (1 - Fraction(1, p)) * Fraction(1, p ** K) / (p - 1)
    return (1 - Fraction(1, p)) * s, tail


def int_part_cell(value, p, level):
    """Level cell of [value] for a nonzero rational: digits 0..level-1 of its expansion."""
    value = Fraction(value)
    v = vp(value.numerator, p) - vp(value.denominator, p)
    count = max(level - v, 0)
    _, ds = long_division_digits(value.numerator, value.denominator, p, count)
    return sum(d * p ** (v + i) for i, d in enumerate(ds) if 0 <= v + i < level)
