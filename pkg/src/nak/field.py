"""Truncated pi-adic arithmetic in Q_p and F_p((t)).

An element is a valuation v, a unit part and an absolute precision N: the
value is known modulo pi^N.  In characteristic 0 the unit part is an integer
u with p not dividing u (digits come from its base-p expansion); in
characteristic p it is a coefficient array over F_p whose first entry is
nonzero.  Zero to precision N has valuation INF and no digits.
"""

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np
from sympy.ntheory import sqrt_mod

from . import _digits
from .errors import (DivisionByZero, InsufficientPrecision, InvalidInput,
                     NoSquareRoot)

INF = math.inf


def _is_prime(p):
    return isinstance(p, (int, np.integer)) and p >= 2 and bool(gmpy2.is_prime(int(p)))


def vp_int(n, p):
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        return INF
    return int(gmpy2.remove(gmpy2.mpz(n), p)[1])


@dataclass(frozen=True)
class FieldSpec:
    """Q_p (characteristic 0) or F_p((t)) (characteristic p)."""

    characteristic: int
    p: int
    q: int = None
    e: int = 1

    def __post_init__(self):
        if not _is_prime(self.p):
            raise InvalidInput(f"p must be a prime, got {self.p!r}")
        if self.q is None:
            object.__setattr__(self, "q", self.p)
        if self.characteristic not in (0, self.p):
            raise InvalidInput("characteristic must be 0 or p")
        if self.q != self.p:
            raise InvalidInput("only residue fields with q = p are supported")
        if self.e != 1:
            raise InvalidInput("only unramified fields (e = 1) are supported")

    @classmethod
    def qp(cls, p):
        return cls(0, p)

    @classmethod
    def fpt(cls, p):
        return cls(p, p)

    @property
    def char_p(self):
        return self.characteristic != 0

    @property
    def prime_element(self):
        return "t" if self.char_p else str(self.p)

    @property
    def tag(self):
        return "Fpt" if self.char_p else "Qp"

    def __str__(self):
        return f"F_{self.p}((t))" if self.char_p else f"Q_{self.p}"

    # small constructors
    def zero(self, prec):
        return LocalFieldElement._zero(self, prec)

    def one(self, prec):
        return from_int(1, self, prec)

    def pi(self, prec):
        return LocalFieldElement.from_digits(self, 1, [1], prec)


class LocalFieldElement:
    """An element of Q_p or F_p((t)) known modulo pi^abs_precision."""

    __slots__ = ("spec", "_v", "_unit", "_prec", "_dcache")

    def __init__(self, spec, v, unit, prec):
        # trusted constructor: callers pass normalized data
        self.spec = spec
        self._v = v
        self._unit = unit
        self._prec = prec
        self._dcache = None

    # ----- construction -------------------------------------------------
    @classmethod
    def _zero(cls, spec, prec):
        return cls(spec, INF, None, int(prec))

    @classmethod
    def _from_int_unit(cls, spec, v, u, prec):
        """Normalize integer data (char 0): value u * p^v mod p^prec."""
        p = spec.p
        rel = prec - v
        if rel <= 0:
            return cls._zero(spec, prec)
        u = gmpy2.mpz(u) % (gmpy2.mpz(p) ** rel)
        if u == 0:
            return cls._zero(spec, prec)
        u, k = gmpy2.remove(u, p)
        return cls(spec, v + int(k), int(u), prec)

    @classmethod
    def _from_array(cls, spec, v, arr, prec):
        """Normalize coefficient data (char p): value sum arr[i] t^(v+i) mod t^prec."""
        rel = prec - v
        if rel <= 0:
            return cls._zero(spec, prec)
        arr = np.asarray(arr, dtype=np.int64)[:rel] % spec.p
        nz = np.flatnonzero(arr)
        if nz.size == 0:
            return cls._zero(spec, prec)
        k = int(nz[0])
        unit = np.zeros(rel - k, dtype=np.int64)
        tail = arr[k:]
        unit[: tail.size] = tail
        unit.setflags(write=False)
        return cls(spec, v + k, unit, prec)

    @classmethod
    def from_digits(cls, spec, v, digits, abs_prec=None):
        """Build from little-endian digits starting at pi^v.

        Leading zeros are allowed here and absorbed into the valuation.
        abs_prec defaults to v + len(digits).
        """
        ds = np.asarray(list(digits), dtype=np.int64)
        if ds.size and (ds.min() < 0 or ds.max() >= spec.p):
            raise InvalidInput("digit out of range")
        if abs_prec is None:
            abs_prec = v + ds.size
        if spec.char_p:
            return cls._from_array(spec, v, ds, abs_prec)
        return cls._from_int_unit(spec, v, _digits.digits_to_int(ds, spec.p), abs_prec)

    # ----- basic accessors ----------------------------------------------
    @property
    def valuation(self):
        return self._v

    @property
    def abs_precision(self):
        return self._prec

    @property
    def rel_precision(self):
        return 0 if self.is_zero() else self._prec - self._v

    def is_zero(self):
        return self._v == INF

    def norm_exponent(self):
        return -INF if self.is_zero() else -self._v

    @property
    def digits(self):
        if self._dcache is None:
            if self.is_zero():
                d = ()
            elif self.spec.char_p:
                d = tuple(self._unit.tolist())
            else:
                d = tuple(_digits.int_to_digits(self._unit, self.spec.p, self.rel_precision).tolist())
            self._dcache = d
        return self._dcache

    def digit_array(self, lo, hi):
        """Digits at indices lo..hi-1 as an int64 array (zeros below v)."""
        if hi > self._prec:
            raise InsufficientPrecision(f"digit {hi - 1} requested, precision {self._prec}")
        out = np.zeros(max(hi - lo, 0), dtype=np.int64)
        if self.is_zero() or hi <= self._v:
            return out
        a = max(lo, self._v)
        if self.spec.char_p:
            src = self._unit[a - self._v: hi - self._v]
        else:
            p = self.spec.p
            chunk = (self._unit // p ** (a - self._v)) % p ** (hi - a)
            src = _digits.int_to_digits(chunk, p, hi - a)
        out[a - lo: a - lo + len(src)] = src
        return out

    def digit_at(self, i):
        if i >= self._prec:
            raise InsufficientPrecision(f"digit {i} requested, precision {self._prec}")
        if self.is_zero() or i < self._v:
            return 0
        if self.spec.char_p:
            return int(self._unit[i - self._v])
        p = self.spec.p
        return int((self._unit // p ** (i - self._v)) % p)

    def unit_int(self):
        """The integer unit part (char 0 only)."""
        if self.spec.char_p:
            raise InvalidInput("unit_int is defined for characteristic 0 only")
        return 0 if self.is_zero() else self._unit

    def unit_array(self):
        """Coefficient array of the unit part (char p only)."""
        if not self.spec.char_p:
            raise InvalidInput("unit_array is defined for characteristic p only")
        return np.zeros(0, dtype=np.int64) if self.is_zero() else self._unit

    # ----- precision handling -------------------------------------------
    def truncate(self, n):
        """The same element known only modulo pi^min(n, N)."""
        n = min(n, self._prec)
        if self.is_zero():
            return self._zero(self.spec, n)
        if self.spec.char_p:
            return self._from_array(self.spec, self._v, self._unit, n)
        return self._from_int_unit(self.spec, self._v, self._unit, n)

    def as_exact(self, n):
        """Treat the known digits as an exact finite expansion, padded to pi^n."""
        if n <= self._prec:
            return self.truncate(n)
        if self.is_zero():
            return self._zero(self.spec, n)
        if self.spec.char_p:
            return self._from_array(self.spec, self._v, self._unit, n)
        return LocalFieldElement(self.spec, self._v, self._unit, n)

    def key(self, n):
        """Canonical hashable form of x mod pi^n (needs n <= abs_precision)."""
        if n > self._prec:
            raise InsufficientPrecision(f"key at level {n} needs precision {n}")
        t = self.truncate(n)
        if t.is_zero():
            return (n, None)
        return (n, t._v, t.digits)

    # ----- arithmetic ---------------------------------------------------
    def _check(self, other):
        if not isinstance(other, LocalFieldElement):
            other = self._coerce(other)
        if other.spec != self.spec:
            raise InvalidInput(f"field mismatch: {self.spec} vs {other.spec}")
        return other

    def _coerce(self, value):
        if isinstance(value, (int, np.integer, Fraction)):
            value = Fraction(value)
            return from_rational(value.numerator, value.denominator, self.spec,
                                 self._prec, absolute=True)
        raise InvalidInput(f"cannot combine element with {type(value).__name__}")

    def __add__(self, other):
        other = self._check(other)
        n = min(self._prec, other._prec)
        if self.is_zero():
            return other.truncate(n)
        if other.is_zero():
            return self.truncate(n)
        v = min(self._v, other._v)
        if self.spec.char_p:
            rel = n - v
            if rel <= 0:
                return self._zero(self.spec, n)
            acc = np.zeros(rel, dtype=np.int64)
            for x in (self, other):
                s = x._v - v
                if s < rel:
                    m = min(x._unit.size, rel - s)
                    acc[s: s + m] += x._unit[:m]
            return self._from_array(self.spec, v, acc, n)
        p = self.spec.p
        u = self._unit * p ** (self._v - v) + other._unit * p ** (other._v - v)
        return self._from_int_unit(self.spec, v, u, n)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        if self.spec.char_p:
            return self._from_array(self.spec, self._v, -self._unit, self._prec)
        return self._from_int_unit(self.spec, self._v, -self._unit, self._prec)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) + (-self)

    def __mul__(self, other):
        other = self._check(other)
        if self.is_zero() or other.is_zero():
            # zero to precision a times y is known modulo pi^(a + v(y))
            if self.is_zero() and other.is_zero():
                return self._zero(self.spec, self._prec + other._prec)
            z, y = (self, other) if self.is_zero() else (other, self)
            return self._zero(self.spec, z._prec + y._v)
        v = self._v + other._v
        rel = min(self.rel_precision, other.rel_precision)
        if self.spec.char_p:
            prod = _digits.poly_mul(self._unit, other._unit, self.spec.p, rel)
            return self._from_array(self.spec, v, prod, v + rel)
        return self._from_int_unit(self.spec, v, self._unit * other._unit, v + rel)

    __rmul__ = __mul__

    def invert(self):
        if self.is_zero():
            raise DivisionByZero("inverse of an element that is zero to precision")
        rel = self.rel_precision
        if self.spec.char_p:
            inv = _digits.poly_inv(self._unit, self.spec.p, rel)
            return self._from_array(self.spec, -self._v, inv, -self._v + rel)
        inv = gmpy2.invert(gmpy2.mpz(self._unit), gmpy2.mpz(self.spec.p) ** rel)
        return LocalFieldElement(self.spec, -self._v, int(inv), -self._v + rel)

    def __truediv__(self, other):
        return self * self._check(other).invert()

    def __rtruediv__(self, other):
        return self._check(other) * self.invert()

    def __pow__(self, n):
        n = int(n)
        if n < 0:
            return self.invert() ** (-n)
        if self.is_zero():
            if n == 0:
                raise InvalidInput("0**0 is not defined for a zero-to-precision element")
            return self._zero(self.spec, self._prec * n if self._prec >= 0 else self._prec)
        rel = self.rel_precision
        v = self._v * n
        if self.spec.char_p:
            # Frobenius is exact: (u + O(t^r))^(p^s) = u^(p^s) + O(t^(r p^s))
            if n:
                rel *= self.spec.p ** vp_int(n, self.spec.p)
            u = _digits.poly_pow(self._unit, n, self.spec.p, rel)
            return self._from_array(self.spec, v, u, v + rel)
        u = gmpy2.powmod(gmpy2.mpz(self._unit), n, gmpy2.mpz(self.spec.p) ** rel)
        return LocalFieldElement(self.spec, v, int(u), v + rel)

    # ----- integral / fractional parts ----------------------------------
    def integral_part(self):
        if self._prec < 0:
            raise InsufficientPrecision("[x] needs absolute precision >= 0")
        if self.is_zero() or self._v >= 0:
            return self
        if self.spec.char_p:
            return self._from_array(self.spec, 0, self._unit[-self._v:], self._prec)
        return self._from_int_unit(self.spec, 0, self._unit // self.spec.p ** (-self._v), self._prec)

    def fractional_part(self):
        if self._prec < 0:
            raise InsufficientPrecision("{x} needs absolute precision >= 0")
        if self.is_zero() or self._v >= 0:
            return self._zero(self.spec, self._prec)
        k = -self._v
        if self.spec.char_p:
            arr = np.zeros(self._prec - self._v, dtype=np.int64)
            arr[:k] = self._unit[:k]
            return self._from_array(self.spec, self._v, arr, self._prec)
        return self._from_int_unit(self.spec, self._v, self._unit % self.spec.p ** k, self._prec)

    # ----- comparison ---------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, LocalFieldElement):
            try:
                other = self._coerce(other)
            except InvalidInput:
                return NotImplemented
        if other.spec != self.spec:
            return False
        n = min(self._prec, other._prec)
        return (self - other).truncate(n).is_zero()

    __hash__ = None

    # ----- conversions ---------------------------------------------------
    def to_fraction(self):
        """Exact rational value of the known digits (char 0)."""
        if self.spec.char_p:
            raise InvalidInput("to_fraction is defined for characteristic 0 only")
        if self.is_zero():
            return Fraction(0)
        return Fraction(self._unit) * Fraction(self.spec.p) ** self._v

    def to_laurent(self):
        """(v, digits) describing the Laurent polynomial sum c_i pi^i of the known digits."""
        return (self._v, self.digits)

    def to_text(self):
        tag = self.spec.tag
        if self.is_zero():
            return f"{tag}{{p={self.spec.p}; v=inf; digits=; prec={self._prec}}}"
        ds = ",".join(str(d) for d in self.digits)
        return f"{tag}{{p={self.spec.p}; v={self._v}; digits={ds}; prec={len(self.digits)}}}"

    def to_json(self):
        return {
            "char": self.spec.characteristic,
            "p": self.spec.p,
            "v": "inf" if self.is_zero() else self._v,
            "digits": list(self.digits),
            "abs_prec": self._prec,
        }

    def __repr__(self):
        return self.to_text()

    __str__ = __repr__


# ----- module level operations (spec names) -----------------------------

def _poly_coeffs(obj, p):
    if isinstance(obj, (int, np.integer)):
        return np.array([int(obj) % p], dtype=np.int64)
    return np.asarray([int(c) % p for c in obj], dtype=np.int64)


def from_rational(num, den, spec, prec, absolute=False):
    """num/den as an element.

    prec counts digits from the valuation (relative precision) unless
    absolute=True, in which case it is the absolute precision.  In
    characteristic p, num and den are coefficient sequences of polynomials
    in t (little-endian) or integers read as constants.
    """
    if spec.char_p:
        a = _poly_coeffs(num, spec.p)
        b = _poly_coeffs(den, spec.p)
        bnz = np.flatnonzero(b)
        if bnz.size == 0:
            raise InvalidInput("zero denominator")
        anz = np.flatnonzero(a)
        if anz.size == 0:
            return LocalFieldElement._zero(spec, prec)
        va, vb = int(anz[0]), int(bnz[0])
        v = va - vb
        rel = prec - v if absolute else prec
        if rel <= 0:
            return LocalFieldElement._zero(spec, v + rel if not absolute else prec)
        ua = np.zeros(rel, dtype=np.int64)
        t = a[va: va + rel]
        ua[: t.size] = t
        inv = _digits.poly_inv(b[vb:], spec.p, rel)
        return LocalFieldElement._from_array(spec, v, _digits.poly_mul(ua, inv, spec.p, rel), v + rel)
    num, den = int(num), int(den)
    if den == 0:
        raise InvalidInput("zero denominator")
    if num == 0:
        return LocalFieldElement._zero(spec, prec)
    p = spec.p
    a, va = gmpy2.remove(gmpy2.mpz(num), p)
    b, vb = gmpy2.remove(gmpy2.mpz(den), p)
    v = int(va) - int(vb)
    rel = prec - v if absolute else prec
    if rel <= 0:
        return LocalFieldElement._zero(spec, prec if absolute else v + rel)
    mod = gmpy2.mpz(p) ** rel
    u = (a * gmpy2.invert(b, mod)) % mod
    return LocalFieldElement(spec, v, int(u), v + rel)


def from_int(n, spec, abs_prec):
    return from_rational(n, 1, spec, abs_prec, absolute=True)


def from_fraction(value, spec, abs_prec):
    value = Fraction(value)
    return from_rational(value.numerator, value.denominator, spec, abs_prec, absolute=True)


def add(x, y):
    return x + y


def sub(x, y):
    return x - y


def neg(x):
    return -x


def mul(x, y):
    return x * y


def invert(x):
    return x.invert()


def div(x, y):
    return x / y


def integral_part(x):
    return x.integral_part()


def fractional_part(x):
    return x.fractional_part()


def digit_at(x, i):
    return x.digit_at(i)


def valuation(x):
    return x.valuation


def norm_exponent(x):
    return x.norm_exponent()


def hensel_sqrt(x, branch_hint=None):
    """Square root in Q_p by Hensel lifting.

    For odd p the root is fixed by its leading digit (branch_hint, or the
    smaller of the two candidates).  For p = 2 the leading digit is always 1,
    so the hint selects the root's residue mod 4 (1 or 3) instead; the root
    of a unit known mod 2^r is only determined mod 2^(r-1).
    """
    spec = x.spec
    if spec.char_p:
        raise InvalidInput("hensel_sqrt is implemented for characteristic 0")
    if x.is_zero():
        # y^2 = O(pi^N) forces v(y) >= N/2
        return LocalFieldElement._zero(spec, -(-x.abs_precision // 2))
    if x.valuation % 2:
        raise NoSquareRoot("odd valuation")
    p = spec.p
    u = gmpy2.mpz(x.unit_int())
    rel = x.rel_precision
    h = x.valuation // 2
    if p == 2:
        if rel < 3:
            raise InsufficientPrecision("need 3 digits of the unit to decide squareness in Q_2")
        if u % 8 != 1:
            raise NoSquareRoot("unit is not 1 mod 8")
        y = gmpy2.mpz(1)
        for i in range(3, rel):
            # y^2 = u mod 2^i; fix the next bit
            if (y * y - u) % (gmpy2.mpz(1) << (i + 1)):
                y += gmpy2.mpz(1) << (i - 1)
        out_rel = rel - 1
        y %= gmpy2.mpz(1) << out_rel
        want = 1 if branch_hint is None else int(branch_hint)
        if want not in (1, 3):
            raise InvalidInput("for p = 2 the branch hint is the root mod 4: 1 or 3")
        if out_rel >= 2 and y % 4 != want:
            y = (-y) % (gmpy2.mpz(1) << out_rel)
        return LocalFieldElement(spec, h, int(y), h + out_rel)
    a0 = int(u % p)
    roots = sorted(sqrt_mod(a0, p, all_roots=True) or [])
    if not roots:
        raise NoSquareRoot(f"{a0} is not a square mod {p}")
    if branch_hint is None:
        r = roots[0]
    else:
        r = int(branch_hint) % p
        if r not in roots:
            raise NoSquareRoot(f"branch {branch_hint} does not square to {a0} mod {p}")
    y = gmpy2.mpz(r)
    k = 1
    while k < rel:
        k = min(2 * k, rel)
        mod = gmpy2.mpz(p) ** k
        y = (y - (y * y - u) * gmpy2.invert(2 * y, mod)) % mod
    return LocalFieldElement(spec, h, int(y), h + rel)


def random_element(disk, rng, precision):
    """Haar-random point of the disk, known to absolute precision `precision`."""
    rng = np.random.default_rng(rng)
    spec = disk.spec
    m = disk.radius_exponent
    if precision < m:
        raise InvalidInput("precision must be at least the disk radius exponent")
    c = disk.center
    lo = m if c.is_zero() else min(c.valuation, m)
    prefix = c.digit_array(lo, m) if m > lo else np.zeros(0, dtype=np.int64)
    tail = rng.integers(0, spec.p, size=precision - m, dtype=np.int64)
    return LocalFieldElement.from_digits(spec, lo, np.concatenate([prefix, tail]), precision)


def random_on_sphere(spec, r, rng, precision):
    """Haar-random x with |x| = q^r exactly: leading digit nonzero-uniform."""
    rng = np.random.default_rng(rng)
    if precision <= -r:
        raise InvalidInput("precision must exceed -r")
    lead = rng.integers(1, spec.p, size=1, dtype=np.int64)
    tail = rng.integers(0, spec.p, size=precision + r - 1, dtype=np.int64)
    return LocalFieldElement.from_digits(spec, -r, np.concatenate([lead, tail]), precision)


# ----- text and JSON formats -------------------------------------------

_TEXT_RE = re.compile(
    r"^\s*(Qp|Fpt)\{\s*p\s*=\s*(\d+)\s*;\s*v\s*=\s*(-?\d+|inf)\s*;\s*digits\s*=\s*([\d,\s]*);\s*prec\s*=\s*(-?\d+)\s*\}\s*$")


def parse_element(text):
    m = _TEXT_RE.match(text)
    if not m:
        raise InvalidInput(f"cannot parse element: {text!r}")
    tag, p, v, ds, prec = m.groups()
    p = int(p)
    spec = FieldSpec.qp(p) if tag == "Qp" else FieldSpec.fpt(p)
    digits = [int(d) for d in ds.replace(" ", "").split(",") if d != ""]
    prec = int(prec)
    if v == "inf":
        if digits:
            raise InvalidInput("zero element carries no digits")
        return spec.zero(prec)
    return _checked(spec, int(v), digits, int(v) + prec, len_must=prec)


def _checked(spec, v, digits, abs_prec, len_must=None):
    if any(d < 0 or d >= spec.p for d in digits):
        raise InvalidInput("digit out of range")
    if len_must is not None and len(digits) != len_must:
        raise InvalidInput("prec must equal the number of digits")
    if digits and digits[0] == 0 and any(digits):
        raise InvalidInput("leading zero digit")
    if not any(digits):
        return spec.zero(abs_prec)
    return LocalFieldElement.from_digits(spec, v, digits, abs_prec)


def element_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    p = int(obj["p"])
    ch = int(obj["char"])
    spec = FieldSpec(ch, p)
    digits = [int(d) for d in obj.get("digits", [])]
    n = int(obj["abs_prec"])
    if obj["v"] == "inf":
        if any(digits):
            raise InvalidInput("zero element carries no nonzero digits")
        return spec.zero(n)
    v = int(obj["v"])
    if v + len(digits) != n:
        raise InvalidInput("v + len(digits) must equal abs_prec")
    return _checked(spec, v, digits, n)
