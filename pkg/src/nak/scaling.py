"""Scaling maps x -> a x^n, x -> b x + c, x -> b^n x and their exponents.

A map f is scaling with exponent lam on a disk when |f(x) - f(y)| = q^lam |x - y|
there.  Coefficients are either field elements or exact rationals; rationals
are embedded at whatever precision the evaluation needs.
"""

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

from .disk import Disk
from .errors import InsufficientPrecision, InvalidInput, OutOfDomain
from .field import INF, LocalFieldElement, from_fraction, vp_int

GUARD = 8


def _coef_valuation(c, spec):
    if isinstance(c, LocalFieldElement):
        if c.is_zero():
            raise InvalidInput("coefficient is zero to precision")
        return c.valuation
    c = Fraction(c)
    if c == 0:
        raise InvalidInput("coefficient must be nonzero")
    if spec.char_p:
        # integers and rationals are constants in F_p((t))
        if c.numerator % spec.p == 0 or c.denominator % spec.p == 0:
            raise InvalidInput("constant coefficient vanishes in characteristic p")
        return 0
    return vp_int(c.numerator, spec.p) - vp_int(c.denominator, spec.p)


def coef_element(c, spec, abs_prec):
    """The coefficient as an element known at least to abs_prec (exact rationals only)."""
    if isinstance(c, LocalFieldElement):
        return c
    c = Fraction(c)
    if spec.char_p:
        num = c.numerator % spec.p
        den = c.denominator % spec.p
        return from_fraction(Fraction(num * pow(den, -1, spec.p) % spec.p), spec, abs_prec)
    return from_fraction(c, spec, abs_prec)


def _coef_json(c):
    if isinstance(c, LocalFieldElement):
        return c.to_json()
    c = Fraction(c)
    return {"rational": f"{c.numerator}/{c.denominator}"}


@dataclass(frozen=True)
class HolderExponent:
    """|f(x) - f(y)| = q^(offset + power * e) where |x - y| = q^e (char p, p | n)."""

    offset: int
    power: int

    def distance(self, e):
        return -INF if e == -INF else self.offset + self.power * e


@dataclass(frozen=True, eq=False)
class ScalingMapSpec:
    kind: str
    coef: object
    n: int = 1
    shift: object = 0
    domain: Disk = None

    def __post_init__(self):
        if self.kind not in ("power", "affine", "geometric"):
            raise InvalidInput(f"unknown map kind {self.kind!r}")
        if self.domain is None:
            raise InvalidInput("a domain disk is required")
        _coef_valuation(self.coef, self.domain.spec)
        if self.kind == "power" and self.n < 1:
            raise InvalidInput("power maps need n >= 1")

    @classmethod
    def power(cls, alpha, n, domain):
        return cls("power", alpha, int(n), 0, domain)

    @classmethod
    def affine(cls, beta, c, domain):
        return cls("affine", beta, 1, c, domain)

    @classmethod
    def geometric(cls, beta, n, domain):
        return cls("geometric", beta, int(n), 0, domain)

    @property
    def spec(self):
        return self.domain.spec

    @property
    def alpha(self):
        return self.coef

    beta = alpha

    def coef_valuation(self):
        return _coef_valuation(self.coef, self.spec)

    def to_json(self):
        out = {"kind": self.kind, "n": self.n, "domain": self.domain.to_json()}
        if self.kind == "power":
            out["alpha"] = _coef_json(self.coef)
        else:
            out["beta"] = _coef_json(self.coef)
        if self.kind == "affine":
            out["c"] = _coef_json(self.shift) if self.shift != 0 else {"rational": "0/1"}
        return out


def scaling_domain(alpha, a):
    """Largest disk around a on which alpha x^n is scaling for every admissible n."""
    if a.is_zero():
        raise InvalidInput("the domain center must be nonzero")
    spec = a.spec
    m = a.valuation + (1 if spec.char_p else spec.e + 1)
    return Disk(a.as_exact(max(m, a.abs_precision)), m)


def _check_power_domain(s):
    d = s.domain
    if s.n == 1:
        return None
    a = d.center
    if a.is_zero():
        raise OutOfDomain("power maps with n > 1 need a domain away from 0")
    need = a.valuation + (1 if s.spec.char_p else s.spec.e + 1)
    if d.radius_exponent < need:
        raise OutOfDomain("domain is larger than the scaling domain of its center")
    return a.valuation


def scaling_exponent(s):
    """lam for a scaling map, or a HolderExponent when char p and p | n."""
    spec = s.spec
    vc = s.coef_valuation()
    if s.kind == "affine":
        return -vc
    if s.kind == "geometric":
        return -s.n * vc
    va = _check_power_domain(s)
    n = s.n
    if n == 1:
        return -vc
    if not spec.char_p:
        return -vc - spec.e * vp_int(n, spec.p) - (n - 1) * va
    k = vp_int(n, spec.p)
    if k == 0:
        return -vc - (n - 1) * va
    ps = spec.p ** k
    return HolderExponent(-vc - (n - ps) * va, ps)


def lam_power(alpha_v, a_v, n, p, char_p=False):
    """Scaling exponent of alpha x^n on the scaling domain of a, from valuations."""
    if char_p:
        return -alpha_v - (n - 1) * a_v
    return -alpha_v - vp_int(n, p) - (n - 1) * a_v


def coef_rel(c, spec, rel):
    """The coefficient with at least `rel` digits of relative precision."""
    if isinstance(c, LocalFieldElement):
        return c
    return coef_element(c, spec, _coef_valuation(c, spec) + rel)


def apply(s, x):
    """f(x) at the precision propagated from x (rational coefficients are exact)."""
    spec = s.spec
    if x.spec != spec:
        raise InvalidInput("field mismatch")
    if x.abs_precision < s.domain.radius_exponent:
        raise InsufficientPrecision("x is not known to the domain's level")
    if not s.domain.contains(x):
        raise OutOfDomain("x lies outside the map's domain")
    rel = max(x.rel_precision, 1) + GUARD
    if s.kind == "power":
        xn = x ** s.n
        return coef_rel(s.coef, spec, xn.rel_precision + GUARD) * xn
    b = coef_rel(s.coef, spec, rel)
    if s.kind == "geometric":
        return (b ** s.n) * x
    bx = b * x
    if s.shift == 0:
        return bx
    c = s.shift if isinstance(s.shift, LocalFieldElement) else coef_element(s.shift, spec, bx.abs_precision)
    return bx + c


def predicted_distance(s, x, y):
    """Norm exponent of f(x) - f(y) predicted by the scaling formula (-inf when x = y)."""
    for z in (x, y):
        if not s.domain.contains(z):
            raise OutOfDomain("point outside the scaling domain")
    e = (x - y).norm_exponent()
    lam = scaling_exponent(s)
    if isinstance(lam, HolderExponent):
        return lam.distance(e)
    return -INF if e == -INF else lam + e


def count_KN(schedule, N):
    """#{(n, m) : 1 <= n, m <= N, lam_n = lam_m}."""
    if N > len(schedule):
        raise InvalidInput("N exceeds the schedule length")
    return sum(c * c for c in Counter(schedule[:N]).values())


@dataclass
class LambdaClass:
    members: list
    bound: float
    holds: bool


def lambda_class(gamma, n, k, N, spec):
    """Members of {m in [k, N+k-1] : m gamma - v(m) = n gamma - v(n)} and the size bound check."""
    if not (k <= n <= N + k - 1):
        raise InvalidInput("need k <= n <= N + k - 1")
    if gamma < 1:
        raise InvalidInput("gamma must be a positive integer")
    p, e = spec.p, spec.e
    target = n * gamma - e * vp_int(n, p)
    # v(m) <= log_p(N + k), so m - n lies in a short window
    top = 0
    while p ** (top + 1) <= N + k - 1:
        top += 1
    lo = max(k, n - (e * vp_int(n, p)) // gamma - 1)
    hi = min(N + k - 1, n + (e * top) // gamma + 1)
    members = [m for m in range(lo, hi + 1) if m * gamma - e * vp_int(m, p) == target]
    # #Lam <= e log_p(N+k)/gamma + 1  <=>  p^(gamma (#Lam - 1)) <= (N+k)^e, exact
    c = len(members)
    holds = p ** (gamma * (c - 1)) <= (N + k) ** e
    return LambdaClass(members, e * math.log(N + k, p) / gamma + 1, holds)


def lambda_class_bruteforce(gamma, n, k, N, spec):
    p, e = spec.p, spec.e
    target = n * gamma - e * vp_int(n, p)
    return [m for m in range(k, N + k) if m * gamma - e * vp_int(m, p) == target]


def expansion_cutoff(schedule, m, start=1):
    """Least n0 with lam_n >= m for every listed n >= n0 (schedule indexed from `start`)."""
    last_bad = start - 1
    for i, lam in enumerate(schedule):
        if lam < m:
            last_bad = start + i
    return last_bad + 1


def expansion_cutoff_power(alpha_v, a_v, p, m, char_p=False):
    """Exact n0 = least n such that q^lam_n * q^-m >= 1 for all n' >= n, for alpha x^n.

    Needs |a| > 1.  Beyond a point M the lower bound lam_n >= -v(alpha) - log_p n
    + (n - 1)|v(a)| is increasing and already >= m, so only n < M are scanned.
    """
    if a_v >= 0:
        raise InvalidInput("the cutoff exists only for |a| > 1")
    s = -a_v

    def lower(n):
        return -alpha_v - (0 if char_p else math.log(n, p)) + (n - 1) * s

    M = 1
    while lower(M) < m + 1:
        M *= 2
    last_bad = 0
    for n in range(1, M + 1):
        if lam_power(alpha_v, a_v, n, p, char_p) < m:
            last_bad = n
    return last_bad + 1


@dataclass
class ClassCountAudit:
    n0: int
    N: int
    KN: int
    holds: bool
    bound: float


def class_count_audit(alpha_v, a_v, p, N, radius_exponent=0):
    """Check #K_N <= N (e log_p(N + n0)/log_q|a| + 1) for lam_n of alpha x^n, n >= n0."""
    n0 = expansion_cutoff_power(alpha_v, a_v, p, radius_exponent)
    lams = [lam_power(alpha_v, a_v, n, p) for n in range(n0, n0 + N)]
    KN = count_KN(lams, N)
    s = -a_v
    # KN <= N (log_p(N+n0)/s + 1)  <=>  p^((KN - N) s) <= (N + n0)^N
    holds = KN <= N or p ** ((KN - N) * s) <= (N + n0) ** N
    return ClassCountAudit(n0, N, KN, holds, N * (math.log(N + n0, p) / s + 1))
