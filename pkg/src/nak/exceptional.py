"""q-homogeneous (Moran) sets Gamma_{b,H}: schedules, construction, dimensions.

A schedule lists, for n = first, first+1, ..., a scaling exponent lam_n and a
depth H_n, plus a start disk of radius q^-H0.  Gamma_{b,H} is the set of x in
the start disk with |[f_n(x)] - b_n| <= q^-H_n for all n.  The constructor
walks down the ball tree one digit at a time: levels inside a constraint
window [lam_n, lam_n + H_n) admit exactly one digit, every other level is a
branch level and gets digit 0.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np
import sympy

from .disk import Disk
from .errors import (AmbiguityFailure, ConstructionFailure, InsufficientPrecision,
                     InvalidFamily, InvalidInput, InvalidSchedule)
from .field import FieldSpec, LocalFieldElement, from_fraction, from_int, vp_int
from .scaling import (HolderExponent, ScalingMapSpec, apply, coef_element,
                      lam_power, scaling_exponent)

GUARD = 8


# ----- schedules ----------------------------------------------------------

def _as_callable(obj, name):
    if callable(obj):
        return obj, None
    if isinstance(obj, (int, np.integer)):
        c = int(obj)
        return (lambda n: c), None
    seq = list(obj)
    return None, seq


class MoranSchedule:
    """(H0, (lam_n), (H_n), (b_n)) for n = first, first + 1, ...

    lambdas and Hs may be lists (finite schedule), constants, or callables.
    targets may be a constant, a list, a callable n -> value, or
    ("random", seed) for seeded random digits.  lam_rule / H_rule keep the
    sympy expressions when the schedule came from rule strings.
    """

    def __init__(self, H0, lambdas, Hs, targets=0, first=1, count=None,
                 lam_rule=None, H_rule=None, name=None):
        self.H0 = int(H0)
        self.first = int(first)
        self._lam_fn, self._lam_list = _as_callable(lambdas, "lambdas")
        self._H_fn, self._H_list = _as_callable(Hs, "Hs")
        counts = [len(x) for x in (self._lam_list, self._H_list) if x is not None]
        if count is None and counts:
            count = min(counts)
        self.count = count
        self.targets = targets
        self.lam_rule = lam_rule
        self.H_rule = H_rule
        self.name = name

    @classmethod
    def from_rules(cls, lam_rule, H_rule, H0=0, first=1, targets=0, name=None):
        """Rules are sympy expressions in n, e.g. '2n', 'n + floor((n-1)/2)', '1'."""
        n = sympy.Symbol("n", integer=True, positive=True)
        lam_e = _parse_rule(lam_rule, n)
        H_e = _parse_rule(H_rule, n)
        lam_f = sympy.lambdify(n, lam_e, modules="sympy")
        H_f = sympy.lambdify(n, H_e, modules="sympy")
        return cls(H0, lambda k: int(lam_f(k)), lambda k: int(H_f(k)), targets, first,
                   lam_rule=lam_e, H_rule=H_e, name=name)

    def lam(self, n):
        if self._lam_list is not None:
            return int(self._lam_list[n - self.first])
        return int(self._lam_fn(n))

    def H(self, n):
        if self._H_list is not None:
            return int(self._H_list[n - self.first])
        return int(self._H_fn(n))

    def indices(self, horizon):
        """Schedule indices n with n < first + horizon (and within a finite schedule)."""
        last = self.first + horizon
        if self.count is not None:
            last = min(last, self.first + self.count)
        return range(self.first, last)

    def lambdas(self, horizon):
        return [self.lam(n) for n in self.indices(horizon)]

    def Hs(self, horizon):
        return [self.H(n) for n in self.indices(horizon)]

    def target(self, n):
        t = self.targets
        if isinstance(t, tuple) and len(t) == 2 and t[0] == "random":
            return ("random", int(t[1]), n)
        if callable(t):
            return t(n)
        if isinstance(t, (list, tuple)):
            return t[n - self.first]
        return t

    def target_digits(self, n, spec, H):
        """Digits 0..H-1 of b_n."""
        b = self.target(n)
        if isinstance(b, tuple) and b and b[0] == "random":
            rng = np.random.default_rng([b[1], b[2]])
            return rng.integers(0, spec.p, size=H, dtype=np.int64)
        if isinstance(b, LocalFieldElement):
            el = b
        elif spec.char_p:
            el = LocalFieldElement.from_digits(spec, 0, [int(b) % spec.p], max(H, 1)).as_exact(max(H, 1))
        else:
            el = from_fraction(Fraction(b), spec, max(H, 1))
        if not el.is_zero() and el.valuation < 0:
            raise InvalidInput("targets must lie in O")
        return el.digit_array(0, H)

    def validate(self, horizon):
        idx = list(self.indices(horizon))
        if not idx:
            return
        lams = [self.lam(n) for n in idx]
        Hs = [self.H(n) for n in idx]
        if lams[0] < self.H0:
            raise InvalidSchedule(f"lambda_{idx[0]} = {lams[0]} < H0 = {self.H0}")
        for i in range(len(idx) - 1):
            if lams[i + 1] - lams[i] < Hs[i]:
                raise InvalidSchedule(
                    f"lambda_{idx[i + 1]} - lambda_{idx[i]} = {lams[i + 1] - lams[i]} < H_{idx[i]} = {Hs[i]}")
        if any(h < 0 for h in Hs):
            raise InvalidSchedule("H_n must be nonnegative")

    def to_json(self, horizon=None):
        out = {"H0": self.H0, "first": self.first, "name": self.name}
        if self.lam_rule is not None:
            out["lambda_rule"] = str(self.lam_rule)
            out["H_rule"] = str(self.H_rule)
        if horizon is not None or self.count is not None:
            h = horizon if horizon is not None else self.count
            out["lambdas"] = self.lambdas(h)
            out["Hs"] = self.Hs(h)
        return out


def _parse_rule(text, n):
    from sympy.parsing.sympy_parser import (implicit_multiplication_application,
                                            parse_expr, standard_transformations)
    text = str(text).strip()
    if "=" in text:
        text = text.split("=", 1)[1]
    tr = standard_transformations + (implicit_multiplication_application,)
    return parse_expr(text, local_dict={"n": n, "floor": sympy.floor, "ceiling": sympy.ceiling},
                      transformations=tr)


@dataclass
class BranchLevels:
    levels: list
    horizon: int
    H0: int

    def density(self):
        span = self.horizon - self.H0
        return Fraction(len(self.levels), span) if span > 0 else Fraction(0)

    def to_json(self):
        return {"levels": self.levels, "horizon": self.horizon, "H0": self.H0,
                "count": len(self.levels)}


def branch_levels(schedule, horizon):
    """I = Z cap ([H0, lam_first - 1] cup U [H_n + lam_n, lam_{n+1} - 1]), cut at the horizon.

    Levels past the last listed constraint of a finite schedule are free.
    """
    I = []
    lo = schedule.H0
    n = schedule.first
    while lo < horizon:
        if schedule.count is not None and n >= schedule.first + schedule.count:
            I.extend(range(lo, horizon))
            break
        lam = schedule.lam(n)
        I.extend(range(lo, min(lam, horizon)))
        lo = max(lo, lam + schedule.H(n))
        n += 1
    return BranchLevels(I, horizon, schedule.H0)


# ----- dimensions -------------------------------------------------------

@dataclass
class GammaDim:
    ratios: list
    tail_min: Fraction
    limit: object = None
    limit_method: str = None

    def to_json(self):
        return {
            "tail_min": _num_json(self.tail_min),
            "limit": None if self.limit is None else _num_json(self.limit),
            "limit_method": self.limit_method,
            "horizon": len(self.ratios),
            "last_ratio": _num_json(self.ratios[-1]) if self.ratios else None,
        }


def _num_json(x):
    if isinstance(x, Fraction):
        return {"num": x.numerator, "den": x.denominator, "decimal": float(x)}
    return {"decimal": float(x)}


def tail_min(seq):
    """min over the indices in (len/2, len], our finite stand-in for liminf."""
    h = len(seq)
    return min(seq[h // 2:]) if seq else None


def periodic_limit(num, den, max_period=64):
    """lim num_k/den_k when both have eventually periodic increments.

    Increments are checked over the second half of the data; if num and den
    gain A and B per period P there, the ratio tends to A/B.  Returns None
    when no period <= max_period fits or B = 0.
    """
    h = len(num)
    if h < 8:
        return None
    s = h // 2
    dn = np.diff(np.asarray(num, dtype=object)[s:])
    dd = np.diff(np.asarray(den, dtype=object)[s:])
    for P in range(1, min(max_period, len(dn) // 3) + 1):
        if all(dn[i] == dn[i + P] for i in range(len(dn) - P)) and \
                all(dd[i] == dd[i + P] for i in range(len(dd) - P)):
            A = sum(dn[:P])
            B = sum(dd[:P])
            if B == 0:
                return None
            return Fraction(int(A), int(B))
    return None


def _sympy_limit(schedule):
    if schedule.lam_rule is None or schedule.H_rule is None:
        return None
    n, k = sympy.symbols("n k", integer=True, positive=True)
    lam = schedule.lam_rule
    H = schedule.H_rule
    (sym,) = lam.free_symbols or {n}
    lam = lam.subs(sym, n)
    H = H.subs(list(H.free_symbols)[0], n) if H.free_symbols else H
    try:
        S = sympy.summation(H.subs(n, k), (k, schedule.first, n - 1))
        lim = sympy.limit((lam - S) / (lam + H), n, sympy.oo)
    except Exception:
        return None
    if lim.is_Rational:
        return Fraction(int(lim.p), int(lim.q))
    if lim.is_finite and lim.is_real:
        return float(lim)
    return None


def gamma_dim(schedule, horizon, validate=True):
    """Ratios (lam_n - sum_{first<=k<n} H_k)/(lam_n + H_n), their tail minimum and the limit.

    The limit is exact when the schedule increments are periodic (detected on
    the data) or when sympy can take the limit of rule expressions.
    """
    if validate:
        schedule.validate(horizon)
    lams = schedule.lambdas(horizon)
    Hs = schedule.Hs(horizon)
    ratios = []
    nums, dens = [], []
    acc = 0
    for lam, H in zip(lams, Hs):
        nums.append(lam - acc)
        dens.append(lam + H)
        ratios.append(Fraction(lam - acc, lam + H))
        acc += H
    limit = periodic_limit(nums, dens)
    method = "periodic" if limit is not None else None
    if limit is None:
        limit = _sympy_limit(schedule)
        method = "sympy" if limit is not None else None
    return GammaDim(ratios, tail_min(ratios), limit, method)


def _log(x):
    x = Fraction(x)
    return math.log(x.numerator) - math.log(x.denominator)


def _int_log(x, base):
    """e with base^e == x exactly, else None."""
    x = Fraction(x)
    if x <= 0:
        return None
    num, den = x.numerator, x.denominator
    if den != 1 and num != 1:
        return None
    v = gmpy2.mpz(num if den == 1 else den)
    # guess e from the bit length, then confirm with one exact power
    e = round((v.bit_length() - 1) / math.log2(base)) if v > 1 else 0
    for cand in (e, e - 1, e + 1):
        if cand >= 0 and gmpy2.mpz(base) ** cand == v:
            return cand if den == 1 else -cand
    return None


def _qpow(q, k):
    """q^k as an exact Fraction, built with GMP."""
    if k >= 0:
        return Fraction(int(gmpy2.mpz(q) ** k))
    return Fraction(1, int(gmpy2.mpz(q) ** -k))


@dataclass
class MoranBounds:
    lower_seq: list
    upper_seq: list
    lower: float
    upper: float
    lower_limit: object = None
    upper_limit: object = None

    def to_json(self):
        return {"lower": self.lower, "upper": self.upper,
                "lower_limit": None if self.lower_limit is None else _num_json(self.lower_limit),
                "upper_limit": None if self.upper_limit is None else _num_json(self.upper_limit)}


def moran_bounds(m_seq, delta_seq, d_seq, horizon=None, base=None):
    """Finite-horizon versions of log(m_1..m_{k-1})/-log(m_k delta_k) and log(m_1..m_k)/-log(d_k).

    When every value is an integer power of `base` the limits are also
    computed exactly from the exponent sequences.
    """
    if horizon is None:
        horizon = len(m_seq)
    m_seq, delta_seq, d_seq = m_seq[:horizon], delta_seq[:horizon], d_seq[:horizon]
    if any(Fraction(m) < 2 for m in m_seq):
        raise InvalidInput("every m_k must be at least 2")
    logs_m = [_log(m) for m in m_seq]
    lower, upper = [], []
    acc = 0.0
    for k in range(len(m_seq)):
        den = -(_log(m_seq[k]) + _log(delta_seq[k]))
        # the k = 1 term is an empty product; its denominator may vanish
        lower.append(acc / den if k else 0.0)
        acc += logs_m[k]
        upper.append(acc / -_log(d_seq[k]))
    lo_lim = up_lim = None
    if base is None and m_seq:
        base = _min_base(int(Fraction(m_seq[0])))
    if base:
        em = [_int_log(m, base) for m in m_seq]
        ed = [_int_log(d, base) for d in d_seq]
        es = [_int_log(Fraction(m) * Fraction(dl), base) for m, dl in zip(m_seq, delta_seq)]
        if None not in em and None not in ed and None not in es:
            cum = np.cumsum([0] + em).tolist()
            up_lim = periodic_limit(cum[1:], [-e for e in ed])
            lo_lim = periodic_limit(cum[1:-1], [-e for e in es[1:]])
    return MoranBounds(lower, upper, tail_min(lower), tail_min(upper), lo_lim, up_lim)


def _min_base(m):
    if m < 2:
        return None
    for b in range(2, m + 1):
        v = m
        while v % b == 0:
            v //= b
        if v == 1:
            return b
    return None


def moran_params(schedule, horizon, q):
    """(m_n, delta_n, d_n) of the Gamma_{b,H} Moran tree, exact.

    m_first = q^(lam - H0), m_n = q^(lam_n - lam_{n-1} - H_{n-1}), d_n = q^-(lam_n + H_n),
    delta_n = q^(1 - lam_n); the identity m_n delta_n = q d_{n-1} is asserted.
    """
    idx = list(schedule.indices(horizon))
    ms, deltas, ds = [], [], []
    prev = None
    for n in idx:
        lam, H = schedule.lam(n), schedule.H(n)
        if prev is None:
            ms.append(_qpow(q, lam - schedule.H0))
        else:
            ms.append(_qpow(q, lam - prev[0] - prev[1]))
        deltas.append(_qpow(q, 1 - lam))
        ds.append(_qpow(q, -lam - H))
        # checked in GMP rationals: Fraction gcds on numbers this size are slow
        if prev is not None and gmpy2.mpq(ms[-1]) * gmpy2.mpq(deltas[-1]) != q * gmpy2.mpq(ds[-2]):
            raise InvalidSchedule("m_n delta_n = q d_(n-1) fails")
        prev = (lam, H)
    return ms, deltas, ds


def freq_set_dim(m, rho, P):
    """(1 - rho) - rho sum p_j log_m p_j, exact when every log is an integer."""
    P = [Fraction(x) if not isinstance(x, float) else x for x in P]
    if any(x < 0 for x in P):
        raise InvalidInput("probabilities must be nonnegative")
    s = sum(P)
    if (isinstance(s, Fraction) and s != 1) or abs(float(s) - 1) > 1e-12:
        raise InvalidInput("probabilities must sum to 1")
    if not (0 <= rho <= 1):
        raise InvalidInput("rho must lie in [0, 1]")
    if m < 2:
        raise InvalidInput("m must be at least 2")
    rho_f = Fraction(rho) if not isinstance(rho, float) else rho
    terms = []
    exact = isinstance(rho_f, Fraction)
    for x in P:
        if x == 0:
            terms.append(0)
            continue
        e = _int_log(x, m) if isinstance(x, Fraction) else None
        if e is None:
            exact = False
            terms.append(float(x) * math.log(float(x), m))
        else:
            terms.append(x * e)
    if exact:
        return (1 - rho_f) - rho_f * sum(terms)
    return (1 - float(rho_f)) - float(rho_f) * sum(float(t) for t in terms)


def closed_form_dims(case, **params):
    """Dimension values: prop61(p, K, H, L), prop71(eta, eps), prop72(q, z_norm, tau)."""
    if case == "prop61":
        p, K, H, L = (int(params[k]) for k in ("p", "K", "H", "L"))
        if L < 1 or H < 0 or K < 1:
            raise InvalidInput("need L >= 1, H >= 0, K >= 1")
        return 1 - (1 - Fraction(1, p ** K)) * Fraction(H, L)
    if case == "prop71":
        eta = Fraction(params["eta"])
        eps = Fraction(params["eps"])
        if not (0 < eta <= 1) or not (0 < eps < 1):
            raise InvalidInput("need 0 < eta <= 1 and 0 < eps < 1")
        return eta / (1 + eps - eta * eps)
    if case == "prop72":
        q = int(params["q"])
        z = Fraction(params["z_norm"])
        tau = Fraction(params["tau"])
        if z <= 1 or tau <= 1:
            raise InvalidInput("need |z| > 1 and tau > 1")
        a, b = _int_log(z, q), _int_log(tau * z, q)
        if a is not None and b is not None:
            return Fraction(a, b)
        return _log(z) / _log(tau * z)
    raise InvalidInput(f"unknown case {case!r}")


# ----- construction -----------------------------------------------------

@dataclass
class CertificateRow:
    n: int
    lam: int
    H: int
    achieved: object
    passed: bool

    def to_json(self):
        a = self.achieved
        return {"n": self.n, "lambda": self.lam, "H": self.H,
                "achieved_exponent": "-inf" if a == -math.inf else a, "pass": self.passed}


@dataclass
class MembershipCertificate:
    rows: list
    precision: int
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(r.passed for r in self.rows)

    def to_json(self):
        return {"pass": self.passed, "precision": self.precision,
                "rows": [r.to_json() for r in self.rows]}


def _map_at(maps, n):
    return maps(n) if callable(maps) else maps[n]


def _match_depth(ydigits, bdigits):
    """Number of leading digits where [f(x)] agrees with b."""
    diff = np.flatnonzero(ydigits != bdigits)
    return int(diff[0]) if diff.size else len(bdigits)


def _integral_digits(y, H):
    if y.abs_precision < H:
        raise InsufficientPrecision(f"value known to precision {y.abs_precision} < {H}")
    return y.digit_array(0, H)


def construct_point(maps, schedule, start, precision, guard=GUARD):
    """Greedy descent through Gamma_{b,H} inside `start` (radius q^-H0).

    Returns x (exact digits up to `precision`) and a certificate covering every
    constraint with lam_n + H_n <= precision.
    """
    spec = start.spec
    if start.radius_exponent != schedule.H0:
        raise InvalidSchedule("start disk radius must be q^-H0")
    q = spec.q
    # the constraint windows below the precision
    windows = []
    for n in schedule.indices(10 ** 9):
        lam = schedule.lam(n)
        if lam >= precision:
            break
        windows.append((n, lam, schedule.H(n)))
    schedule.validate(len(windows) + 1 if schedule.count is None else min(len(windows) + 1, schedule.count))
    lo = start.center.valuation if not start.center.is_zero() else schedule.H0
    lo = min(lo, schedule.H0)
    digits = np.zeros(precision - lo, dtype=np.int64)
    if schedule.H0 > lo:
        digits[: schedule.H0 - lo] = start.prefix_digits(lo)

    def point(upto):
        return LocalFieldElement.from_digits(spec, lo, digits[: upto - lo], upto).as_exact(upto + guard)

    for n, lam, H in windows:
        f = _map_at(maps, n)
        lam_f = scaling_exponent(f)
        if isinstance(lam_f, HolderExponent) or lam_f != lam:
            raise ConstructionFailure(f"map {n} has exponent {lam_f}, schedule says {lam}")
        top = min(H, precision - lam)
        b = schedule.target_digits(n, spec, H)
        for j in range(top):
            level = lam + j
            good = []
            for d in range(q):
                digits[level - lo] = d
                y = apply(f, point(level + 1))
                yd = _integral_digits(y, j + 1)
                if _match_depth(yd, b[: j + 1]) == j + 1:
                    good.append(d)
            if not good:
                raise ConstructionFailure(f"no digit at level {level} meets constraint {n}")
            if len(good) > 1:
                raise AmbiguityFailure(f"digits {good} at level {level} all meet constraint {n}")
            digits[level - lo] = good[0]
    x = LocalFieldElement.from_digits(spec, lo, digits, precision)
    cert = certify(maps, schedule, x, precision)
    return x, cert


def certify(maps, schedule, x, precision, guard=GUARD):
    """Certificate rows for x using the library's own evaluation path."""
    rows = []
    spec = x.spec
    xe = x.as_exact(precision + guard)
    for n in schedule.indices(10 ** 9):
        lam, H = schedule.lam(n), schedule.H(n)
        if lam + H > precision:
            break
        y = apply(_map_at(maps, n), xe)
        b = schedule.target_digits(n, spec, H)
        k = _match_depth(_integral_digits(y, H), b)
        achieved = -k if k < H else -H
        rows.append(CertificateRow(n, lam, H, achieved, k >= H))
    return MembershipCertificate(rows, precision)


def _frac_of(c, spec):
    if isinstance(c, LocalFieldElement):
        return c.to_fraction()
    return Fraction(c)


def _digits_of_rational(r, p, H):
    """Digits 0..H-1 of the p-adic expansion of a rational r (independent of field.py)."""
    out = np.zeros(H, dtype=np.int64)
    if r == 0 or H <= 0:
        return out
    num, den = r.numerator, r.denominator
    e = 0
    while den % p == 0:
        den //= p
        e += 1
    mod = p ** (H + e)
    u = (num % mod) * pow(den, -1, mod) % mod
    u //= p ** e
    for i in range(H):
        u, out[i] = divmod(u, p)
    return out


def _value_mod(coef, xr, s, p, H):
    """Digits 0..H-1 of [f(x)] for rational data, using modular powers only."""
    if s.kind == "power":
        # alpha x^n with x = X / D: work modulo p^(H + e) with e the denominator's p-part
        n = s.n
        X, D = xr.numerator, xr.denominator
        a, c = coef.numerator, coef.denominator
        e = 0
        c_ = c
        while c_ % p == 0:
            c_ //= p
            e += 1
        D_ = D
        ed = 0
        while D_ % p == 0:
            D_ //= p
            ed += 1
        e_tot = e + n * ed
        mod = p ** (H + e_tot)
        val = a * pow(X, n, mod) % mod
        val = val * pow(c_ * pow(D_, n, mod) % mod, -1, mod) % mod
        val //= p ** e_tot
        out = np.zeros(H, dtype=np.int64)
        for i in range(H):
            val, out[i] = divmod(val, p)
        return out
    if s.kind == "geometric":
        return _digits_of_rational(coef ** s.n * xr, p, H)
    return _digits_of_rational(coef * xr + _frac_of(s.shift, None), p, H)


def verify_certificate(maps, schedule, x, cert):
    """Re-evaluate every row from exact rationals (char 0) or schoolbook products (char p)."""
    spec = x.spec
    for row in cert.rows:
        s = _map_at(maps, row.n)
        b = schedule.target_digits(row.n, spec, row.H)
        if spec.char_p:
            y = _charp_value(s, x, row.H)
        else:
            y = _value_mod(_frac_of(s.coef, spec), x.to_fraction(), s, spec.p, row.H)
        ok = bool(np.all(y == b))
        if ok != row.passed:
            return False
    return True


def _charp_value(s, x, H):
    """Digits 0..H-1 of [f(x)] in F_p((t)) via plain convolutions."""
    p = s.spec.p
    v, ds = x.valuation, np.array(x.digits, dtype=np.int64)
    c = coef_element(s.coef, s.spec, x.abs_precision + 64)

    def mul(a, b):
        return np.convolve(a[0:], b) % p

    if s.kind == "power":
        acc = np.array([1], dtype=np.int64)
        for _ in range(s.n):
            acc = mul(acc, ds)[: 4 * len(ds) + 4 * H + 64]
        val = v * s.n
        acc = mul(acc, np.array(c.digits, dtype=np.int64))
        val += c.valuation
    else:
        raise InvalidInput("characteristic-p verification covers power maps")
    out = np.zeros(H, dtype=np.int64)
    for i in range(H):
        j = i - val
        if 0 <= j < len(acc):
            out[i] = acc[j]
    return out


def exhaustive_prefixes(maps, schedule, start, depth):
    """Digit prefixes of length `depth` below the start disk meeting every decidable constraint."""
    spec = start.spec
    q = spec.q
    H0 = schedule.H0
    top = H0 + depth
    checks = []
    for n in schedule.indices(10 ** 9):
        lam, H = schedule.lam(n), schedule.H(n)
        if lam + H > top:
            break
        checks.append((n, H))
    lo = start.center.valuation if not start.center.is_zero() else H0
    lo = min(lo, H0)
    prefix = start.prefix_digits(lo)
    survivors = []
    for idx in range(q ** depth):
        tail = [(idx // q ** i) % q for i in range(depth)]
        x = LocalFieldElement.from_digits(spec, lo, list(prefix) + tail, top).as_exact(top + GUARD)
        ok = True
        for n, H in checks:
            y = apply(_map_at(maps, n), x)
            if _match_depth(_integral_digits(y, H), schedule.target_digits(n, spec, H)) < H:
                ok = False
                break
        if ok:
            survivors.append(tuple(tail))
    return survivors


# ----- psi encoder ------------------------------------------------------

def psi_encode(g_family, x, prec):
    """Digit n of psi(x) is digit 0 of [g_n(x)], n = 0..prec-1; each g_n must scale by q^n."""
    spec = x.spec
    out = []
    for n in range(prec):
        g = _map_at(g_family, n)
        lam = scaling_exponent(g)
        if isinstance(lam, HolderExponent) or lam != n:
            raise InvalidFamily(f"g_{n} has scaling exponent {lam}, expected {n}")
        y = apply(g, x)
        out.append(int(_integral_digits(y, 1)[0]))
    return LocalFieldElement.from_digits(spec, 0, out, prec)


def shift_family(spec, c=None):
    """g_n(x) = pi^-n (x + c) on O (c = 0 gives the identity encoder)."""
    O = Disk.unit_ball(spec)

    def g(n):
        if spec.char_p:
            beta = LocalFieldElement.from_digits(spec, -n, [1], 64 - n).as_exact(10 ** 6)
        else:
            beta = Fraction(1, spec.p ** n)
        if c is None:
            return ScalingMapSpec.affine(beta, 0, O)
        shift = (beta * c) if isinstance(c, LocalFieldElement) else Fraction(c) * beta
        return ScalingMapSpec.affine(beta, shift, O)
    return g


# ----- named schedules ----------------------------------------------------

@dataclass
class Construction:
    name: str
    spec: FieldSpec
    maps: object
    schedule: MoranSchedule
    start: Disk
    info: dict = field(default_factory=dict)


def mahler(p=2):
    """[x (3/2)^n] in 2Z_2 for all n >= 0, x in D(1/2, 1): lam_n = n, H_n = 1, H0 = 0."""
    if p != 2:
        raise InvalidInput("the Mahler analogue lives in Q_2")
    spec = FieldSpec.qp(2)
    start = Disk(from_fraction(Fraction(1, 2), spec, 0), 0)
    beta = Fraction(3, 2)

    def maps(n):
        return ScalingMapSpec.geometric(beta, n, start)

    sched = MoranSchedule.from_rules("n", "1", H0=0, first=0, targets=0, name="mahler")
    return Construction("mahler", spec, maps, sched, start, {"beta": "3/2"})


def prop61_exponent(n, p, K):
    """m_n = n + floor((n - 1)/(p^K - 1)): the n-th positive integer not divisible by p^K."""
    return n + (n - 1) // (p ** K - 1)


def prop61(p=3, K=1, H=1, L=6, alpha=1, targets=0):
    """Highly biased points of ([alpha x^n]) along p^K not dividing n.

    Omega = A/alpha + b_1/alpha + pi^(H+S) O with |A| = q^L, |alpha| = q^S.
    The n = 1 condition holds on all of Omega, so the schedule runs over
    n >= 2, re-indexed from 1: f_j(x) = alpha x^(m_(j+1)).
    """
    spec = FieldSpec.qp(p)
    alpha = Fraction(alpha)
    va = vp_int(alpha.numerator, p) - vp_int(alpha.denominator, p)
    S = -va
    b1 = Fraction(targets) if not isinstance(targets, (list, tuple)) and not callable(targets) else Fraction(0)
    H0 = H + S
    center = (Fraction(1, p ** L) + b1) / alpha
    prec = max(H0, 1) + 2 * L + 16
    start = Disk(from_fraction(center, spec, prec), H0)
    av = start.center.valuation

    def maps(j):
        return ScalingMapSpec.power(alpha, prop61_exponent(j + 1, p, K), start)

    def lam(j):
        return lam_power(va, av, prop61_exponent(j + 1, p, K), p)

    sched = MoranSchedule(H0, lam, H, targets=targets, first=1, name="prop61")
    return Construction("prop61", spec, maps, sched, start,
                        {"p": p, "K": K, "H": H, "L": L, "alpha": str(alpha),
                         "dimension": closed_form_dims("prop61", p=p, K=K, H=H, L=L)})


def _ceil_log_mult(n, tau, q):
    """ceil(n log_q tau), exact when tau is a rational power of q."""
    tau = Fraction(tau)
    e = _int_log(tau, q)
    if e is not None:
        return n * e
    import mpmath
    mpmath.mp.dps = 60 + len(str(n))
    val = mpmath.mpf(n) * mpmath.log(mpmath.mpf(tau.numerator) / tau.denominator) / mpmath.log(q)
    return int(mpmath.ceil(val))


def build_prop72_schedule(z_norm_exp, tau, delta_exp, alpha_v=0, count=10, p=5, targets=0):
    """Greedy n_k for the infinitely-often approximation set.

    |z| = q^z_norm_exp, tau > 1, delta = q^-delta_exp, v(alpha) = alpha_v.
    Conditions: p does not divide n_k; |z|^(n_1 - 1) >= 1/(delta |alpha|);
    |z|^(n_(k+1) - n_k) >= tau^n_k; and n_(k+1) >= (k+1)^2 (n_1 + ... + n_k),
    which forces (n_1 + ... + n_k)/n_(k+1) -> 0.
    """
    q = p
    zr = int(z_norm_exp)
    if zr < 1:
        raise InvalidInput("need |z| > 1")
    if Fraction(tau) <= 1:
        raise InvalidInput("need tau > 1")
    ns = []
    n = 1
    # first: (n - 1) zr >= delta_exp + alpha_v  (|alpha| = q^-alpha_v)
    while n % p == 0 or (n - 1) * zr < delta_exp + alpha_v:
        n += 1
    ns.append(n)
    while len(ns) < count:
        k = len(ns)
        cur = ns[-1]
        need = _ceil_log_mult(cur, tau, q)
        nxt = max(cur + -(-need // zr), (k + 1) ** 2 * sum(ns))
        while nxt % p == 0:
            nxt += 1
        ns.append(nxt)
    Hs = [_ceil_log_mult(m, tau, q) for m in ns]
    lams = [-alpha_v + (m - 1) * zr for m in ns]
    sched = MoranSchedule(delta_exp, lams, Hs, targets=targets, first=1, name="prop72")
    return ns, sched


def audit_prop72(ns, z_norm_exp, tau, delta_exp, alpha_v=0, p=5):
    """Re-check the three displayed conditions and the ratio rule on an emitted subsequence."""
    q = p
    ok = all(m % p for m in ns)
    ok &= (ns[0] - 1) * z_norm_exp >= delta_exp + alpha_v
    for k in range(len(ns) - 1):
        ok &= (ns[k + 1] - ns[k]) * z_norm_exp >= _ceil_log_mult(ns[k], tau, q)
        ok &= ns[k + 1] >= (k + 2) ** 2 * sum(ns[: k + 1])
    return bool(ok)


def squares_not_divisible(count, p, K=1):
    """r_n = n^2 over n with p^K not dividing n^2 (the plain squares hit p^K)."""
    out = []
    n = 1
    while len(out) < count:
        if (n * n) % p ** K:
            out.append(n * n)
        n += 1
    return out


def _gaps_grow(r):
    gaps = np.diff(np.asarray(r, dtype=object))
    if len(gaps) < 4:
        return False
    h = len(gaps) // 2
    return min(gaps[h:]) > min(gaps[:h])


def refine_sequence(r, eps, p, K):
    """Insert points so that r~_(n+1) <= (1 + eps) r~_n, keeping p^K out and gaps growing."""
    eps = Fraction(eps)
    pk = p ** K
    out = [r[0]]
    for nxt in r[1:]:
        cur = out[-1]
        ins = []
        while nxt > (1 + eps) * cur:
            c = int((1 + eps) * cur)
            while c % pk == 0:
                c -= 1
            if c <= cur:
                # small terms: no integer fits between cur and (1 + eps) cur
                break
            ins.append(c)
            cur = c
        if len(ins) >= 1:
            prev = ins[-2] if len(ins) >= 2 else out[-1]
            last = ins[-1]
            if nxt - last < (last - prev) / 2:
                mid = (prev + nxt) // 2
                while mid % pk == 0:
                    mid -= 1
                ins[-1] = mid
        out.extend(ins)
        out.append(nxt)
    return out


def prop71_schedule(r_seq, z, eta, eps, N_cut=None, alpha=1, delta_exp=None, K=1, targets=0):
    """Nested-disk schedule for lim ([alpha x^(r_n)] - b_n) = 0 on D(z, delta).

    r~ refines r; f_n(x) = alpha x^(r~_(n+N-1)); H_n = log_q|z| floor((1-eta)(r~_(n+N) - r~_(n+N-1))).
    N is the least index meeting both the radius and the gap condition.
    """
    spec = z.spec
    p = spec.p
    zr = -z.valuation
    if zr < 1:
        raise InvalidSchedule("need |z| > 1")
    r = list(r_seq)
    if any(b <= a for a, b in zip(r, r[1:])):
        raise InvalidSchedule("r must be strictly increasing")
    if not _gaps_grow(r):
        raise InvalidSchedule("gaps r_(n+1) - r_n do not grow within the horizon")
    if any(x % p ** K == 0 for x in r):
        raise InvalidSchedule("p^K divides some r_n")
    eta = Fraction(eta)
    rt = refine_sequence(r, eps, p, K)
    if N_cut is not None:
        rt = rt[:N_cut]
    alpha = Fraction(alpha)
    av = vp_int(alpha.numerator, p) - vp_int(alpha.denominator, p)
    if delta_exp is None:
        delta_exp = max(1, 3 - zr)
    gaps = [b - a for a, b in zip(rt, rt[1:])]
    # gap > K / (eta log_p|z|)  <=>  gap * eta * zr > K
    N = None
    for cand in range(1, len(rt)):
        first_ok = -vp_int(rt[cand - 1], p) + (rt[cand - 1] - 1) * zr > delta_exp - av
        tail_ok = all(g * eta * zr > K for g in gaps[cand - 1:])
        if first_ok and tail_ok:
            N = cand
            break
    if N is None:
        raise InvalidSchedule("no admissible N within the horizon")
    exps = rt[N - 1:]
    lams = [lam_power(av, -zr, e, p) for e in exps[:-1]]
    Hs = [zr * int((1 - eta) * (exps[i + 1] - exps[i])) for i in range(len(exps) - 1)]
    center = z.as_exact(max(z.abs_precision, delta_exp))
    start = Disk(center, delta_exp)

    def maps(n):
        return ScalingMapSpec.power(alpha, exps[n - 1], start)

    sched = MoranSchedule(delta_exp, lams, Hs, targets=targets, first=1, name="prop71")
    sched.validate(len(lams))
    return Construction("prop71", spec, maps, sched, start,
                        {"N": N, "refined": rt, "exponents": exps[:-1], "eta": str(eta), "eps": str(eps),
                         "lower_bound": closed_form_dims("prop71", eta=eta, eps=eps)})
