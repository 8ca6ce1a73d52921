"""Haar measure, the subgroup measures mu_k, the mixture mu*, and frequency statistics.

Level-m cells of O are indexed by the integer sum d_i q^i over their first m
digits, so cell 0 is pi^m O and digit 0 varies fastest.  All measures are
exact Fractions.
"""

import csv
import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .disk import Disk
from .errors import (InsufficientPrecision, InvalidConfiguration, InvalidInput,
                     TooLarge, UnsupportedMeasure)
from .field import LocalFieldElement, from_int
from .scaling import HolderExponent, apply, scaling_exponent

ENUM_CAP = 10 ** 7


class Membership(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class MeasureSpec:
    tag: str
    k: int = 0

    def __post_init__(self):
        if self.tag not in ("haar", "mu_k", "mu_star"):
            raise InvalidInput(f"unknown measure {self.tag!r}")
        if self.tag == "mu_k" and self.k < 1:
            raise InvalidInput("mu_k needs k >= 1")

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if text in ("haar", "mu"):
            return cls("haar")
        if text in ("mu_star", "mu*", "mustar"):
            return cls("mu_star")
        if text.startswith("mu_"):
            return cls("mu_k", int(text[3:]))
        raise InvalidInput(f"unknown measure {text!r}")

    def __str__(self):
        return f"mu_{self.k}" if self.tag == "mu_k" else self.tag


HAAR = MeasureSpec("haar")
MU_STAR = MeasureSpec("mu_star")


def _need_char_p(spec, what):
    if not spec.char_p:
        raise UnsupportedMeasure(f"{what} is defined in characteristic p only")


def _need_in_O(d):
    if not d.in_unit_ball():
        raise InvalidInput("the disk must lie in O")


def haar_of_disk(d):
    return Fraction(d.spec.q) ** -d.radius_exponent


def in_S_k(x, k, level=None):
    """Tri-state membership of x in S_k = {c_i = 0 whenever p^k does not divide i}.

    Known digits decide NO; otherwise the answer is UNKNOWN exactly when some
    index in [precision, level) could still carry a forbidden digit.
    """
    spec = x.spec
    _need_char_p(spec, "S_k")
    pk = spec.p ** k
    n = x.abs_precision
    if not x.is_zero():
        ds = x.digit_array(x.valuation, n)
        idx = np.arange(x.valuation, n)
        if np.any((ds != 0) & (idx % pk != 0)):
            return Membership.NO
    level = n if level is None else level
    for i in range(n, level):
        if i % pk:
            return Membership.UNKNOWN
    return Membership.YES


def _mu_k_digits(ds, k, p):
    pk = p ** k
    m = len(ds)
    for i in range(m):
        if i % pk and ds[i]:
            return Fraction(0)
    return Fraction(1, p ** (-(-m // pk)))


def _mu_star_digits(ds, p):
    m = len(ds)
    total = Fraction(1, p ** m)
    # K* = least k >= 1 with p^k >= m; beyond it mu_k is constant in k
    kstar = 1
    while p ** kstar < m:
        kstar += 1
    for k in range(1, kstar):
        total += Fraction(1, p ** k) * _mu_k_digits(ds, k, p)
    c = _mu_k_digits(ds, kstar, p)
    total += c * Fraction(1, p ** kstar) * Fraction(p, p - 1)
    return (1 - Fraction(1, p)) * total


def mu_k_of_disk(d, k):
    _need_char_p(d.spec, "mu_k")
    _need_in_O(d)
    return _mu_k_digits(d.prefix_digits(0).tolist(), k, d.spec.p)


def mu_star_of_disk(d):
    _need_char_p(d.spec, "mu*")
    _need_in_O(d)
    return _mu_star_digits(d.prefix_digits(0).tolist(), d.spec.p)


def measure_of_disk(d, measure):
    if measure.tag == "haar":
        return haar_of_disk(d)
    if measure.tag == "mu_k":
        return mu_k_of_disk(d, measure.k)
    return mu_star_of_disk(d)


def cell_digits(index, q, m):
    out = []
    for _ in range(m):
        index, r = divmod(index, q)
        out.append(r)
    return out


def cell_measures(spec, m, measure=HAAR):
    """Exact measure of every level-m cell of O, as a list indexed by cell number."""
    q = spec.q
    if q ** m > ENUM_CAP:
        raise TooLarge(f"{q}^{m} cells exceed the enumeration cap")
    if measure.tag == "haar":
        return [Fraction(1, q ** m)] * (q ** m)
    _need_char_p(spec, str(measure))
    if measure.tag == "mu_k":
        return [_mu_k_digits(cell_digits(i, q, m), measure.k, q) for i in range(q ** m)]
    return [_mu_star_digits(cell_digits(i, q, m), q) for i in range(q ** m)]


def s1_hull_measure(spec, m, k=1):
    """Haar measure of the level-m hull of S~_k: q^(ceil(m/p^k) - m)."""
    pk = spec.p ** k
    return Fraction(spec.q ** (-(-m // pk)), spec.q ** m)


def hull_cells(spec, m, k=1):
    """Indices of the level-m cells meeting S~_k."""
    q = spec.q
    pk = spec.p ** k
    return [i for i in range(q ** m)
            if all(d == 0 for j, d in enumerate(cell_digits(i, q, m)) if j % pk)]


def cell_index(x, m):
    """Level-m cell of x in O (requires x in O known modulo pi^m)."""
    if x.abs_precision < m:
        raise InsufficientPrecision(f"element known to precision {x.abs_precision} < level {m}")
    if not x.is_zero() and x.valuation < 0:
        raise InvalidInput("element is not in O")
    ds = x.digit_array(0, m)
    q = x.spec.q
    return int(sum(int(d) * q ** i for i, d in enumerate(ds.tolist())))


def integral_cell(x, m):
    """Level-m cell of [x]."""
    if x.abs_precision < m:
        raise InsufficientPrecision(f"element known to precision {x.abs_precision} < level {m}")
    ds = x.digit_array(0, m)
    q = x.spec.q
    return int(sum(int(d) * q ** i for i, d in enumerate(ds.tolist())))


@dataclass
class FrequencyReport:
    level: int
    q: int
    N: int
    measure: str
    counts: list
    expected: list
    discrepancy: Fraction = None
    cells: list = field(default=None)

    def __post_init__(self):
        if sum(self.counts) != self.N:
            raise InvalidInput("cell counts must sum to N")
        if self.discrepancy is None:
            self.discrepancy = discrepancy_from_counts(self.counts, self.expected, self.N)

    def to_json(self):
        return {
            "level": self.level,
            "q": self.q,
            "N": self.N,
            "measure": self.measure,
            "discrepancy": rational_json(self.discrepancy),
            "cells": [
                {"index": i, "digits": cell_digits(i, self.q, self.level),
                 "expected": rational_json(e), "count": int(c)}
                for i, (c, e) in enumerate(zip(self.counts, self.expected))
            ],
        }

    @classmethod
    def from_json(cls, obj):
        counts = [c["count"] for c in obj["cells"]]
        expected = [Fraction(c["expected"]["num"], c["expected"]["den"]) for c in obj["cells"]]
        return cls(obj["level"], obj["q"], obj["N"], obj["measure"], counts, expected)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["level", "cell", "digits", "expected_num", "expected_den", "expected", "count", "N", "frequency"])
        for i, (c, e) in enumerate(zip(self.counts, self.expected)):
            w.writerow([self.level, i, "".join(str(d) for d in cell_digits(i, self.q, self.level)),
                        e.numerator, e.denominator, float(e), int(c), self.N, int(c) / self.N])
        return buf.getvalue()


def rational_json(r):
    r = Fraction(r)
    return {"num": r.numerator, "den": r.denominator, "decimal": float(r)}


def discrepancy_from_counts(counts, expected, N):
    return max(abs(Fraction(int(c), N) - e) for c, e in zip(counts, expected))


def report_from_cells(spec, level, cells, measure=HAAR, expected=None):
    """FrequencyReport from an array of cell indices."""
    cells = np.asarray(cells, dtype=np.int64)
    counts = np.bincount(cells, minlength=spec.q ** level).tolist()
    if expected is None:
        expected = cell_measures(spec, level, measure)
    return FrequencyReport(level, spec.q, int(cells.size), str(measure), counts, expected)


def empirical_frequencies(seq, m, measure=HAAR):
    seq = list(seq)
    if not seq:
        raise InvalidInput("empty sequence")
    spec = seq[0].spec
    return report_from_cells(spec, m, [cell_index(x, m) for x in seq], measure)


def discrepancy(seq, m, measure=HAAR):
    return empirical_frequencies(seq, m, measure).discrepancy


def enumerate_quotient(m, spec, cap=ENUM_CAP):
    """The q^m residues of O mod pi^m as exact elements, cell order."""
    q = spec.q
    if q ** m > cap:
        raise TooLarge(f"{q}^{m} residues exceed the cap {cap}")
    if not spec.char_p:
        return [from_int(i, spec, m) for i in range(q ** m)]
    return [LocalFieldElement.from_digits(spec, 0, cell_digits(i, q, m), m) for i in range(q ** m)]


# ----- finite-quotient oracles ------------------------------------------

@dataclass
class OracleResult:
    name: str
    passed: bool
    details: dict

    def to_json(self):
        return {"name": self.name, "verdict": "PASS" if self.passed else "FAIL", **self.details}


def _map_cells(s, m, level):
    """Level-`level` cell of [f(r)] for every residue r mod pi^m."""
    return np.array([integral_cell(apply(s, r), level) for r in enumerate_quotient(m, s.spec)], dtype=np.int64)


def _lam_nonneg(s):
    lam = scaling_exponent(s)
    if isinstance(lam, HolderExponent) or lam < 0:
        raise InvalidConfiguration("the oracle needs a scaling map with lambda >= 0")
    if not s.domain.in_unit_ball() or s.domain.radius_exponent != 0:
        raise InvalidConfiguration("the oracle needs a map defined on all of O")
    return lam


def oracle_haar_invariance(s, m, target_level):
    """Every level cell has exactly q^(m - level) preimages among residues mod pi^m."""
    lam = _lam_nonneg(s)
    if m < lam + target_level:
        raise InvalidConfiguration("need m >= lambda + target_level")
    q = s.spec.q
    counts = np.bincount(_map_cells(s, m, target_level), minlength=q ** target_level)
    want = q ** (m - target_level)
    return OracleResult("haar_invariance", bool(np.all(counts == want)),
                        {"lambda": lam, "m": m, "level": target_level, "expected_count": want,
                         "counts": counts.tolist()})


def oracle_decorrelation(f, g, d, m=None):
    """mu(f~^-1 D  cap  g~^-1 D) by enumeration, compared with mu(D)^2."""
    lf, lg = _lam_nonneg(f), _lam_nonneg(g)
    gamma = d.radius_exponent
    if not lf > lg >= 0:
        raise InvalidConfiguration("need lambda_f > lambda_g >= 0")
    if not (0 <= gamma <= lf - lg) or not d.in_unit_ball():
        raise InvalidConfiguration("need a disk in O of radius q^-gamma, 0 <= gamma <= lambda_f - lambda_g")
    if m is None:
        m = lf + gamma
    if m < lf + gamma:
        raise InvalidConfiguration("enumeration depth must be at least lambda_f + gamma")
    q = f.spec.q
    target = integral_cell(d.center.as_exact(gamma), gamma)
    hits = int(np.count_nonzero((_map_cells(f, m, gamma) == target) & (_map_cells(g, m, gamma) == target)))
    meas = Fraction(hits, q ** m)
    want = haar_of_disk(d) ** 2
    return OracleResult("decorrelation", meas == want,
                        {"lambda_f": lf, "lambda_g": lg, "gamma": gamma, "m": m,
                         "measure": rational_json(meas), "expected": rational_json(want)})


def decorrelation_grid(f, g):
    """Decorrelation check for every gamma in [0, lf - lg] and every disk of radius q^-gamma.

    One enumeration at depth 2 lf - lg serves all gammas: the level-gamma cell
    of [f(r)] only depends on r mod pi^(lf + gamma).
    """
    lf, lg = _lam_nonneg(f), _lam_nonneg(g)
    if not lf > lg >= 0:
        raise InvalidConfiguration("need lambda_f > lambda_g >= 0")
    q = f.spec.q
    top = lf - lg
    m = lf + top
    cf = _map_cells(f, m, top)
    cg = _map_cells(g, m, top)
    rows = []
    for gamma in range(top + 1):
        mod = q ** gamma
        joint = np.where(cf % mod == cg % mod, cf % mod, -1)
        counts = np.bincount(joint[joint >= 0], minlength=mod)
        want = Fraction(1, q ** (2 * gamma))
        ok = all(Fraction(int(c), q ** m) == want for c in counts)
        rows.append({"gamma": gamma, "disks": mod, "pass": ok,
                     "min": rational_json(Fraction(int(counts.min()), q ** m)),
                     "max": rational_json(Fraction(int(counts.max()), q ** m)),
                     "expected": rational_json(want)})
    return OracleResult("decorrelation_grid", all(r["pass"] for r in rows),
                        {"lambda_f": lf, "lambda_g": lg, "m": m, "rows": rows})


def sample_mu_star(spec, rng, precision, size):
    """Draw from mu*: with probability (1 - 1/p) p^-k pick S~_k (k = 0 meaning O) uniformly."""
    _need_char_p(spec, "mu*")
    rng = np.random.default_rng(rng)
    p = spec.p
    out = []
    ks = rng.geometric(1 - 1 / p, size=size) - 1
    for k in ks.tolist():
        ds = rng.integers(0, p, size=precision, dtype=np.int64)
        if k:
            idx = np.arange(precision)
            ds[idx % p ** k != 0] = 0
        out.append(LocalFieldElement.from_digits(spec, 0, ds, precision))
    return out


def disk_tree(spec, depth):
    """All disks in O with radius exponent 0..depth (breadth first)."""
    level = [Disk.unit_ball(spec)]
    out = list(level)
    for _ in range(depth):
        level = [s for d in level for s in d.sons()]
        out.extend(level)
    return out
