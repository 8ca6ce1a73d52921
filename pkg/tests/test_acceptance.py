"""Acceptance criteria 1-12.

Each criterion is one test.  Every test records a single PASS/FAIL line, and
the lines are printed together at the end of the pytest run (see conftest.py).
Running this file directly prints the same lines without pytest.
"""

import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nak import exceptional as ex
from nak.disk import Disk
from nak.experiments import ExperimentConfig, random_affine, run_char_p, run_koksma, tolerance
from nak.field import FieldSpec
from nak.measures import (HAAR, MU_STAR, MeasureSpec, decorrelation_grid, disk_tree, measure_of_disk,
                          mu_star_of_disk, oracle_haar_invariance, s1_hull_measure)
from nak.pisot import (PisotChabautySpec, diff_exponents_two_paths, level_discrepancy, limit_point_table,
                       trace_sequence)
from nak.scaling import lambda_class

from lemma41 import check_pairs
from oracles import int_part_cell, vp

RESULTS = {}


def record(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[num] = line
    return ok


def _disc(entry):
    d = entry["discrepancy"]
    return Fraction(d["num"], d["den"])


# 1 --------------------------------------------------------------------------

def criterion_1():
    t0 = time.time()
    ok, n = True, 0
    for p in (2, 3, 5):
        spec = FieldSpec.qp(p)
        rng = np.random.default_rng([1, p])
        for lam in (0, 1, 2):
            for _ in range(20):
                r = oracle_haar_invariance(random_affine(spec, lam, rng), lam + 2, 2)
                ok &= r.passed and set(r.details["counts"]) == {p ** lam}
                n += 1
    dt = time.time() - t0
    return record(1, ok and dt < 5, f"{n} maps, every target cell count q^(m-2), {dt:.2f}s (< 5s)")


# 2 --------------------------------------------------------------------------

def criterion_2():
    t0 = time.time()
    ok, n = True, 0
    for p in (2, 3):
        spec = FieldSpec.qp(p)
        rng = np.random.default_rng([2, p])
        # the lemma needs lambda_f > lambda_g
        for lf in range(1, 5):
            for lg in range(0, min(2, lf - 1) + 1):
                r = decorrelation_grid(random_affine(spec, lf, rng), random_affine(spec, lg, rng))
                ok &= r.passed
                n += len(r.details["rows"])
    dt = time.time() - t0
    return record(2, ok and dt < 10, f"{n} (f, g, gamma, D) cases equal mu(D)^2, {dt:.2f}s (< 10s)")


# 3 --------------------------------------------------------------------------

def _lemma41_ns(p):
    base = [1, 2, 3, 4, 7, 11, 16, 23, 31, 37, 43, 50]
    extra = [p, 2 * p, p * p, 3 * p * p if 3 * p * p <= 50 else p ** 3 if p ** 3 <= 50 else 5 * p]
    return sorted(set(base + extra))


def criterion_3():
    total, bad = 0, []
    for p, char in ((3, 0), (5, 0), (2, 2), (3, 3)):
        ns = _lemma41_ns(p)
        assert any(n % p == 0 for n in ns)
        checked, b = check_pairs(p, char, ns, 1000, seed=3)
        total += checked
        bad += b
    return record(3, not bad, f"{total} pairs, {len(bad)} mismatches between measured and predicted exponent")


# 4 --------------------------------------------------------------------------

def criterion_4():
    """#Lambda^gamma_{n,1,N} <= log_p(N+1)/gamma + 1 for every n <= N <= 10^4.

    Inside one class the count only grows at a member, so it suffices to test
    the j-th member m_j with N = m_j: p^(gamma (j-1)) <= m_j + 1.
    """
    Nmax = 10 ** 4
    ok, checks = True, 0
    for p in (2, 3, 5):
        vals = [vp(m, p) for m in range(1, Nmax + 1)]
        for gamma in (1, 2, 3):
            classes = {}
            for m in range(1, Nmax + 1):
                classes.setdefault(m * gamma - vals[m - 1], []).append(m)
            for members in classes.values():
                for j, m in enumerate(members, start=1):
                    ok &= p ** (gamma * (j - 1)) <= m + 1
                    checks += 1
            # the package agrees with the direct classes at N = 10^4
            spec = FieldSpec.qp(p)
            for n in range(1, Nmax + 1, 37):
                c = lambda_class(gamma, n, 1, Nmax, spec)
                ok &= c.holds and c.members == classes[n * gamma - vals[n - 1]]
    return record(4, ok, f"{checks} class members over gamma in 1..3, p in 2,3,5, N <= 10^4")


# 5 --------------------------------------------------------------------------

def criterion_5():
    t0 = time.time()
    N = 10 ** 5
    rep = run_koksma(ExperimentConfig(FieldSpec.qp(5), N=N, levels=[1, 2], seed=2024, trials=20))
    dt = time.time() - t0
    l1 = [_disc(t["levels"][0]) for t in rep.body["trials"]]
    l2 = [_disc(t["levels"][1]) for t in rep.body["trials"]]
    tol2 = tolerance(5, 2, N)
    ok1 = sum(float(d) < 0.02 for d in l1)
    ok2 = sum(float(d) <= tol2 for d in l2)
    ok = ok1 >= 19 and ok2 >= 19 and dt < 60
    return record(5, ok, f"level 1 < 0.02 in {ok1}/20, level 2 <= {tol2:.4f} in {ok2}/20, "
                         f"max {float(max(l1)):.4f}/{float(max(l2)):.4f}, {dt:.1f}s (< 60s)")


# 6 --------------------------------------------------------------------------

def criterion_6():
    F2 = FieldSpec.fpt(2)
    rep = run_char_p(ExperimentConfig(F2, N=2 * 10 ** 4, levels=[2], seed=6, trials=5), hull_level=4)
    hull = s1_hull_measure(F2, 4)
    freqs = [Fraction(t["a"]["hits"], t["a"]["N"]) for t in rep.body["trials"]]
    ok = hull == Fraction(1, 4) and all(f >= Fraction(1, 2) > hull for f in freqs)
    return record(6, ok, f"hull frequency min {float(min(freqs)):.4f} >= 0.5 > hull Haar {hull} over 5 seeds")


# 7 --------------------------------------------------------------------------

def criterion_7():
    F2 = FieldSpec.fpt(2)
    rep = run_char_p(ExperimentConfig(F2, N=10 ** 5, levels=[2], seed=7, trials=20), hull_level=4)
    star = [_disc(t["c"][0]["mu_star"]) for t in rep.body["trials"]]
    haar = [_disc(t["c"][0]["haar"]) for t in rep.body["trials"]]
    good = sum(float(d) < 0.02 for d in star)
    far = all(float(d) > 0.06 for d in haar)
    return record(7, good >= 19 and far,
                  f"mu* < 0.02 in {good}/20 (max {float(max(star)):.4f}), "
                  f"Haar > 0.06 in all 20: {far} (min {float(min(haar)):.4f})")


# 8 --------------------------------------------------------------------------

def criterion_8():
    F2 = FieldSpec.fpt(2)
    ok = (mu_star_of_disk(Disk.unit_ball(F2)) == 1
          and mu_star_of_disk(Disk.from_digits(F2, [0])) == Fraction(1, 2)
          and mu_star_of_disk(Disk.from_digits(F2, [0, 1])) == Fraction(1, 8))
    nodes = 0
    for spec in (F2, FieldSpec.fpt(3)):
        for d in disk_tree(spec, 3):
            for m in (HAAR, MeasureSpec("mu_k", 1), MU_STAR):
                ok &= measure_of_disk(d, m) == sum(measure_of_disk(s, m) for s in d.sons())
            nodes += 1
    return record(8, ok, f"mu*(O)=1, mu*(tO)=1/2, mu*(D(t,1/4))=1/8; son-additivity on {nodes} disks to depth 4")


# 9 --------------------------------------------------------------------------

def criterion_9():
    t0 = time.time()
    s = PisotChabautySpec(3, 2, 1)
    a, b = diff_exponents_two_paths(s, 2, 40)
    paths = a == b == [-n for n in range(2, 41)]
    rows = limit_point_table(s, 40)
    traces = all(r.in_zero_minus_one for r in rows if r.n >= s.n0())
    T = trace_sequence(s, 40)
    traces &= all(r.trace_int_part == T[r.n] - Fraction(T[r.n].numerator % T[r.n].denominator, T[r.n].denominator)
                  for r in rows if r.n >= s.n0())
    rep = level_discrepancy(s, 200, 1)
    disc_ok = rep.discrepancy > Fraction(1, 2)
    dt = time.time() - t0
    return record(9, paths and traces and disc_ok and dt < 5,
                  f"two paths agree: {paths}; [T_n] in {{0,-1}}: {traces}; "
                  f"level-1 discrepancy {rep.discrepancy} > 1/2: {disc_ok} (counts {rep.counts}); {dt:.2f}s")


# 10 -------------------------------------------------------------------------

def criterion_10():
    c = ex.mahler()
    x, cert = ex.construct_point(c.maps, c.schedule, c.start, 64)
    xr = x.to_fraction()
    in_disk = vp((xr - Fraction(1, 2)).numerator, 2) - vp((xr - Fraction(1, 2)).denominator, 2) >= 0
    even = all(int_part_cell(xr * Fraction(3, 2) ** row.n, 2, 1) == 0 for row in cert.rows)
    survivors = ex.exhaustive_prefixes(c.maps, c.schedule, c.start, 12)
    unique = len(survivors) == 1 and list(survivors[0]) == list(x.digit_array(0, 12))
    ok = cert.passed and ex.verify_certificate(c.maps, c.schedule, x, cert) and in_disk and even and unique
    return record(10, ok, f"certificate {cert.passed}, {len(cert.rows)} rows even, "
                          f"{len(survivors)} surviving prefix at depth 12")


# 11 -------------------------------------------------------------------------

def criterion_11():
    c = ex.prop61(3, 1, 1, 6)
    x, cert = ex.construct_point(c.maps, c.schedule, c.start, 200)
    cert_ok = cert.passed and ex.verify_certificate(c.maps, c.schedule, x, cert)
    g = ex.gamma_dim(c.schedule, 10 ** 4)
    target = 1 - (1 - Fraction(1, 3)) * Fraction(1, 6)
    dim_ok = g.limit is not None and abs(g.limit - target) <= Fraction(1, 10 ** 9)
    ms, ds, dd = ex.moran_params(c.schedule, 10 ** 4, 3)
    mb = ex.moran_bounds(ms, ds, dd, base=3)
    moran_ok = mb.lower_limit == mb.upper_limit == g.limit
    return record(11, cert_ok and dim_ok and moran_ok,
                  f"certificate at precision 200: {cert_ok}; gamma_dim {g.limit} (tail min "
                  f"{float(g.tail_min):.6f}); Moran bounds [{mb.lower_limit}, {mb.upper_limit}]")


# 12 -------------------------------------------------------------------------

def criterion_12():
    a = ex.closed_form_dims("prop61", p=2, K=1, H=1, L=10)
    b = ex.closed_form_dims("prop72", q=5, z_norm=5, tau=5)
    c = ex.freq_set_dim(2, Fraction(1, 2), (Fraction(1, 2), Fraction(1, 2)))
    ok = a == Fraction(19, 20) and b == Fraction(1, 2) and c == 1
    return record(12, ok, f"prop61 = {a}, prop72 = {b}, freq_set_dim = {c}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 13)])
def test_criterion(check):
    assert check(), RESULTS[int(check.__name__.split("_")[1])]


if __name__ == "__main__":
    failed = 0
    for check in CRITERIA:
        failed += not check()
        print(RESULTS[int(check.__name__.split("_")[1])], flush=True)
    sys.exit(1 if failed else 0)
