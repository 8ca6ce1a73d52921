from fractions import Fraction

import numpy as np
import pytest

from nak.disk import Disk
from nak.errors import InvalidConfiguration, TooLarge, UnsupportedMeasure
from nak.field import FieldSpec, LocalFieldElement, from_fraction, from_int
from nak.measures import (HAAR, MU_STAR, FrequencyReport, MeasureSpec, Membership, cell_index,
                          cell_measures, decorrelation_grid, discrepancy, disk_tree,
                          empirical_frequencies, enumerate_quotient, haar_of_disk, hull_cells, in_S_k,
                          measure_of_disk, mu_k_of_disk, mu_star_of_disk, oracle_decorrelation,
                          oracle_haar_invariance, s1_hull_measure, sample_mu_star)
from nak.scaling import ScalingMapSpec

from oracles import mu_k_bruteforce, mu_star_partial

Q5 = FieldSpec.qp(5)
F2, F3 = FieldSpec.fpt(2), FieldSpec.fpt(3)


def _disk(spec, digits):
    return Disk.from_digits(spec, digits)


def test_haar_values():
    assert haar_of_disk(Disk.unit_ball(Q5)) == 1
    assert haar_of_disk(_disk(Q5, [1, 2, 3])) == Fraction(1, 125)


def test_in_S_k():
    x = LocalFieldElement.from_digits(F2, 0, [1, 0, 1], 3)
    assert in_S_k(x, 1) is Membership.YES
    assert in_S_k(x, 2) is Membership.NO
    assert in_S_k(F2.zero(6), 3) is Membership.YES
    assert in_S_k(x, 1, level=5) is Membership.UNKNOWN
    with pytest.raises(UnsupportedMeasure):
        in_S_k(from_int(1, Q5, 3), 1)


def test_mu_k_examples():
    assert mu_k_of_disk(_disk(F2, [0]), 1) == Fraction(1, 2)
    assert mu_k_of_disk(_disk(F2, [0, 1]), 1) == 0
    assert mu_k_of_disk(Disk.unit_ball(F2), 1) == 1
    with pytest.raises(UnsupportedMeasure):
        mu_k_of_disk(Disk.unit_ball(Q5), 1)


def test_mu_star_examples():
    assert mu_star_of_disk(Disk.unit_ball(F2)) == 1
    assert mu_star_of_disk(_disk(F2, [0])) == Fraction(1, 2)
    assert mu_star_of_disk(_disk(F2, [0, 1])) == Fraction(1, 8)


@pytest.mark.parametrize("spec,depth", [(F2, 4), (F3, 3)])
def test_mu_k_and_mu_star_against_bruteforce(spec, depth):
    p = spec.p
    for d in disk_tree(spec, depth):
        prefix = d.prefix_digits(0).tolist()
        for k in (1, 2):
            assert mu_k_of_disk(d, k) == mu_k_bruteforce(prefix, k, p)
        approx, tail = mu_star_partial(prefix, p, 12)
        exact = mu_star_of_disk(d)
        assert 0 <= exact - approx <= tail


@pytest.mark.parametrize("spec", [Q5, F2, F3])
def test_son_additivity_depth_4(spec):
    measures = [HAAR] if not spec.char_p else [HAAR, MeasureSpec("mu_k", 1), MeasureSpec("mu_k", 2), MU_STAR]
    depth = 4 if spec.p < 5 else 3
    for d in disk_tree(spec, depth - 1):
        for m in measures:
            assert measure_of_disk(d, m) == sum(measure_of_disk(s, m) for s in d.sons())
    if spec.char_p:
        assert measure_of_disk(Disk.unit_ball(spec), MU_STAR) == 1
        assert measure_of_disk(Disk.unit_ball(spec), MeasureSpec("mu_k", 3)) == 1


@pytest.mark.parametrize("spec", [F2, F3])
def test_mu_star_dominates(spec):
    p = spec.p
    for d in disk_tree(spec, 4):
        assert mu_star_of_disk(d) >= (1 - Fraction(1, p)) * haar_of_disk(d)


def test_cell_measures_sum_to_one():
    for spec, m in ((F2, 6), (F3, 4)):
        for meas in (HAAR, MeasureSpec("mu_k", 1), MU_STAR):
            assert sum(cell_measures(spec, m, meas)) == 1


def test_hull():
    assert s1_hull_measure(F2, 4) == Fraction(1, 4)
    cells = hull_cells(F2, 4)
    assert len(cells) == 4 and all(c & 0b1010 == 0 for c in cells)


def test_empirical_frequencies():
    cells = enumerate_quotient(2, Q5)
    assert discrepancy(cells, 2) == 0
    const = [from_int(7, Q5, 4)] * 30
    assert discrepancy(const, 2) == 1 - Fraction(1, 25)
    rep = empirical_frequencies(cells, 1)
    assert rep.counts == [5] * 5
    back = FrequencyReport.from_json(rep.to_json())
    assert back.counts == rep.counts and back.discrepancy == rep.discrepancy
    assert len(rep.to_csv().strip().splitlines()) == 6


def test_hull_frequency_lower_bound():
    """For p | n, [x^n] lies in the hull of S~_1, so the level-2 discrepancy against Haar is at
    least 1/p - Haar(hull) on the first 2p terms."""
    rng = np.random.default_rng(5)
    for spec in (F2, F3):
        p = spec.p
        for _ in range(5):
            ds = [int(rng.integers(1, p))] + rng.integers(0, p, 30).tolist()
            x = LocalFieldElement.from_digits(spec, -1, ds, 30)
            seq = [(x ** n).integral_part() for n in range(1, 2 * p + 1)]
            rep = empirical_frequencies(seq, 2)
            hull = set(hull_cells(spec, 2))
            hits = sum(c for i, c in enumerate(rep.counts) if i in hull)
            assert Fraction(hits, rep.N) >= Fraction(1, p)
            assert rep.discrepancy >= Fraction(1, p) - s1_hull_measure(spec, 2)


def test_enumerate_quotient():
    assert len(enumerate_quotient(1, Q5)) == 5
    assert len(enumerate_quotient(0, Q5)) == 1
    assert len(enumerate_quotient(4, Q5)) == 625
    keys = {cell_index(x, 4) for x in enumerate_quotient(4, F3)}
    assert keys == set(range(81))
    with pytest.raises(TooLarge):
        enumerate_quotient(11, Q5)


def test_haar_invariance_examples():
    O = Disk.unit_ball(Q5)
    r = oracle_haar_invariance(ScalingMapSpec.affine(1, 0, O), 3, 2)
    assert r.passed
    r = oracle_haar_invariance(ScalingMapSpec.affine(Fraction(1, 5), 0, O), 4, 2)
    assert r.passed and set(r.details["counts"]) == {25}
    r = oracle_haar_invariance(ScalingMapSpec.affine(2, 3, O), 3, 2)
    assert r.passed and set(r.details["counts"]) == {5}
    with pytest.raises(InvalidConfiguration):
        oracle_haar_invariance(ScalingMapSpec.affine(Fraction(1, 5), 0, O), 2, 2)
    with pytest.raises(InvalidConfiguration):
        oracle_haar_invariance(ScalingMapSpec.affine(5, 0, O), 3, 2)


def test_decorrelation_examples():
    O = Disk.unit_ball(Q5)
    f = ScalingMapSpec.affine(Fraction(1, 25), 0, O)
    g = ScalingMapSpec.affine(1, 0, O)
    h = ScalingMapSpec.affine(Fraction(1, 5), 0, O)
    r = oracle_decorrelation(f, g, _disk(Q5, [3, 1]), 4)
    assert r.passed and r.details["measure"]["den"] == 625
    r = oracle_decorrelation(f, h, _disk(Q5, [2]), 3)
    assert r.passed and r.details["measure"] == {"num": 1, "den": 25, "decimal": 0.04}
    assert oracle_decorrelation(f, g, O).passed
    with pytest.raises(InvalidConfiguration):
        oracle_decorrelation(g, f, O)
    with pytest.raises(InvalidConfiguration):
        oracle_decorrelation(f, h, _disk(Q5, [1, 1]))
    assert decorrelation_grid(f, g).passed


def test_mu_star_sampling():
    N = 10 ** 5
    xs = sample_mu_star(F2, 7, 4, N)
    counts = np.bincount([cell_index(x, 4) for x in xs], minlength=16)
    for i, mu in enumerate(cell_measures(F2, 4, MU_STAR)):
        assert abs(counts[i] / N - float(mu)) <= 4 * (float(mu) / N) ** 0.5
