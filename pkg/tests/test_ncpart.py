from collections import Counter
from fractions import Fraction

import pytest

from rmtlab.ncpart import (
    Partition, count_nc_by_sizes, enumerate_nc, free_cumulants_from_moments,
    is_noncrossing, kreweras, moments_from_free_cumulants, set_partitions,
)
from rmtlab.spectra import catalan


def crossing_brute(p):
    lab = p.block_of()
    m = p.m
    for a in range(1, m + 1):
        for b in range(a + 1, m + 1):
            for c in range(b + 1, m + 1):
                for d in range(c + 1, m + 1):
                    if lab[a] == lab[c] and lab[b] == lab[d] and lab[a] != lab[b]:
                        return True
    return False


def test_is_noncrossing_examples():
    assert not is_noncrossing(Partition([(1, 3), (2, 4)]))
    assert is_noncrossing(Partition([(1, 4), (2, 3)]))
    assert all(is_noncrossing(p) for p in set_partitions(3))


def test_is_noncrossing_vs_definition():
    for m in range(1, 8):
        for p in set_partitions(m):
            assert is_noncrossing(p) == (not crossing_brute(p))


def test_enumerate_small():
    assert len(enumerate_nc(3)) == 5
    assert len(enumerate_nc(4)) == 14
    assert [str(p) for p in enumerate_nc(1)] == ["{(1)}"]
    with pytest.raises(ValueError):
        enumerate_nc(15)


def test_enumeration_matches_filtered_set_partitions():
    for m in range(1, 8):
        a = set(enumerate_nc(m))
        b = {p for p in set_partitions(m) if not crossing_brute(p)}
        assert a == b


def test_count_formula_examples():
    assert count_nc_by_sizes((2, 2)) == 2
    assert count_nc_by_sizes((3,)) == 1
    nc5 = enumerate_nc(5)
    sizes = Counter(tuple(p.sizes()) for p in nc5)
    assert sum(count_nc_by_sizes(s) for s in sizes) == catalan(5) == 42


def test_partition_parse_round_trip():
    p = Partition([(3,), (1, 2)])
    assert str(p) == "{(1,2),(3)}"
    assert Partition.parse(str(p)) == p
    with pytest.raises(ValueError):
        Partition([(1, 2), (2, 3)])


def maximal_sigma_brute(p):
    """Coarsest sigma with p u sigma non-crossing on 1 < 1' < 2 < 2' ... (brute force)."""
    m = p.m
    best = None
    for s in set_partitions(m):
        blocks = [tuple(2 * i - 1 for i in b) for b in p.blocks]
        blocks += [tuple(2 * i for i in b) for b in s.blocks]
        if is_noncrossing(Partition(blocks, 2 * m)):
            if best is None or len(s) < len(best):
                best = s
    return best


def test_kreweras_examples():
    m = 5
    zero = Partition([(i,) for i in range(1, m + 1)])
    one = Partition([tuple(range(1, m + 1))])
    assert kreweras(zero) == one
    assert kreweras(one) == zero
    assert kreweras(Partition.parse("{(1,2),(3)}")) == Partition.parse("{(1),(2,3)}")


def test_kreweras_vs_brute_force():
    for m in range(1, 7):
        for p in enumerate_nc(m):
            k = kreweras(p)
            assert len(p) + len(k) == m + 1
            assert k == maximal_sigma_brute(p)


def test_moment_cumulant():
    kappa = [0, 1] + [0] * 8
    assert moments_from_free_cumulants(kappa) == [0, 1, 0, 2, 0, 5, 0, 14, 0, 42]
    assert moments_from_free_cumulants([Fraction(3), 0, 0, 0]) == [3, 9, 27, 81]
    beta = Fraction(1, 2)
    m = moments_from_free_cumulants([beta] * 4)
    assert m[0] == beta and m[1] == beta + beta ** 2


def test_moment_cumulant_vs_enumeration():
    kappa = [Fraction(k * k - 3, k + 1) for k in range(1, 8)]
    fast = moments_from_free_cumulants(kappa)
    for n in range(1, 8):
        slow = 0
        for p in enumerate_nc(n):
            t = Fraction(1)
            for b in p.blocks:
                t *= kappa[len(b) - 1]
            slow += t
        assert slow == fast[n - 1]


def test_round_trip_exact():
    m = [Fraction(1, k + 2) for k in range(10)]
    assert moments_from_free_cumulants(free_cumulants_from_moments(m)) == m
