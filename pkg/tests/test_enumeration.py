import json
import math
from pathlib import Path

import numpy as np
import pytest

from latticecount.cartan import DomainSpec
from latticecount.enumeration import (
    EnumerationTask,
    _count_block_py,
    _blocks,
    brute_force_norm_ball,
    congruence_count,
    count_norm_ball,
    coset_counts,
    enumerate_domain,
    enumerate_norm_ball,
    enumerate_sl3_ball,
    iter_norm_ball,
    singular_count,
)
from latticecount.errors import LatticeCountError
from latticecount.exact import CongruenceSpec, group_order_mod

GOLDEN = json.loads((Path(__file__).parent / "golden" / "golden.json").read_text())


def as_set(arr):
    return {tuple(r) for r in np.asarray(arr).tolist()}


def test_small_examples():
    assert count_norm_ball(2) == 4
    assert as_set(enumerate_norm_ball(2, "list")) == {(1, 0, 0, 1), (-1, 0, 0, -1), (0, 1, -1, 0), (0, -1, 1, 0)}
    assert count_norm_ball(3) == GOLDEN["sl2_norm_ball"]["3"] == 20


@pytest.mark.parametrize("R", sorted(int(k) for k in GOLDEN["sl2_norm_ball"]))
def test_against_golden(R):
    assert count_norm_ball(R) == GOLDEN["sl2_norm_ball"][str(R)]


@pytest.mark.parametrize("R", [2, 3, 17, 50, 150])
def test_list_equals_brute_force_set(R):
    fast = enumerate_norm_ball(R, "list")
    assert len(fast) == len(as_set(fast))
    assert as_set(fast) == as_set(brute_force_norm_ball(R))


@pytest.mark.parametrize("R", [10**3, 10**4, 10**5, 10**6])
def test_count_only_equals_list_length(R):
    assert count_norm_ball(R) == sum(len(c) for c in iter_norm_ball(R))


def test_listed_points_are_valid():
    pts = enumerate_norm_ball(5000, "list")
    a, b, c, d = pts.T
    assert np.all(a * d - b * c == 1)
    assert np.all(a * a + b * b + c * c + d * d <= 5000)


def test_python_path_matches_numba():
    R = 20000
    assert sum(_count_block_py(R, *b) for b in _blocks(R)) == count_norm_ball(R)


def test_overflow_guard():
    with pytest.raises(OverflowError):
        count_norm_ball(2**60 + 1)


def test_monotone_and_divisible_by_four():
    counts = [count_norm_ball(R) for R in range(2, 400)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert all(c % 4 == 0 for c in counts)


def test_inverse_and_negation_symmetry():
    s = as_set(enumerate_norm_ball(300, "list"))
    assert {(d, -b, -c, a) for a, b, c, d in s} == s
    assert {(-a, -b, -c, -d) for a, b, c, d in s} == s


@pytest.mark.parametrize("workers", [1, 4, 16])
def test_parallel_determinism(workers):
    R = 2 * 10**5
    assert count_norm_ball(R, workers) == count_norm_ball(R, 1)
    ref = np.concatenate(list(iter_norm_ball(R, 1)))
    assert np.array_equal(np.concatenate(list(iter_norm_ball(R, workers))), ref)


def test_hyperbolic_ball_reduction():
    rec = enumerate_domain(EnumerationTask(DomainSpec.hyperbolic_ball(math.acosh(1.5))))
    assert rec.count == count_norm_ball(3) == 20


def test_full_sector_equals_ball():
    t = 6.0
    ball = enumerate_domain(EnumerationTask(DomainSpec.hyperbolic_ball(t)))
    sector = enumerate_domain(EnumerationTask(DomainSpec.sector(t, (0.0, 2 * math.pi))))
    assert sector.count == ball.count


def test_bisector_tiling_additivity():
    t, delta = 6.0, 1e-6
    ball = enumerate_domain(EnumerationTask(DomainSpec.hyperbolic_ball(t, delta)))
    total, singular = 0, None
    for i in range(4):
        for j in range(8):
            dom = DomainSpec.bisector(t, (i * math.pi / 4, (i + 1) * math.pi / 4),
                                      (j * math.pi / 4, (j + 1) * math.pi / 4), delta)
            rec = enumerate_domain(EnumerationTask(dom))
            total += rec.count
            singular = rec.singular_count
    assert total + singular == ball.count
    assert singular == 4 == ball.singular_count


def test_histogram_matches_individual_bisectors():
    t = 5.0
    rec = enumerate_domain(EnumerationTask(DomainSpec.hyperbolic_ball(t, 1e-6), bins=(4, 8)))
    assert rec.histogram.sum() + rec.singular_count == rec.count
    dom = DomainSpec.bisector(t, (math.pi / 4, math.pi / 2), (math.pi / 2, 3 * math.pi / 4), 1e-6)
    assert enumerate_domain(EnumerationTask(dom)).count == rec.histogram[1, 2]


def test_sector_partition_additivity():
    t = 7.0
    cuts = [0.0, 0.4, 1.9, 3.3, 2 * math.pi]
    parts = [enumerate_domain(EnumerationTask(DomainSpec.sector(t, (a, b), 1e-6))) for a, b in zip(cuts, cuts[1:])]
    ball = enumerate_domain(EnumerationTask(DomainSpec.hyperbolic_ball(t, 1e-6)))
    assert sum(p.count for p in parts) + parts[0].singular_count == ball.count


def test_singular_count_exact():
    assert singular_count(10**4, 0.5) == 4
    assert singular_count(10**4, 0.0) == 0
    assert singular_count(10**4, 1.0) == count_norm_ball(3)


def test_record_fields():
    rec = enumerate_domain(EnumerationTask(DomainSpec.norm_ball(100.0)))
    assert rec.volume == pytest.approx(math.pi * (10**4 - 2))
    assert rec.covolume == pytest.approx(math.pi / 6)
    assert rec.relative_error == pytest.approx(rec.count * rec.covolume / rec.volume - 1)
    assert 0 <= rec.singular_count <= rec.count


def test_congruence_level_one_is_plain():
    dom = DomainSpec.norm_ball(30.0)
    a = congruence_count(EnumerationTask(dom, CongruenceSpec(1)))
    b = enumerate_domain(EnumerationTask(dom))
    assert a.count == b.count


def test_congruence_example_level_two():
    rec = congruence_count(EnumerationTask(DomainSpec.norm_ball(math.sqrt(3)), CongruenceSpec(2)))
    assert rec.count == 2
    assert rec.covolume == pytest.approx(6 * math.pi / 6)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_coset_counts_against_golden(N):
    golden = {tuple(int(x) for x in k.split(",")): v for k, v in GOLDEN["sl2_cosets_R60"][str(N)].items()}
    assert coset_counts(60, N) == golden


@pytest.mark.parametrize("N", [2, 3, 5])
def test_coset_partition(N):
    R = 5000
    cc = coset_counts(R, N)
    assert sum(cc.values()) == count_norm_ball(R)
    assert len(cc) == group_order_mod(N)
    some = next(iter(cc))
    rec = congruence_count(EnumerationTask(DomainSpec.norm_ball(math.sqrt(R)), CongruenceSpec(N, some)))
    assert rec.count == cc[some]


@pytest.mark.parametrize("R", sorted(int(k) for k in GOLDEN["sl3_norm_ball"]))
def test_sl3_against_golden(R):
    assert enumerate_sl3_ball(R) == GOLDEN["sl3_norm_ball"][str(R)]


def test_sl3_examples():
    assert enumerate_sl3_ball(3) == 24
    assert enumerate_sl3_ball(2) == 0


@pytest.mark.parametrize("R", [10, 25, 40])
def test_sl3_two_traversals(R):
    assert enumerate_sl3_ball(R, "rows") == enumerate_sl3_ball(R, "reversed")


def test_sl3_cap():
    with pytest.raises(LatticeCountError):
        enumerate_sl3_ball(201)
