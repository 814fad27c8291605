import pytest

from mwhittaker.schur import (
    Partition,
    cauchy_littlewood_check,
    complete_homogeneous,
    geometric_tail_bound,
    partitions,
    pieri_check,
    schur_poly,
)


def test_partitions_and_schur_values():
    assert len(list(partitions(5))) == 7
    assert Partition((2, 1, 0)) == (2, 1)
    with pytest.raises(ValueError):
        Partition((1, 2))
    # s_(2,1)(x1, x2) = x1^2 x2 + x1 x2^2
    assert schur_poly((2, 1), (2.0, 3.0)) == pytest.approx(30.0)
    assert schur_poly((), (0.0, 0.0)) == 1.0
    assert schur_poly((1,), (0.0, 0.0)) == 0.0
    assert complete_homogeneous(2, [1.0, 2.0]) == pytest.approx(7.0)


def test_tail_bound_is_an_upper_bound():
    t = [0.5, 0.3]
    tail = sum(complete_homogeneous(k, t) for k in range(11, 200))
    assert tail <= geometric_tail_bound(t, 10)
    assert geometric_tail_bound([0.0], 3) == 0.0


def test_pieri_examples():
    r = pieri_check((), [0.5], 40)
    assert r.rhs == pytest.approx(2.0) and r.ok
    assert pieri_check((1,), [0.3, 0.2], 25).ok
    r = pieri_check((1,), [0.0, 0.0])
    assert r.lhs == 0.0 and r.rhs == 0.0


def test_cauchy_littlewood():
    r = cauchy_littlewood_check([0.3, 0.1], [0.2], 40)
    assert abs(r.lhs - r.rhs) < 1e-10
    with pytest.raises(ValueError):
        cauchy_littlewood_check([2.0], [0.6])
