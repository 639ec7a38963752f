import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jsdm.angular import (
    AngularInterval,
    AngularSet,
    angular_bin,
    bin_index,
    difference,
    intersect,
    is_effectively_empty,
    measure,
    union,
)

# Sets used by the two-user selection walkthrough.
W1 = AngularSet([(-0.1, 0.1), (0.2, 0.25)])
W2 = AngularSet([(-0.1, 0.1), (-0.4, -0.3)])


def sets(*pairs):
    return AngularSet(pairs)


class TestConstruction:
    def test_degenerate_interval_rejected(self):
        with pytest.raises(ValueError):
            AngularInterval(0.1, 0.1)

    def test_canonical_merge_of_abutting(self):
        s = sets((-0.2, 0.0), (0.0, 0.1))
        assert s.pieces == ((-0.2, 0.1),)

    def test_wrapped_interval_splits(self):
        s = AngularSet.from_interval(0.4, -0.3)
        assert s.pieces == ((-0.5, -0.3), (0.4, 0.5))
        assert s.measure == pytest.approx(0.3)

    def test_canonicalization_idempotent(self):
        s = sets((0.3, 0.5), (-0.5, -0.45), (0.1, 0.2))
        assert AngularSet(s.pieces) == s

    def test_out_of_domain_endpoints_wrap(self):
        got = AngularSet.from_interval(0.6, 0.7)
        assert got.approx_equal(AngularSet.from_interval(-0.4, -0.3), 1e-12)


class TestUnion:
    def test_identity(self):
        assert union(AngularSet.empty(), W1) == W1

    def test_overlapping_merge(self):
        got = union(sets((-0.1, 0.1)), sets((0.05, 0.2)))
        assert got == sets((-0.1, 0.2))

    def test_wrapped_union_against_membership_oracle(self):
        a = AngularSet.from_interval(0.4, -0.45)
        b = sets((-0.48, -0.3))
        got = union(a, b)
        # Independent oracle: pointwise OR of the indicator functions.
        xs = np.linspace(-0.5, 0.5, 10_000, endpoint=False)
        for x in xs:
            assert got.contains(x) == (a.contains(x) or b.contains(x))
        assert got == AngularSet.from_interval(0.4, -0.3)


class TestIntersect:
    def test_two_user_example(self):
        assert intersect(W1, W2) == sets((-0.1, 0.1))

    def test_with_empty(self):
        assert intersect(W1, AngularSet.empty()).is_empty

    def test_idempotent(self):
        assert intersect(W1, W1) == W1


class TestDifference:
    def test_two_user_example(self):
        assert difference(W1, sets((-0.1, 0.1))) == sets((0.2, 0.25))

    def test_minus_empty(self):
        assert difference(W2, AngularSet.empty()) == W2

    def test_self(self):
        assert difference(W2, W2).is_empty


class TestMeasure:
    def test_empty(self):
        assert measure(AngularSet.empty()) == 0.0

    def test_plain_interval(self):
        assert measure(sets((-0.1, 0.1))) == pytest.approx(0.2)

    def test_wrapped_complement_symmetry(self):
        assert measure(AngularSet.from_interval(0.45, -0.45)) == pytest.approx(0.1)

    def test_full_circle(self):
        assert AngularSet.full().measure == pytest.approx(1.0)


class TestBins:
    def test_bin_zero_straddles_wrap(self):
        b = AngularSet([angular_bin(0, 4)])
        assert b.pieces == ((-0.5, -0.375), (0.375, 0.5))

    def test_center_bin(self):
        b = angular_bin(2, 4)
        assert (b.lo, b.hi) == (-0.125, 0.125)

    def test_plain_bin(self):
        b = angular_bin(3, 4)
        assert (b.lo, b.hi) == (0.125, 0.375)

    def test_bins_partition_circle(self):
        m = 7
        total = AngularSet(angular_bin(i, m) for i in range(m))
        assert total == AngularSet.full()

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            angular_bin(4, 4)

    def test_bin_index_round_trip(self):
        m = 50
        for i in range(m):
            center = i / m - 0.5
            assert bin_index(center, m) == i
            assert AngularSet([angular_bin(i, m)]).contains(center)


class TestEffectivelyEmpty:
    def test_zero_epsilon_never_triggers(self):
        assert is_effectively_empty(AngularSet.empty(), 0.0) is False

    def test_below_threshold(self):
        assert is_effectively_empty(sets((0.0, 0.01)), 0.05) is True

    def test_above_threshold(self):
        assert is_effectively_empty(sets((0.0, 0.1)), 0.05) is False


# ---------------------------------------------------------------------------
# Algebra laws, property tested over random sets (including wrapped ones).
# ---------------------------------------------------------------------------

_freqs = st.floats(min_value=-0.5, max_value=0.4999, allow_nan=False)
_pairs = st.tuples(_freqs, _freqs).filter(lambda p: abs(p[0] - p[1]) > 1e-6)
_sets = st.lists(_pairs, min_size=0, max_size=4).map(AngularSet)

TOL = 1e-9


@settings(max_examples=200)
@given(_sets, _sets)
def test_union_commutes(a, b):
    assert union(a, b) == union(b, a)


@settings(max_examples=200)
@given(_sets, _sets, _sets)
def test_union_associates(a, b, c):
    assert union(union(a, b), c).approx_equal(union(a, union(b, c)), TOL)


@settings(max_examples=200)
@given(_sets, _sets)
def test_intersect_commutes(a, b):
    assert intersect(a, b) == intersect(b, a)


@settings(max_examples=200)
@given(_sets, _sets, _sets)
def test_intersect_associates(a, b, c):
    assert intersect(intersect(a, b), c).approx_equal(intersect(a, intersect(b, c)), TOL)


@settings(max_examples=200)
@given(_sets, _sets)
def test_de_morgan(a, b):
    assert union(a, b).complement().approx_equal(
        intersect(a.complement(), b.complement()), TOL
    )


@settings(max_examples=200)
@given(_sets, _sets)
def test_difference_is_intersection_with_complement(a, b):
    assert difference(a, b) == intersect(a, b.complement())


@settings(max_examples=200)
@given(_sets, _sets)
def test_measure_splits_across_partition(a, b):
    # a is the disjoint union of (a & b) and (a \ b)
    assert intersect(a, b).measure + difference(a, b).measure == pytest.approx(
        a.measure, abs=TOL
    )


@settings(max_examples=200)
@given(_sets, _sets)
def test_measure_monotone_and_bounded(a, b):
    assert 0.0 <= intersect(a, b).measure <= min(a.measure, b.measure) + TOL
    assert union(a, b).measure <= min(1.0, a.measure + b.measure) + TOL


@settings(max_examples=200)
@given(_sets)
def test_union_with_empty_is_identity(a):
    assert union(a, AngularSet.empty()) == a


@settings(max_examples=100)
@given(_sets, _sets, _freqs)
def test_translation_commutes_with_operations(a, b, delta):
    ta, tb = a.translate(delta), b.translate(delta)
    assert ta.measure == pytest.approx(a.measure, abs=TOL)
    assert union(ta, tb).approx_equal(union(a, b).translate(delta), TOL)
    assert intersect(ta, tb).approx_equal(intersect(a, b).translate(delta), TOL)
    assert difference(ta, tb).approx_equal(difference(a, b).translate(delta), TOL)
