"""Distribution algebra: construction, monad laws, distances, JSON."""

import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from randml.dist import (
    Dist, ProbError, as_prob, canon_key, tv_distance, uniform, uniform_lists,
)

F = Fraction


def weights(outcomes=range(4), max_den=6):
    """Strategy for subdistributions over small integer outcomes."""
    return st.lists(
        st.tuples(st.sampled_from(list(outcomes)),
                  st.integers(0, max_den)),
        max_size=6,
    ).map(lambda ps: _normalize(ps, max_den))


def _normalize(ps, max_den):
    d = {}
    for a, k in ps:
        d[a] = d.get(a, 0) + k
    total = sum(d.values())
    den = max(total, max_den)
    return Dist({a: F(k, den) for a, k in d.items()})


class TestConstruction:
    def test_zero_weights_dropped(self):
        assert Dist({0: F(1, 2), 1: F(0)}) == Dist({0: F(1, 2)})

    def test_duplicates_merge(self):
        d = Dist([(0, F(1, 4)), (0, F(1, 4))])
        assert d(0) == F(1, 2)

    def test_negative_weight_rejected(self):
        with pytest.raises(ProbError):
            Dist({0: F(-1, 2)})

    def test_mass_above_one_rejected(self):
        with pytest.raises(ProbError):
            Dist({0: F(3, 4), 1: F(1, 2)})

    def test_as_prob(self):
        assert as_prob("1/3") == F(1, 3)
        with pytest.raises(ProbError):
            as_prob(F(3, 2))
        with pytest.raises(ProbError):
            as_prob(-1)
        assert as_prob(F(3, 2), upper=False) == F(3, 2)

    def test_support_sorted_and_deterministic(self):
        d = Dist({(1, 0): F(1, 4), (0, 1): F(1, 4), 3: F(1, 4)})
        assert d.support() == [3, (0, 1), (1, 0)]

    def test_canon_key_separates_bool_from_int(self):
        assert canon_key(True) != canon_key(1)


class TestMonad:
    @given(st.integers(0, 9))
    def test_left_identity(self, a):
        f = lambda x: uniform(x + 1)
        assert Dist.ret(a).bind(f) == f(a)

    @given(weights())
    def test_right_identity(self, d):
        assert d.bind(Dist.ret) == d

    @given(weights())
    def test_associativity(self, d):
        f = lambda x: uniform(x + 1)
        g = lambda x: Dist.ret(x * 2)
        assert d.bind(f).bind(g) == d.bind(lambda x: f(x).bind(g))

    @given(weights())
    def test_map_is_bind_ret(self, d):
        f = lambda x: x % 2
        assert d.map(f) == d.bind(lambda x: Dist.ret(f(x)))

    @given(weights())
    def test_bind_preserves_mass_with_total_continuation(self, d):
        assert d.bind(lambda x: uniform(3)).mass() == d.mass()

    def test_empty(self):
        assert Dist.empty().mass() == 0
        assert Dist.empty().bind(lambda x: uniform(2)) == Dist.empty()


class TestOperations:
    def test_uniform(self):
        d = uniform(4)
        assert d.mass() == 1
        assert all(d(k) == F(1, 4) for k in range(4))
        with pytest.raises(ValueError):
            uniform(0)

    def test_uniform_lists(self):
        d = uniform_lists(2, 3)
        assert d.mass() == 1
        assert len(d) == 8
        assert d((1, 0, 1)) == F(1, 8)
        assert uniform_lists(3, 0) == Dist.ret(())

    def test_restrict_scale_add(self):
        d = uniform(4)
        ev = d.restrict(lambda k: k % 2 == 0)
        assert ev.mass() == F(1, 2)
        assert ev.add(d.restrict(lambda k: k % 2 == 1)) == d
        assert d.scale(F(1, 2)).mass() == F(1, 2)

    def test_expect_and_prob_of(self):
        d = uniform(4)
        assert d.expect(lambda k: F(k, 3)) == F(1, 2)
        assert d.prob_of(lambda k: k >= 2) == F(1, 2)
        with pytest.raises(ProbError):
            d.expect(lambda k: F(k))  # values above 1 at k >= 2


def tv_by_subsets(d1, d2):
    """Independent oracle: sup over events of |mu1(S) - mu2(S)|."""
    outcomes = sorted(set(d1.support()) | set(d2.support()), key=canon_key)
    best = F(0)
    for r in range(len(outcomes) + 1):
        for s in itertools.combinations(outcomes, r):
            gap = abs(sum((d1(a) for a in s), F(0))
                      - sum((d2(a) for a in s), F(0)))
            best = max(best, gap)
    return best


class TestTvDistance:
    def test_known_values(self):
        assert tv_distance(uniform(2), uniform(2)) == 0
        assert tv_distance(uniform(2), uniform(4)) == F(1, 2)
        assert tv_distance(Dist.ret(0), Dist.empty()) == 1

    @given(weights(), weights())
    def test_matches_subset_oracle(self, d1, d2):
        assert tv_distance(d1, d2) == tv_by_subsets(d1, d2)

    @given(weights(), weights())
    def test_symmetry_and_bounds(self, d1, d2):
        tv = tv_distance(d1, d2)
        assert tv == tv_distance(d2, d1)
        assert 0 <= tv <= 1

    @given(weights(), weights(), weights())
    def test_triangle_inequality(self, d1, d2, d3):
        assert (tv_distance(d1, d3)
                <= tv_distance(d1, d2) + tv_distance(d2, d3))


class TestJson:
    def test_shape_and_order(self):
        out = uniform(2).to_json()
        assert out == [
            {"outcome": 0, "num": "1", "den": "2"},
            {"outcome": 1, "num": "1", "den": "2"},
        ]

    def test_custom_encoder(self):
        d = Dist({(1, 2): F(1, 2)})
        out = d.to_json(lambda t: list(t))
        assert out[0]["outcome"] == [1, 2]
