"""Approximate coupling decisions and the composition lemma checkers."""

import json
import random
from fractions import Fraction
from pathlib import Path

import pytest

from randml.coupling import (
    BindInstance, CouplingQuery, CouplingVerdict, ExpInstance,
    FiniteRelation, InvalidInstance, SupportTooLarge, arcoupl_check,
    check_bind_composition, check_eq_elim, check_exp_composition,
    check_limit, enum_limit, max_violation, query_from_json, query_to_json,
    random_dual_value, verdict_to_json,
)
from randml.dist import Dist, tv_distance, uniform

from conftest import random_subdist

F = Fraction
SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"


def random_relation(rng, left, right, density=0.5):
    return FiniteRelation(
        (a, b) for a in left for b in right if rng.random() < density
    )


class TestFiniteRelation:
    def test_image_and_converse(self):
        r = FiniteRelation([(0, "a"), (0, "b"), (1, "b")])
        assert r.image([0]) == {"a", "b"}
        assert r.image([1]) == {"b"}
        assert r.converse().image(["b"]) == {0, 1}
        assert (0, "a") in r and ("a", 0) not in r

    def test_constructors_agree(self):
        eq = FiniteRelation.equality(range(3))
        assert eq == FiniteRelation.graph({k: k for k in range(3)})
        assert eq == FiniteRelation.from_predicate(
            range(3), range(3), lambda a, b: a == b
        )


class TestMaxViolation:
    def test_identity_coupling_is_free(self):
        mv, _ = max_violation(uniform(4), uniform(4),
                              FiniteRelation.equality(range(4)))
        assert mv == 0

    def test_empty_relation_costs_full_mass(self):
        mv, witness = max_violation(uniform(2), uniform(2),
                                    FiniteRelation([]))
        assert mv == 1 and set(witness) == {0, 1}

    def test_injection_into_larger_space(self):
        # uniform over 0..n-1 vs 0..m-1 along an injection: (m-n)/m
        for n, m in [(2, 4), (3, 5), (1, 6)]:
            rel = FiniteRelation.graph({k: k for k in range(n)})
            mv, _ = max_violation(uniform(n), uniform(m), rel)
            assert mv == F(m - n, m)

    def test_full_relation_compares_masses(self):
        full = FiniteRelation.from_predicate(range(3), range(3),
                                             lambda a, b: True)
        mv, _ = max_violation(uniform(3), uniform(3).scale(F(1, 2)), full)
        assert mv == F(1, 2)

    def test_support_budget(self):
        big = Dist({k: F(1, 30) for k in range(30)})
        with pytest.raises(SupportTooLarge):
            max_violation(big, big, FiniteRelation.equality(range(30)))
        # an explicit limit overrides the default in both directions
        small = uniform(5)
        with pytest.raises(SupportTooLarge):
            max_violation(small, small, FiniteRelation.equality(range(5)),
                          limit=3)
        mv, _ = max_violation(small, small, FiniteRelation.equality(range(5)),
                              limit=5)
        assert mv == 0

    def test_enum_limit_env(self, monkeypatch):
        monkeypatch.setenv("RANDML_ENUM_LIMIT", "3")
        assert enum_limit() == 3
        with pytest.raises(SupportTooLarge):
            max_violation(uniform(4), uniform(4),
                          FiniteRelation.equality(range(4)))

    def test_witness_attains_value(self, rng):
        for _ in range(50):
            mu1 = random_subdist(rng, range(5))
            mu2 = random_subdist(rng, range(5))
            rel = random_relation(rng, range(5), range(5))
            mv, witness = max_violation(mu1, mu2, rel)
            got = (sum((mu1(a) for a in witness), F(0))
                   - sum((mu2(b) for b in rel.image(witness)), F(0)))
            assert got == mv

    def test_monotone_in_relation(self, rng):
        # adding pairs can only shrink the violation
        for _ in range(30):
            mu1 = random_subdist(rng, range(4))
            mu2 = random_subdist(rng, range(4))
            rel = random_relation(rng, range(4), range(4), density=0.3)
            bigger = FiniteRelation(
                set(rel.pairs) | set(random_relation(
                    rng, range(4), range(4), density=0.3).pairs)
            )
            assert (max_violation(mu1, mu2, bigger)[0]
                    <= max_violation(mu1, mu2, rel)[0])

    def test_tv_via_equality_coupling(self, rng):
        # TV is the larger one-sided violation along equality
        for _ in range(30):
            mu1 = random_subdist(rng, range(4))
            mu2 = random_subdist(rng, range(4))
            rel = FiniteRelation.equality(range(4))
            lhs = max_violation(mu1, mu2, rel)[0]
            rhs = max_violation(mu2, mu1, rel)[0]
            assert max(lhs, rhs) == tv_distance(mu1, mu2)


class TestArcouplCheck:
    def test_verdict_threshold(self):
        rel = FiniteRelation.graph({0: 0, 1: 1})
        q_ok = CouplingQuery(uniform(2), uniform(4), F(1, 2), rel)
        q_bad = CouplingQuery(uniform(2), uniform(4),
                              F(1, 2) - F(1, 10**6), rel)
        assert arcoupl_check(q_ok).holds
        v = arcoupl_check(q_bad)
        assert not v.holds and v.max_violation == F(1, 2)

    def test_epsilon_must_be_probability(self):
        from randml.dist import ProbError

        q = CouplingQuery(uniform(2), uniform(2), F(3, 2),
                          FiniteRelation.equality(range(2)))
        with pytest.raises(ProbError):
            arcoupl_check(q)


class TestRandomDual:
    def test_never_exceeds_exact_optimum(self, rng):
        for _ in range(200):
            mu1 = random_subdist(rng, range(4))
            mu2 = random_subdist(rng, range(4))
            rel = random_relation(rng, range(4), range(4))
            mv, _ = max_violation(mu1, mu2, rel)
            assert random_dual_value(mu1, mu2, rel, rng) <= mv

    def test_indicator_duals_reach_optimum(self, rng):
        # the optimum is attained by a 0/1 test, so scanning indicator
        # vectors of the witness reproduces max_violation
        mu1 = uniform(3)
        mu2 = uniform(5)
        rel = FiniteRelation.graph({0: 0, 1: 1, 2: 2})
        mv, witness = max_violation(mu1, mu2, rel)

        class IndicatorRng:
            def __init__(self, s):
                self.s = set(s)
                self.seq = iter(sorted(self.s) + sorted(set(range(3))
                                                        - self.s))

            def randrange(self, lo, hi):
                return 100 if next(self.seq, None) in self.s else 0

        # feed X = indicator of the witness set
        val = random_dual_value(mu1, mu2, rel, IndicatorRng(witness))
        assert val == mv


class TestEqElim:
    def test_tv_bound_both_directions(self):
        assert check_eq_elim(uniform(2), uniform(2), 0)
        assert check_eq_elim(uniform(2), uniform(4), F(1, 2))

    def test_premise_failure_raises(self):
        with pytest.raises(InvalidInstance):
            check_eq_elim(uniform(2), uniform(4), F(1, 4))


def small_instance(rng, eps_slack=0):
    """A bind-composition instance whose premises hold by construction."""
    mu1 = random_subdist(rng, range(3))
    mu2 = random_subdist(rng, range(3))
    rel = random_relation(rng, range(3), range(3), density=0.8)
    eps = max_violation(mu1, mu2, rel)[0] + F(eps_slack)
    conts_f = {a: random_subdist(rng, range(3)) for a in range(3)}
    conts_g = {b: random_subdist(rng, range(3)) for b in range(3)}
    rel2 = random_relation(rng, range(3), range(3), density=0.8)
    eps2 = max(
        (max_violation(conts_f[a], conts_g[b], rel2)[0]
         for a, b in rel.pairs),
        default=F(0),
    )
    return BindInstance(mu1, mu2, conts_f.__getitem__, conts_g.__getitem__,
                        rel, rel2, min(eps, 1), min(eps2, 1))


class TestBindComposition:
    def test_seeded_property_suite(self):
        rng = random.Random(20240817)
        for _ in range(300):
            assert check_bind_composition(small_instance(rng))

    def test_premise_failure_raises(self):
        inst = BindInstance(
            uniform(2), uniform(2), lambda a: uniform(2),
            lambda b: uniform(2), FiniteRelation([]),
            FiniteRelation.equality(range(2)), F(0), F(0),
        )
        with pytest.raises(InvalidInstance):
            check_bind_composition(inst)

    def test_continuation_premise_failure_raises(self):
        inst = BindInstance(
            uniform(2), uniform(2), lambda a: Dist.ret(a),
            lambda b: Dist.ret(1 - b),
            FiniteRelation.equality(range(2)),
            FiniteRelation.equality(range(2)), F(0), F(0),
        )
        with pytest.raises(InvalidInstance):
            check_bind_composition(inst)


class TestExpComposition:
    @pytest.mark.parametrize("side", ["left", "right"])
    def test_seeded_property_suite(self, side):
        rng = random.Random(911 if side == "left" else 912)
        for _ in range(300):
            base = small_instance(rng)
            key_of = (lambda ab: ab[0]) if side == "left" else \
                (lambda ab: ab[1])
            err = {}
            for pair in base.rel.pairs:
                k = key_of(pair)
                v = max_violation(base.f(pair[0]), base.g(pair[1]),
                                  base.rel2)[0]
                err[k] = max(err.get(k, F(0)), v)
            inst = ExpInstance(base.mu1, base.mu2, base.f, base.g,
                               base.rel, base.rel2, base.eps, err)
            assert check_exp_composition(inst, side)

    def test_bad_side(self):
        inst = ExpInstance(uniform(1), uniform(1), Dist.ret, Dist.ret,
                           FiniteRelation.equality([0]),
                           FiniteRelation.equality([0]), F(0), {})
        with pytest.raises(ValueError):
            check_exp_composition(inst, "middle")

    def test_outcome_dependent_error_beats_uniform_bound(self):
        # left outcome 0 continues at distance 1/2, outcome 1 exactly;
        # the expected error 1/4 suffices where the worst case 1/2 is loose
        f = {0: uniform(2), 1: Dist.ret(0)}.__getitem__
        g = {0: Dist.ret(0), 1: Dist.ret(0)}.__getitem__
        rel = FiniteRelation.equality(range(2))
        inst = ExpInstance(uniform(2), uniform(2), f, g, rel, rel,
                           F(0), {0: F(1, 2), 1: F(0)})
        assert check_exp_composition(inst, "left")
        v = arcoupl_check(CouplingQuery(
            uniform(2).bind(f), uniform(2).bind(g), F(1, 4), rel))
        assert v.holds and v.max_violation == F(1, 4)


class TestLimit:
    def test_grid_above_eps(self):
        rel = FiniteRelation.graph({0: 0, 1: 1})
        grid = [F(1, 2) + F(1, k) for k in range(3, 10)]
        assert check_limit(uniform(2), uniform(4), F(1, 2), rel, grid)

    def test_grid_point_at_or_below_eps_rejected(self):
        rel = FiniteRelation.equality(range(2))
        with pytest.raises(InvalidInstance):
            check_limit(uniform(2), uniform(2), F(1, 2), rel, [F(1, 2)])

    def test_failing_grid_point_rejected(self):
        rel = FiniteRelation([])
        with pytest.raises(InvalidInstance):
            check_limit(uniform(2), uniform(2), F(1, 4), rel, [F(1, 2)])


class TestJsonRoundTrip:
    def queries(self, rng):
        for _ in range(25):
            outcomes = [0, 1, (2, 3), "s", (0, (1, 2))]
            yield CouplingQuery(
                random_subdist(rng, outcomes),
                random_subdist(rng, outcomes),
                F(rng.randrange(0, 5), 7),
                random_relation(rng, outcomes, outcomes),
            )

    def test_round_trip(self, rng):
        for q in self.queries(rng):
            d = query_to_json(q)
            json.dumps(d)  # must be serializable as-is
            assert query_from_json(d) == q

    def test_schema_validation(self, rng):
        import jsonschema
        import referencing

        schemas = {
            name: json.loads((SCHEMAS / f"{name}.schema.json").read_text())
            for name in ("dist", "coupling_query", "coupling_verdict")
        }
        registry = referencing.Registry().with_resources(
            (s["$id"], referencing.Resource.from_contents(s))
            for s in schemas.values()
        )
        qv = jsonschema.Draft202012Validator(schemas["coupling_query"],
                                             registry=registry)
        vv = jsonschema.Draft202012Validator(schemas["coupling_verdict"],
                                             registry=registry)
        for q in self.queries(rng):
            qv.validate(query_to_json(q))
            vv.validate(verdict_to_json(arcoupl_check(q)))

    def test_verdict_fields(self):
        v = CouplingVerdict(True, F(1, 3), [(0, 1)])
        out = verdict_to_json(v)
        assert out == {
            "holds": True,
            "max_violation": {"num": "1", "den": "3"},
            "witness_set": [[0, 1]],
        }
