"""Exact decision of approximate couplings between finite subdistributions.

An (epsilon, R)-coupling of mu1 and mu2 asks that no [0,1]-valued test can
separate the two by more than epsilon when the tests are linked along R.
Because the constraint matrix of that quantification is a bipartite
incidence matrix, the optimum is attained at 0/1 vertices, so the decision
reduces to

    max over S subseteq supp(mu1) of  mu1(S) - mu2(R(S))  <=  epsilon

with R(S) = {b | exists a in S with a R b}.  The reference backend below
enumerates subsets outright; the test suite cross-checks it against a
randomized search over fractional test functions.
"""

from __future__ import annotations

import os
from fractions import Fraction
from typing import Callable, Hashable, Iterable, NamedTuple

from .dist import Dist, ONE, ZERO, as_prob, canon_key

DEFAULT_ENUM_LIMIT = 20
ENUM_LIMIT_ENV = "RANDML_ENUM_LIMIT"


class SupportTooLarge(ValueError):
    """The left support exceeds the subset-enumeration budget."""


class InvalidInstance(ValueError):
    """A lemma checker was handed an instance whose premises fail."""


def enum_limit() -> int:
    raw = os.environ.get(ENUM_LIMIT_ENV)
    return int(raw) if raw else DEFAULT_ENUM_LIMIT


class FiniteRelation:
    """A finite relation, always materialized to an explicit pair set."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[tuple[Hashable, Hashable]]):
        self.pairs = frozenset(pairs)

    @staticmethod
    def from_predicate(left: Iterable, right: Iterable,
                       pred: Callable[[Hashable, Hashable], bool],
                       ) -> "FiniteRelation":
        left = list(left)
        right = list(right)
        return FiniteRelation(
            (a, b) for a in left for b in right if pred(a, b)
        )

    @staticmethod
    def equality(outcomes: Iterable) -> "FiniteRelation":
        return FiniteRelation((a, a) for a in outcomes)

    @staticmethod
    def graph(f: dict) -> "FiniteRelation":
        return FiniteRelation(f.items())

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __eq__(self, other):
        return isinstance(other, FiniteRelation) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __repr__(self):
        return f"FiniteRelation({sorted(self.pairs, key=canon_key)!r})"

    def converse(self) -> "FiniteRelation":
        return FiniteRelation((b, a) for a, b in self.pairs)

    def image(self, s: Iterable) -> set:
        s = set(s)
        return {b for a, b in self.pairs if a in s}


class CouplingQuery(NamedTuple):
    mu1: Dist
    mu2: Dist
    epsilon: Fraction
    relation: FiniteRelation


class CouplingVerdict(NamedTuple):
    holds: bool
    max_violation: Fraction
    witness_set: list


def max_violation(mu1: Dist, mu2: Dist, rel: FiniteRelation,
                  limit: int | None = None) -> tuple[Fraction, list]:
    """Exact maximum of mu1(S) - mu2(R(S)) over subsets of supp(mu1).

    Returns the maximum and an attaining subset.  Subset enumeration, so
    the left support must fit the budget (default 20, env-overridable).
    """
    support1 = mu1.support()
    n = len(support1)
    cap = limit if limit is not None else enum_limit()
    if n > cap:
        raise SupportTooLarge(
            f"left support has {n} outcomes, enumeration budget is {cap}"
        )
    support2 = mu2.support()
    idx2 = {b: i for i, b in enumerate(support2)}

    w1 = [mu1(a) for a in support1]
    img_bits = []
    for a in support1:
        bits = 0
        for pa, pb in rel.pairs:
            if pa == a and pb in idx2:
                bits |= 1 << idx2[pb]
        img_bits.append(bits)

    # incremental sweep: strip the lowest set bit to reuse smaller masks
    mass1 = [ZERO] * (1 << n)
    image = [0] * (1 << n)
    mass2_of: dict[int, Fraction] = {0: ZERO}

    def mass2(bits: int) -> Fraction:
        hit = mass2_of.get(bits)
        if hit is None:
            lb = bits & -bits
            hit = mass2(bits ^ lb) + mu2(support2[lb.bit_length() - 1])
            mass2_of[bits] = hit
        return hit

    best = ZERO
    best_mask = 0
    for mask in range(1, 1 << n):
        lb = mask & -mask
        i = lb.bit_length() - 1
        mass1[mask] = mass1[mask ^ lb] + w1[i]
        image[mask] = image[mask ^ lb] | img_bits[i]
        v = mass1[mask] - mass2(image[mask])
        if v > best:
            best = v
            best_mask = mask
    witness = [support1[i] for i in range(n) if best_mask >> i & 1]
    return best, witness


def arcoupl_check(q: CouplingQuery, limit: int | None = None,
                  ) -> CouplingVerdict:
    eps = as_prob(q.epsilon)
    mv, witness = max_violation(q.mu1, q.mu2, q.relation, limit)
    return CouplingVerdict(mv <= eps, mv, witness)


def _holds(mu1, mu2, eps, rel) -> bool:
    return arcoupl_check(CouplingQuery(mu1, mu2, Fraction(eps), rel)).holds


# -- lemma instance checks -------------------------------------------------


def check_eq_elim(mu1: Dist, mu2: Dist, eps) -> bool:
    """Elimination along equality: a coupling bounds pointwise gaps and,
    when it holds in both directions, the total variation distance."""
    eps = as_prob(eps)
    outcomes = set(mu1.support()) | set(mu2.support())
    rel = FiniteRelation.equality(outcomes)
    if not _holds(mu1, mu2, eps, rel):
        raise InvalidInstance("no (eps, =)-coupling between the arguments")
    ok = all(mu1(a) <= mu2(a) + eps for a in outcomes)
    if _holds(mu2, mu1, eps, rel):
        from .dist import tv_distance

        ok = ok and tv_distance(mu1, mu2) <= eps
    return ok


class BindInstance(NamedTuple):
    mu1: Dist
    mu2: Dist
    f: Callable[[Hashable], Dist]
    g: Callable[[Hashable], Dist]
    rel: FiniteRelation
    rel2: FiniteRelation
    eps: Fraction
    eps2: Fraction


def check_bind_composition(inst: BindInstance) -> bool:
    """Couplings compose along bind with errors adding up."""
    eps = as_prob(inst.eps)
    eps2 = as_prob(inst.eps2)
    if not _holds(inst.mu1, inst.mu2, eps, inst.rel):
        raise InvalidInstance("first coupling premise fails")
    for a, b in inst.rel.pairs:
        if not _holds(inst.f(a), inst.g(b), eps2, inst.rel2):
            raise InvalidInstance(f"continuation premise fails at {(a, b)!r}")
    total = min(eps + eps2, ONE)
    return _holds(
        inst.mu1.bind(inst.f), inst.mu2.bind(inst.g), total, inst.rel2
    )


class ExpInstance(NamedTuple):
    mu1: Dist
    mu2: Dist
    f: Callable[[Hashable], Dist]
    g: Callable[[Hashable], Dist]
    rel: FiniteRelation
    rel2: FiniteRelation
    eps: Fraction
    err: dict  # outcome -> Fraction in [0, 1]


def check_exp_composition(inst: ExpInstance, side: str) -> bool:
    """Like bind composition, but the continuation error may depend on the
    outcome of the chosen side; the total error is its expected value."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    eps = as_prob(inst.eps)
    err = {a: as_prob(v) for a, v in inst.err.items()}
    if not _holds(inst.mu1, inst.mu2, eps, inst.rel):
        raise InvalidInstance("first coupling premise fails")
    for a, b in inst.rel.pairs:
        e_ab = err.get(a if side == "left" else b, ZERO)
        if not _holds(inst.f(a), inst.g(b), e_ab, inst.rel2):
            raise InvalidInstance(f"continuation premise fails at {(a, b)!r}")
    mu_side = inst.mu1 if side == "left" else inst.mu2
    eps2 = mu_side.expect(lambda a: err.get(a, ZERO))
    total = min(eps + eps2, ONE)
    return _holds(
        inst.mu1.bind(inst.f), inst.mu2.bind(inst.g), total, inst.rel2
    )


def check_limit(mu1: Dist, mu2: Dist, eps, rel: FiniteRelation,
                grid: list) -> bool:
    """A coupling that holds at every point of a grid above eps also holds
    at eps itself; exact rationals make the limit step a direct check."""
    eps = as_prob(eps)
    for e2 in grid:
        e2 = as_prob(e2)
        if e2 <= eps:
            raise InvalidInstance(f"grid point {e2} is not above eps {eps}")
        if not _holds(mu1, mu2, e2, rel):
            raise InvalidInstance(f"coupling premise fails at grid point {e2}")
    verdict = arcoupl_check(CouplingQuery(mu1, mu2, eps, rel))
    # consistency: the exact violation cannot exceed any passing grid point
    assert all(verdict.max_violation <= as_prob(e2) for e2 in grid)
    return verdict.holds


# -- randomized dual cross-check -------------------------------------------


def random_dual_value(mu1: Dist, mu2: Dist, rel: FiniteRelation, rng,
                      ) -> Fraction:
    """Value of one randomly drawn feasible test pair (X, Y).

    X is arbitrary in [0,1]; the cheapest feasible Y is the pointwise
    maximum of X over related partners.  The result never exceeds
    max_violation, which is what the property tests assert.
    """
    xs = {
        a: Fraction(rng.randrange(0, 101), 100) for a in mu1.support()
    }
    ys = {}
    for b in mu2.support():
        ys[b] = max(
            (xs[a] for a, b2 in rel.pairs if b2 == b and a in xs),
            default=ZERO,
        )
    ex = sum((p * xs[a] for a, p in mu1.items()), ZERO)
    ey = sum((p * ys[b] for b, p in mu2.items()), ZERO)
    return ex - ey


# -- JSON round-trips ------------------------------------------------------


def _enc_outcome(a):
    if isinstance(a, tuple):
        return [_enc_outcome(x) for x in a]
    if isinstance(a, (bool, int, str)):
        return a
    return str(a)


def _dec_outcome(a):
    if isinstance(a, list):
        return tuple(_dec_outcome(x) for x in a)
    return a


def _enc_frac(p: Fraction) -> dict:
    return {"num": str(p.numerator), "den": str(p.denominator)}


def _dec_frac(d: dict) -> Fraction:
    return Fraction(int(d["num"]), int(d["den"]))


def query_to_json(q: CouplingQuery) -> dict:
    return {
        "mu1": q.mu1.to_json(_enc_outcome),
        "mu2": q.mu2.to_json(_enc_outcome),
        "epsilon": _enc_frac(as_prob(q.epsilon)),
        "relation": sorted(
            ([_enc_outcome(a), _enc_outcome(b)] for a, b in q.relation.pairs),
            key=lambda ab: (canon_key(ab[0]), canon_key(ab[1])),
        ),
    }


def _dec_dist(entries: list) -> Dist:
    return Dist(
        (_dec_outcome(e["outcome"]), Fraction(int(e["num"]), int(e["den"])))
        for e in entries
    )


def query_from_json(d: dict) -> CouplingQuery:
    return CouplingQuery(
        _dec_dist(d["mu1"]),
        _dec_dist(d["mu2"]),
        _dec_frac(d["epsilon"]),
        FiniteRelation(
            (_dec_outcome(a), _dec_outcome(b)) for a, b in d["relation"]
        ),
    )


def verdict_to_json(v: CouplingVerdict) -> dict:
    return {
        "holds": v.holds,
        "max_violation": _enc_frac(v.max_violation),
        "witness_set": [_enc_outcome(a) for a in v.witness_set],
    }
