"""Validators for the semantic obligations of the sampling coupling rules.

Each rule is checked as a concrete instance: the coupling premise is
decided exactly, side conditions and error arithmetic are asserted with
rationals, and tape obligations are discharged by the erasability check
(ghost presampling must not change any program's outcome distribution).
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from typing import NamedTuple

from .coupling import (
    CouplingQuery, FiniteRelation, InvalidInstance, arcoupl_check,
)
from .dist import Dist, ONE, ZERO, as_prob, uniform, uniform_lists
from .parser import parse
from .semantics import Cfg, State, exec_n, state_step
from .syntax import App, Expr, LblV, Lit


class RuleReport(NamedTuple):
    rule: str
    params: dict
    ok: bool
    details: dict

    def to_json(self) -> dict:
        def enc(x):
            if isinstance(x, Fraction):
                return {"num": str(x.numerator), "den": str(x.denominator)}
            if isinstance(x, dict):
                return {str(k): enc(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [enc(v) for v in x]
            return x

        return {
            "rule": self.rule,
            "params": enc(self.params),
            "ok": self.ok,
            "details": enc(self.details),
        }


def _check_injection(f: dict, dom_bound: int, cod_bound: int) -> None:
    if set(f) != set(range(dom_bound + 1)):
        raise InvalidInstance(f"domain must be exactly 0..{dom_bound}")
    if len(set(f.values())) != len(f):
        raise InvalidInstance("mapping is not injective")
    if any(not 0 <= v <= cod_bound for v in f.values()):
        raise InvalidInstance(f"codomain must lie in 0..{cod_bound}")


def decoder(n: int, digits: list[int]) -> int:
    """Integer represented by ``digits`` in base n+1, most significant
    digit first."""
    if any(not 0 <= d <= n for d in digits):
        raise ValueError(f"digit out of range 0..{n}")
    acc = 0
    for d in digits:
        acc = acc * (n + 1) + d
    return acc


def validate_rand_rand_le(n: int, m: int, f: dict) -> RuleReport:
    """Couple sampling over 0..n with sampling over 0..m (n <= m) along an
    injection; error (m-n)/(m+1), tight."""
    if n > m:
        raise InvalidInstance("requires n <= m")
    _check_injection(f, n, m)
    eps = Fraction(m - n, m + 1)
    rel = FiniteRelation.graph(f)
    at_eps = arcoupl_check(CouplingQuery(uniform(n + 1), uniform(m + 1),
                                         eps, rel))
    tight = at_eps.max_violation == eps
    return RuleReport(
        "rand-rand-le",
        {"n": n, "m": m, "f": f},
        at_eps.holds and tight,
        {"epsilon": eps, "holds": at_eps.holds, "tight": tight,
         "max_violation": at_eps.max_violation},
    )


def validate_rand_rand_ge(n: int, m: int, f: dict) -> RuleReport:
    """Mirror image: n >= m, relation flipped to {(f(k), k)}, error
    (n-m)/(n+1)."""
    if n < m:
        raise InvalidInstance("requires n >= m")
    _check_injection(f, m, n)
    eps = Fraction(n - m, n + 1)
    rel = FiniteRelation.graph(f).converse()
    at_eps = arcoupl_check(CouplingQuery(uniform(n + 1), uniform(m + 1),
                                         eps, rel))
    tight = at_eps.max_violation == eps
    return RuleReport(
        "rand-rand-ge",
        {"n": n, "m": m, "f": f},
        at_eps.holds and tight,
        {"epsilon": eps, "holds": at_eps.holds, "tight": tight,
         "max_violation": at_eps.max_violation},
    )


def validate_many_to_one(n: int, p: int) -> RuleReport:
    """Couple p independent samples over 0..n with one sample over
    0..(n+1)^p - 1, zero error, along the base-(n+1) decoder."""
    if p < 1:
        raise InvalidInstance("requires p >= 1")
    m = (n + 1) ** p - 1
    mu1 = uniform_lists(n + 1, p)
    rel = FiniteRelation(
        (digits, decoder(n, list(digits))) for digits in mu1.support()
    )
    verdict = arcoupl_check(CouplingQuery(mu1, uniform(m + 1), ZERO, rel))
    return RuleReport(
        "many-to-one",
        {"n": n, "p": p, "m": m},
        verdict.holds and verdict.max_violation == 0,
        {"max_violation": verdict.max_violation},
    )


def fragmented_err(n: int, m: int, f: dict, eps: Fraction) -> dict:
    """Per-branch error assignment for the fragmented rule: zero on the
    image of f, the amplified eps*(m+1)/(m-n) elsewhere."""
    amplified = as_prob(eps) * Fraction(m + 1, m - n)
    if amplified > 1:
        raise InvalidInstance(
            f"amplified error {amplified} exceeds 1; shrink eps"
        )
    img = set(f.values())
    return {k: (ZERO if k in img else amplified) for k in range(m + 1)}


def validate_fragmented(n: int, m: int, f: dict, eps) -> RuleReport:
    """The fragmented sampling rule: its amplified error assignment must
    average back to eps, and its tape relation must carry a zero-error
    coupling between the two append distributions."""
    if n >= m:
        raise InvalidInstance("requires n < m")
    _check_injection(f, n, m)
    eps = as_prob(eps)
    err = fragmented_err(n, m, f, eps)
    expectation = sum(err.values(), ZERO) / (m + 1)
    accounting_ok = expectation == eps

    # left: append the preimage digit when the sample lands in the image,
    # append nothing otherwise; right: always append the sample
    inv = {v: k for k, v in f.items()}
    mu_right = uniform(m + 1).map(lambda k: (k,))
    mu_left = uniform(m + 1).map(
        lambda k: (inv[k],) if k in inv else ()
    )
    rel = FiniteRelation(
        ((inv[k],) if k in inv else (), (k,)) for k in range(m + 1)
    )
    verdict = arcoupl_check(CouplingQuery(mu_left, mu_right, ZERO, rel))
    return RuleReport(
        "fragmented",
        {"n": n, "m": m, "f": f, "eps": eps},
        accounting_ok and verdict.holds,
        {"err": err, "expectation": expectation,
         "accounting_ok": accounting_ok,
         "append_coupling_violation": verdict.max_violation},
    )


# -- erasability -----------------------------------------------------------


def load_corpus() -> list[tuple[str, Expr]]:
    """The standard erasability corpus: named functions expecting a tape
    label and a sampling bound."""
    root = resources.files("randml") / "assets" / "corpus"
    names = json.loads((root / "corpus.json").read_text())["programs"]
    out = []
    for name in names:
        e = parse((root / name).read_text())
        if e.fv:
            raise ValueError(f"corpus program {name} is not closed")
        out.append((name, e))
    return out


def apply_corpus(programs: list[tuple[str, Expr]], lbl: int, bound: int,
                 ) -> list[tuple[str, Expr]]:
    return [
        (name, App(App(e, LblV(lbl)), Lit(bound))) for name, e in programs
    ]


class ErasabilityReport(NamedTuple):
    ok: bool
    counterexamples: list  # (program name, step index)


def erasability_check(mu: Dist[State], sigma: State,
                      corpus: list[tuple[str, Expr]], n_max: int,
                      ) -> ErasabilityReport:
    """Ghost action check: running e from sigma must give the same
    step-indexed value distribution as first applying mu, for every
    program in the corpus and every index up to n_max."""
    failures = []
    for name, e in corpus:
        for k in range(n_max + 1):
            lhs = exec_n(Cfg(e, sigma), k)
            rhs = mu.bind(lambda s2: exec_n(Cfg(e, s2), k))
            if lhs != rhs:
                failures.append((name, k))
                break
    return ErasabilityReport(not failures, failures)


def fixed_append_dist(sigma: State, lbl: int, value: int) -> Dist[State]:
    """Deterministically append one fixed value; the standard negative
    control for erasability."""
    return Dist.ret(sigma.append_tape(lbl, (value,)))


def uniform_list_append_dist(sigma: State, lbl: int, p: int) -> Dist[State]:
    """Append p fresh uniform values to tape ``lbl``; iterated ghost
    presampling."""
    d = Dist.ret(sigma)
    for _ in range(p):
        d = d.bind(lambda s: state_step(s, lbl))
    return d


def validate_tape_tape_append(n: int, m: int, p: int, q: int,
                              rel: FiniteRelation, eps,
                              n_max: int = 8) -> RuleReport:
    """Coupled tape extension: the list-level coupling premise plus
    erasability of both append actions."""
    eps = as_prob(eps)
    verdict = arcoupl_check(
        CouplingQuery(uniform_lists(n + 1, p), uniform_lists(m + 1, q),
                      eps, rel)
    )
    corpus = load_corpus()
    reports = {}
    for side, bound, count in (("left", n, p), ("right", m, q)):
        lbl, sigma = State().alloc_tape(bound)
        mu = uniform_list_append_dist(sigma, lbl, count)
        reports[side] = erasability_check(
            mu, sigma, apply_corpus(corpus, lbl, bound), n_max
        )
    ok = verdict.holds and reports["left"].ok and reports["right"].ok
    return RuleReport(
        "tape-tape-append",
        {"n": n, "m": m, "p": p, "q": q, "eps": eps},
        ok,
        {"max_violation": verdict.max_violation,
         "erasable_left": reports["left"].ok,
         "erasable_right": reports["right"].ok},
    )


def amp_iterations(eps, k) -> int:
    """Least i with eps * k^i >= 1, by exact repeated multiplication."""
    eps = Fraction(eps)
    k = Fraction(k)
    if eps <= 0 or eps > 1:
        raise ValueError("requires 0 < eps <= 1")
    if k <= 1:
        raise ValueError("requires amplification factor k > 1")
    i = 0
    acc = eps
    while acc < 1:
        acc *= k
        i += 1
    return i
