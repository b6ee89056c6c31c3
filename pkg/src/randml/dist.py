"""Exact finite-support subdistributions over hashable outcomes.

All weights are `fractions.Fraction`; nothing in here ever touches floats
except the human-readable helpers.  Zero-weight entries are dropped on
construction so distribution equality is plain dict equality.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Generic, Hashable, Iterable, Iterator, TypeVar

A = TypeVar("A", bound=Hashable)
B = TypeVar("B", bound=Hashable)

ZERO = Fraction(0)
ONE = Fraction(1)


class ProbError(ValueError):
    """A number that was supposed to be a probability is not one."""


def as_prob(x, *, upper: bool = True) -> Fraction:
    """Coerce ``x`` to an exact Fraction and validate 0 <= x (<= 1)."""
    p = Fraction(x)
    if p < 0:
        raise ProbError(f"negative probability {p}")
    if upper and p > 1:
        raise ProbError(f"probability {p} exceeds 1")
    return p


def canon_key(outcome) -> tuple:
    """Total order on outcomes, for deterministic iteration/serialization.

    Orders by type tag first, then value; containers recurse.  Anything else
    falls back to its repr, which is stable for the AST nodes used as
    outcomes (their repr is their printed source form).
    """
    if isinstance(outcome, bool):
        return (0, outcome)
    if isinstance(outcome, int):
        return (1, outcome)
    if isinstance(outcome, Fraction):
        return (2, outcome)
    if isinstance(outcome, str):
        return (3, outcome)
    if isinstance(outcome, tuple):
        return (4, tuple(canon_key(x) for x in outcome))
    return (5, type(outcome).__name__, repr(outcome))


class Dist(Generic[A]):
    """Finite-support discrete subdistribution: outcome -> Fraction in (0, 1].

    Total mass is at most 1.  Instances are immutable; all operations
    return fresh distributions.
    """

    __slots__ = ("_w",)

    def __init__(self, weights: dict | Iterable[tuple[A, Fraction]] = ()):
        w: dict[A, Fraction] = {}
        items = weights.items() if isinstance(weights, dict) else weights
        for a, p in items:
            p = Fraction(p)
            if p < 0:
                raise ProbError(f"negative weight {p} for outcome {a!r}")
            if p == 0:
                continue
            w[a] = w.get(a, ZERO) + p
        total = sum(w.values(), ZERO)
        if total > 1:
            raise ProbError(f"total mass {total} exceeds 1")
        self._w = w

    # -- basic accessors ---------------------------------------------------

    def __call__(self, a: A) -> Fraction:
        return self._w.get(a, ZERO)

    def __iter__(self) -> Iterator[A]:
        return iter(self.support())

    def __len__(self) -> int:
        return len(self._w)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dist) and self._w == other._w

    def __hash__(self):
        return hash(frozenset(self._w.items()))

    def __repr__(self):
        items = ", ".join(f"{a!r}: {p}" for a, p in self.items())
        return f"Dist({{{items}}})"

    def support(self) -> list[A]:
        return sorted(self._w, key=canon_key)

    def items(self) -> list[tuple[A, Fraction]]:
        return [(a, self._w[a]) for a in self.support()]

    def weights(self) -> dict[A, Fraction]:
        return dict(self._w)

    def mass(self) -> Fraction:
        return sum(self._w.values(), ZERO)

    # -- monad -------------------------------------------------------------

    @staticmethod
    def ret(a: A) -> "Dist[A]":
        return Dist({a: ONE})

    @staticmethod
    def empty() -> "Dist[A]":
        return Dist({})

    def bind(self, f: Callable[[A], "Dist[B]"]) -> "Dist[B]":
        out: dict[B, Fraction] = {}
        for a, p in self._w.items():
            for b, q in f(a)._w.items():
                out[b] = out.get(b, ZERO) + p * q
        return Dist(out)

    def map(self, f: Callable[[A], B]) -> "Dist[B]":
        out: dict[B, Fraction] = {}
        for a, p in self._w.items():
            b = f(a)
            out[b] = out.get(b, ZERO) + p
        return Dist(out)

    def restrict(self, pred: Callable[[A], bool]) -> "Dist[A]":
        return Dist({a: p for a, p in self._w.items() if pred(a)})

    def scale(self, c) -> "Dist[A]":
        c = Fraction(c)
        return Dist({a: p * c for a, p in self._w.items()})

    def add(self, other: "Dist[A]") -> "Dist[A]":
        out = dict(self._w)
        for a, p in other._w.items():
            out[a] = out.get(a, ZERO) + p
        return Dist(out)

    # -- expectations and distances ---------------------------------------

    def expect(self, f: Callable[[A], Fraction]) -> Fraction:
        """Expected value of a [0,1]-valued random variable ``f``."""
        total = ZERO
        for a, p in self._w.items():
            v = Fraction(f(a))
            if not (0 <= v <= 1):
                raise ProbError(f"random variable value {v} outside [0,1]")
            total += p * v
        return total

    def prob_of(self, pred: Callable[[A], bool]) -> Fraction:
        return sum((p for a, p in self._w.items() if pred(a)), ZERO)

    # -- serialization -----------------------------------------------------

    def to_json(self, outcome_encoder: Callable[[A], object] = None) -> list:
        enc = outcome_encoder if outcome_encoder is not None else _default_enc
        return [
            {
                "outcome": enc(a),
                "num": str(p.numerator),
                "den": str(p.denominator),
            }
            for a, p in self.items()
        ]


def _default_enc(a):
    if isinstance(a, (bool, int, str)):
        return a
    return str(a)


def uniform(n: int) -> Dist[int]:
    """Uniform distribution on {0, ..., n-1}."""
    if not isinstance(n, int) or n < 1:
        raise ValueError(f"uniform requires a positive integer, got {n!r}")
    p = Fraction(1, n)
    return Dist({k: p for k in range(n)})


def uniform_lists(n: int, p: int) -> Dist[tuple[int, ...]]:
    """Uniform distribution over length-p tuples with entries in 0..n-1."""
    if n < 1 or p < 0:
        raise ValueError("uniform_lists requires n >= 1 and p >= 0")
    d = Dist.ret(())
    for _ in range(p):
        d = d.bind(lambda t: uniform(n).map(lambda k, t=t: t + (k,)))
    return d


def tv_distance(mu1: Dist[A], mu2: Dist[A]) -> Fraction:
    """Total variation distance, i.e. sup over events of the mass gap.

    For finite subdistributions this is max(sum of positive parts in either
    direction), which the test suite cross-checks by subset enumeration.
    """
    up = ZERO
    down = ZERO
    for a in set(mu1._w) | set(mu2._w):
        d = mu1(a) - mu2(a)
        if d > 0:
            up += d
        else:
            down -= d
    return max(up, down)
