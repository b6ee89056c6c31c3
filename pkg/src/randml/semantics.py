"""Probabilistic small-step operational semantics.

Each step of a configuration yields an exact distribution over successor
configurations: deterministic redexes give point distributions, ``rand n``
gives uniform weight 1/(n+1) on 0..n, and stuck configurations give the
empty (zero-mass) distribution, which makes crashes indistinguishable from
divergence under the subdistribution semantics.

Presampling tapes: ``rand n @ l`` with a matching non-empty tape pops the
first tape entry deterministically; with an empty tape (or a tape whose
bound differs from n, following the Clutch treatment of bound mismatch)
it behaves like unlabeled sampling and leaves the tape untouched.

Evaluation order is right-to-left in every multi-argument construct
(argument before function, stored value before location).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, NamedTuple

from .dist import Dist, ONE, ZERO
from . import syntax as S
from .syntax import (
    Alloc, AllocTape, App, BinOp, Case, Expr, Fst, If, Inl, Inr, LblV, Lit,
    Load, LocV, Pack, Pair, Rand, Rec, Snd, Store, Unpack, subst,
)

Tape = tuple[int, tuple[int, ...]]  # (bound, contents)


class State:
    """Heap (location -> value) plus tapes (label -> bounded queue).

    Immutable; updates return new states.  Fresh locations and labels come
    from per-state counters so allocation is deterministic and states are
    hashable distribution keys.
    """

    __slots__ = ("heap", "tapes", "next_loc", "next_lbl", "_hash")

    def __init__(self, heap=None, tapes=None, next_loc=0, next_lbl=0):
        self.heap: dict[int, Expr] = heap or {}
        self.tapes: dict[int, Tape] = tapes or {}
        self.next_loc = next_loc
        self.next_lbl = next_lbl
        self._hash = hash(
            (
                tuple(sorted(self.heap.items(), key=lambda kv: kv[0])),
                tuple(sorted(self.tapes.items())),
                next_loc,
                next_lbl,
            )
        )

    def __eq__(self, other):
        return (
            isinstance(other, State)
            and self._hash == other._hash
            and self.heap == other.heap
            and self.tapes == other.tapes
            and self.next_loc == other.next_loc
            and self.next_lbl == other.next_lbl
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return (
            f"State(heap={self.heap!r}, tapes={self.tapes!r}, "
            f"next_loc={self.next_loc}, next_lbl={self.next_lbl})"
        )

    # -- functional updates ------------------------------------------------

    def alloc(self, v: Expr) -> tuple[int, "State"]:
        loc = self.next_loc
        heap = dict(self.heap)
        heap[loc] = v
        return loc, State(heap, self.tapes, self.next_loc + 1, self.next_lbl)

    def store(self, loc: int, v: Expr) -> "State":
        heap = dict(self.heap)
        heap[loc] = v
        return State(heap, self.tapes, self.next_loc, self.next_lbl)

    def alloc_tape(self, bound: int) -> tuple[int, "State"]:
        lbl = self.next_lbl
        tapes = dict(self.tapes)
        tapes[lbl] = (bound, ())
        return lbl, State(self.heap, tapes, self.next_loc, self.next_lbl + 1)

    def set_tape(self, lbl: int, tape: Tape) -> "State":
        bound, contents = tape
        if any(x > bound or x < 0 for x in contents):
            raise ValueError("tape contents exceed tape bound")
        tapes = dict(self.tapes)
        tapes[lbl] = (bound, tuple(contents))
        return State(self.heap, tapes, self.next_loc, self.next_lbl)

    def append_tape(self, lbl: int, values: Iterable[int]) -> "State":
        bound, contents = self.tapes[lbl]
        return self.set_tape(lbl, (bound, contents + tuple(values)))


class Cfg(NamedTuple):
    expr: Expr
    state: State


# -- single step -----------------------------------------------------------

_STUCK: list = []


def _point(e: Expr, s: State) -> list:
    return [((e, s), ONE)]


def step(cfg: Cfg) -> Dist[Cfg]:
    """Distribution induced by one reduction step of a non-value config."""
    if cfg.expr.is_val:
        raise ValueError("step called on a value configuration")
    return Dist(
        [(Cfg(e, s), p) for (e, s), p in _step(cfg.expr, cfg.state)]
    )


def _step(e: Expr, s: State) -> list:
    """Raw step: list of ((expr, state), weight); empty list means stuck."""
    match e:
        case App(fn, arg):
            if not arg.is_val:
                return _in_ctx(arg, s, lambda a: App(fn, a))
            if not fn.is_val:
                return _in_ctx(fn, s, lambda f: App(f, arg))
            if isinstance(fn, Rec):
                body = subst(fn.body, fn.arg, arg)
                if fn.fname != "_":
                    body = subst(body, fn.fname, fn)
                return _point(body, s)
            return _STUCK
        case BinOp(op, l, r):
            if not r.is_val:
                return _in_ctx(r, s, lambda x: BinOp(op, l, x))
            if not l.is_val:
                return _in_ctx(l, s, lambda x: BinOp(op, x, r))
            v = _binop(op, l, r)
            return _STUCK if v is None else _point(v, s)
        case If(c, t, f):
            if not c.is_val:
                return _in_ctx(c, s, lambda x: If(x, t, f))
            if c is S.TRUE or c == S.TRUE:
                return _point(t, s)
            if c == S.FALSE:
                return _point(f, s)
            return _STUCK
        case Pair(l, r):
            if not r.is_val:
                return _in_ctx(r, s, lambda x: Pair(l, x))
            return _in_ctx(l, s, lambda x: Pair(x, r))
        case Fst(a):
            if not a.is_val:
                return _in_ctx(a, s, Fst)
            return _point(a.left, s) if isinstance(a, Pair) else _STUCK
        case Snd(a):
            if not a.is_val:
                return _in_ctx(a, s, Snd)
            return _point(a.right, s) if isinstance(a, Pair) else _STUCK
        case Inl(a):
            return _in_ctx(a, s, Inl)
        case Inr(a):
            return _in_ctx(a, s, Inr)
        case Case(scrut, lv, lb, rv, rb):
            if not scrut.is_val:
                return _in_ctx(scrut, s, lambda x: Case(x, lv, lb, rv, rb))
            if isinstance(scrut, Inl):
                return _point(subst(lb, lv, scrut.expr), s)
            if isinstance(scrut, Inr):
                return _point(subst(rb, rv, scrut.expr), s)
            return _STUCK
        case Alloc(a):
            if not a.is_val:
                return _in_ctx(a, s, Alloc)
            loc, s2 = s.alloc(a)
            return _point(LocV(loc), s2)
        case Load(a):
            if not a.is_val:
                return _in_ctx(a, s, Load)
            if isinstance(a, LocV) and a.loc in s.heap:
                return _point(s.heap[a.loc], s)
            return _STUCK
        case Store(l, r):
            if not r.is_val:
                return _in_ctx(r, s, lambda x: Store(l, x))
            if not l.is_val:
                return _in_ctx(l, s, lambda x: Store(x, r))
            if isinstance(l, LocV) and l.loc in s.heap:
                return _point(S.UNIT, s.store(l.loc, r))
            return _STUCK
        case Rand(b, None):
            if not b.is_val:
                return _in_ctx(b, s, Rand)
            return _rand_uniform(b, s)
        case Rand(b, lbl):
            if not lbl.is_val:
                return _in_ctx(lbl, s, lambda x: Rand(b, x))
            if not b.is_val:
                return _in_ctx(b, s, lambda x: Rand(x, lbl))
            if not isinstance(lbl, LblV) or lbl.lbl not in s.tapes:
                return _STUCK
            if not isinstance(b, Lit) or not isinstance(b.value, int) \
                    or isinstance(b.value, bool) or b.value < 0:
                return _STUCK
            bound, contents = s.tapes[lbl.lbl]
            if bound != b.value or not contents:
                # empty tape, or bound mismatch: behaves as unlabeled rand
                return _rand_uniform(b, s)
            head, rest = contents[0], contents[1:]
            s2 = s.set_tape(lbl.lbl, (bound, rest))
            return _point(Lit(head), s2)
        case AllocTape(a):
            if not a.is_val:
                return _in_ctx(a, s, AllocTape)
            if not isinstance(a, Lit) or not isinstance(a.value, int) \
                    or isinstance(a.value, bool) or a.value < 0:
                return _STUCK
            lbl, s2 = s.alloc_tape(a.value)
            return _point(LblV(lbl), s2)
        case Pack(a):
            if not a.is_val:
                return _in_ctx(a, s, Pack)
            return _point(a, s)
        case Unpack(p, x, body):
            if not p.is_val:
                return _in_ctx(p, s, lambda q: Unpack(q, x, body))
            return _point(subst(body, x, p), s)
        case _:
            return _STUCK  # free variables are stuck


def _in_ctx(sub: Expr, s: State, rebuild: Callable[[Expr], Expr]) -> list:
    return [((rebuild(e2), s2), p) for (e2, s2), p in _step(sub, s)]


def _rand_uniform(b: Expr, s: State) -> list:
    if not isinstance(b, Lit) or not isinstance(b.value, int) \
            or isinstance(b.value, bool) or b.value < 0:
        return _STUCK
    n = b.value
    w = Fraction(1, n + 1)
    return [((Lit(k), s), w) for k in range(n + 1)]


def _binop(op: str, l: Expr, r: Expr):
    if op in ("=", "!="):
        eq = _val_eq(l, r)
        if eq is None:
            return None
        return Lit(eq if op == "=" else not eq)
    if not isinstance(l, Lit) or not isinstance(r, Lit):
        return None
    a, b = l.value, r.value
    if not isinstance(a, int) or not isinstance(b, int) \
            or isinstance(a, bool) or isinstance(b, bool):
        return None
    if op == "+":
        return Lit(a + b)
    if op == "-":
        return Lit(a - b)
    if op == "*":
        return Lit(a * b)
    if op == "div":
        return Lit(a // b) if b != 0 else None
    if op == "mod":
        return Lit(a % b) if b != 0 else None
    if op == "<":
        return Lit(a < b)
    if op == "<=":
        return Lit(a <= b)
    if op == ">":
        return Lit(a > b)
    if op == ">=":
        return Lit(a >= b)
    return None


def _val_eq(l: Expr, r: Expr):
    """Structural equality on first-order values; None (stuck) on closures."""
    if isinstance(l, Rec) or isinstance(r, Rec):
        return None
    if isinstance(l, Pair) and isinstance(r, Pair):
        a = _val_eq(l.left, r.left)
        if a is None:
            return None
        if not a:
            return False
        return _val_eq(l.right, r.right)
    if isinstance(l, (Inl, Inr)) and isinstance(r, (Inl, Inr)):
        if type(l) is not type(r):
            return False
        return _val_eq(l.expr, r.expr)
    if type(l) is type(r):
        return l == r
    return False


# -- stratified execution --------------------------------------------------


def exec_n(cfg: Cfg, n: int) -> Dist[Expr]:
    """Probability of reaching each value in at most ``n`` steps.

    Direct recursive transcription of the step-indexed definition; the
    iterative engine below is cross-checked against it in the tests.
    """
    cache: dict[tuple[Cfg, int], Dist] = {}

    def go(c: Cfg, k: int) -> Dist[Expr]:
        if c.expr.is_val:
            return Dist.ret(c.expr)
        if k == 0:
            return Dist.empty()
        key = (c, k)
        hit = cache.get(key)
        if hit is None:
            hit = step(c).bind(lambda c2: go(c2, k - 1))
            cache[key] = hit
        return hit

    return go(cfg, n)


def pexec_n(cfg: Cfg, n: int) -> Dist[Cfg]:
    """``n`` steps of partial execution, stopping early at values."""
    d = Dist.ret(cfg)
    for _ in range(n):
        d = d.bind(lambda c: Dist.ret(c) if c.expr.is_val else step(c))
    return d


def term_prob_n(cfg: Cfg, n: int) -> Fraction:
    return exec_n(cfg, n).mass()


class ExecResult(NamedTuple):
    dist: Dist[Expr]  # value distribution at the reached step index
    residual: Fraction  # mass still live on non-value configurations
    stuck_mass: Fraction  # mass lost to stuck configurations (diagnostic)
    steps: int


def exec_approx(cfg: Cfg, n_max: int) -> ExecResult:
    """Iterative pexec engine: value distribution after ``n_max`` steps.

    Brackets the limit distribution: for every value v,
    dist(v) <= exec(cfg)(v) <= dist(v) + residual.
    """
    return _run(cfg, n_max, stop_at=None)


def exec_until_residual(cfg: Cfg, target: Fraction,
                        max_steps: int = 1_000_000) -> ExecResult:
    """Step until the live (non-value) mass equals ``target`` exactly.

    Used by the case-study harnesses to stop at rejection-round boundaries
    where the residual has a closed geometric form.  Raises if the live
    mass drops below the target without ever hitting it.
    """
    res = _run(cfg, max_steps, stop_at=Fraction(target))
    live = res.residual
    if live != target:
        raise RuntimeError(
            f"live mass {live} never hit target {target} "
            f"within {max_steps} steps"
        )
    return res


def _run(cfg: Cfg, n_max: int, stop_at: Fraction | None) -> ExecResult:
    values: dict[Expr, Fraction] = {}
    live: dict[Cfg, Fraction] = {}
    if cfg.expr.is_val:
        values[cfg.expr] = ONE
    else:
        live[cfg] = ONE
    steps = 0
    while live and steps < n_max:
        if stop_at is not None and sum(live.values(), ZERO) == stop_at:
            break
        new_live: dict[Cfg, Fraction] = {}
        for c, w in live.items():
            for (e2, s2), p in _step(c.expr, c.state):
                wp = w * p
                if e2.is_val:
                    values[e2] = values.get(e2, ZERO) + wp
                else:
                    c2 = Cfg(e2, s2)
                    new_live[c2] = new_live.get(c2, ZERO) + wp
        live = new_live
        steps += 1
    residual = sum(live.values(), ZERO)
    vmass = sum(values.values(), ZERO)
    return ExecResult(Dist(values), residual, ONE - residual - vmass, steps)


def exec_cfgs(cfg: Cfg, n_max: int = 100_000) -> Dist[Cfg]:
    """Terminal configurations (value plus final state) within n_max steps."""
    done: dict[Cfg, Fraction] = {}
    live: dict[Cfg, Fraction] = {}
    (done if cfg.expr.is_val else live)[cfg] = ONE
    steps = 0
    while live and steps < n_max:
        new_live: dict[Cfg, Fraction] = {}
        for c, w in live.items():
            for (e2, s2), p in _step(c.expr, c.state):
                c2 = Cfg(e2, s2)
                tgt = done if e2.is_val else new_live
                tgt[c2] = tgt.get(c2, ZERO) + w * p
        live = new_live
        steps += 1
    return Dist(done)


def state_step(state: State, lbl: int) -> Dist[State]:
    """Ghost presampling: uniformly append one fresh value to tape ``lbl``."""
    if lbl not in state.tapes:
        raise KeyError(f"unknown tape label {lbl}")
    bound, _ = state.tapes[lbl]
    w = Fraction(1, bound + 1)
    return Dist([(state.append_tape(lbl, (k,)), w) for k in range(bound + 1)])


def run_expr(e: Expr, state: State | None = None, n_max: int = 10_000,
             ) -> ExecResult:
    S.check_closed(e)
    return exec_approx(Cfg(e, state if state is not None else State()), n_max)
