"""Abstract syntax of the object language.

Nodes are immutable, hashable (hash cached at construction, since whole
program configurations are used as distribution outcomes), and carry a
precomputed free-variable set and value flag.  Values are the subset of
expressions with ``is_val`` true; the embedding into Expr is the identity.

repr() of a node is its printed source form, and ``parse(print(e)) == e``
for every source-level AST (locations and tape labels are runtime-only and
print in a non-source form).
"""

from __future__ import annotations

import itertools

_EMPTY: frozenset = frozenset()


class Expr:
    __slots__ = ("_hash", "fv", "is_val")

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._fields() == other._fields()

    def __hash__(self):
        return self._hash

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __repr__(self):
        from .printer import print_expr

        return print_expr(self)


class Lit(Expr):
    """Integer, boolean, or unit (None) literal."""

    __slots__ = ("value",)
    __match_args__ = ("value",)

    def __init__(self, value):
        self.value = value
        # tag with the value's type: hash(True) == hash(1) in Python, but
        # the literals true and 1 must stay distinct outcomes
        self._hash = hash(("Lit", type(value).__name__, value))
        self.fv = _EMPTY
        self.is_val = True

    def _fields(self):
        return (type(self.value).__name__, self.value)


UNIT = Lit(None)
TRUE = Lit(True)
FALSE = Lit(False)


class Var(Expr):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("Var", name))
        self.fv = frozenset((name,))
        self.is_val = False

    def _fields(self):
        return (self.name,)


class Rec(Expr):
    """Recursive function value ``rec f x = body``; anonymous when f == "_"."""

    __slots__ = ("fname", "arg", "body")
    __match_args__ = ("fname", "arg", "body")

    def __init__(self, fname: str, arg: str, body: Expr):
        self.fname = fname
        self.arg = arg
        self.body = body
        self._hash = hash(("Rec", fname, arg, body._hash))
        self.fv = body.fv - {fname, arg}
        self.is_val = True

    def _fields(self):
        return (self.fname, self.arg, self.body)


class App(Expr):
    __slots__ = ("fn", "arg")
    __match_args__ = ("fn", "arg")

    def __init__(self, fn: Expr, arg: Expr):
        self.fn = fn
        self.arg = arg
        self._hash = hash(("App", fn._hash, arg._hash))
        self.fv = fn.fv | arg.fv
        self.is_val = False

    def _fields(self):
        return (self.fn, self.arg)


BINOPS = ("+", "-", "*", "div", "mod", "=", "!=", "<", "<=", ">", ">=")


class BinOp(Expr):
    __slots__ = ("op", "left", "right")
    __match_args__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        if op not in BINOPS:
            raise ValueError(f"unknown operator {op!r}")
        self.op = op
        self.left = left
        self.right = right
        self._hash = hash(("BinOp", op, left._hash, right._hash))
        self.fv = left.fv | right.fv
        self.is_val = False

    def _fields(self):
        return (self.op, self.left, self.right)


class If(Expr):
    __slots__ = ("cond", "then", "els")
    __match_args__ = ("cond", "then", "els")

    def __init__(self, cond: Expr, then: Expr, els: Expr):
        self.cond = cond
        self.then = then
        self.els = els
        self._hash = hash(("If", cond._hash, then._hash, els._hash))
        self.fv = cond.fv | then.fv | els.fv
        self.is_val = False

    def _fields(self):
        return (self.cond, self.then, self.els)


class Pair(Expr):
    __slots__ = ("left", "right")
    __match_args__ = ("left", "right")

    def __init__(self, left: Expr, right: Expr):
        self.left = left
        self.right = right
        self._hash = hash(("Pair", left._hash, right._hash))
        self.fv = left.fv | right.fv
        self.is_val = left.is_val and right.is_val

    def _fields(self):
        return (self.left, self.right)


class _Unary(Expr):
    __slots__ = ("expr",)
    __match_args__ = ("expr",)
    _value_when_child = False

    def __init__(self, expr: Expr):
        self.expr = expr
        self._hash = hash((type(self).__name__, expr._hash))
        self.fv = expr.fv
        self.is_val = self._value_when_child and expr.is_val

    def _fields(self):
        return (self.expr,)


class Fst(_Unary):
    __slots__ = ()


class Snd(_Unary):
    __slots__ = ()


class Inl(_Unary):
    __slots__ = ()
    _value_when_child = True


class Inr(_Unary):
    __slots__ = ()
    _value_when_child = True


class Case(Expr):
    __slots__ = ("scrut", "lvar", "lbody", "rvar", "rbody")
    __match_args__ = ("scrut", "lvar", "lbody", "rvar", "rbody")

    def __init__(self, scrut, lvar, lbody, rvar, rbody):
        self.scrut = scrut
        self.lvar = lvar
        self.lbody = lbody
        self.rvar = rvar
        self.rbody = rbody
        self._hash = hash(
            ("Case", scrut._hash, lvar, lbody._hash, rvar, rbody._hash)
        )
        self.fv = scrut.fv | (lbody.fv - {lvar}) | (rbody.fv - {rvar})
        self.is_val = False

    def _fields(self):
        return (self.scrut, self.lvar, self.lbody, self.rvar, self.rbody)


class Alloc(_Unary):
    __slots__ = ()


class Load(_Unary):
    __slots__ = ()


class Store(Expr):
    __slots__ = ("loc", "value")
    __match_args__ = ("loc", "value")

    def __init__(self, loc: Expr, value: Expr):
        self.loc = loc
        self.value = value
        self._hash = hash(("Store", loc._hash, value._hash))
        self.fv = loc.fv | value.fv
        self.is_val = False

    def _fields(self):
        return (self.loc, self.value)


class Rand(Expr):
    """``rand e`` or labeled ``rand e @ l``; label is None when unlabeled."""

    __slots__ = ("bound", "label")
    __match_args__ = ("bound", "label")

    def __init__(self, bound: Expr, label: Expr | None = None):
        self.bound = bound
        self.label = label
        self._hash = hash(
            ("Rand", bound._hash, None if label is None else label._hash)
        )
        self.fv = bound.fv | (label.fv if label is not None else _EMPTY)
        self.is_val = False

    def _fields(self):
        return (self.bound, self.label)


class AllocTape(_Unary):
    __slots__ = ()


class Pack(_Unary):
    """Runtime no-op: ``pack v`` steps to ``v`` (type erasure)."""

    __slots__ = ()


class Unpack(Expr):
    """``unpack e as x in body``: runtime let (type erasure)."""

    __slots__ = ("packed", "var", "body")
    __match_args__ = ("packed", "var", "body")

    def __init__(self, packed: Expr, var: str, body: Expr):
        self.packed = packed
        self.var = var
        self.body = body
        self._hash = hash(("Unpack", packed._hash, var, body._hash))
        self.fv = packed.fv | (body.fv - {var})
        self.is_val = False

    def _fields(self):
        return (self.packed, self.var, self.body)


class LocV(Expr):
    """Heap location value (runtime only; not parseable source)."""

    __slots__ = ("loc",)
    __match_args__ = ("loc",)

    def __init__(self, loc: int):
        self.loc = loc
        self._hash = hash(("LocV", loc))
        self.fv = _EMPTY
        self.is_val = True

    def _fields(self):
        return (self.loc,)


class LblV(Expr):
    """Tape label value (runtime only; not parseable source)."""

    __slots__ = ("lbl",)
    __match_args__ = ("lbl",)

    def __init__(self, lbl: int):
        self.lbl = lbl
        self._hash = hash(("LblV", lbl))
        self.fv = _EMPTY
        self.is_val = True

    def _fields(self):
        return (self.lbl,)


# -- substitution ----------------------------------------------------------

_fresh_counter = itertools.count()


def _fresh(base: str) -> str:
    return f"{base}%{next(_fresh_counter)}"


def subst(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution of ``v`` for free occurrences of ``x``.

    ``v`` must be a value.  At runtime values are closed, so the renaming
    path is only exercised by hand-built open values.
    """
    if not v.is_val:
        raise ValueError("subst requires a value")
    return _subst(e, x, v)


def _subst(e: Expr, x: str, v: Expr) -> Expr:
    if x not in e.fv:
        return e
    match e:
        case Var(name):
            return v if name == x else e
        case Rec(f, a, body):
            if f == x or a == x:
                return e
            (f, a), body = _avoid(v.fv, (f, a), body)
            return Rec(f, a, _subst(body, x, v))
        case App(fn, arg):
            return App(_subst(fn, x, v), _subst(arg, x, v))
        case BinOp(op, l, r):
            return BinOp(op, _subst(l, x, v), _subst(r, x, v))
        case If(c, t, f_):
            return If(_subst(c, x, v), _subst(t, x, v), _subst(f_, x, v))
        case Pair(l, r):
            return Pair(_subst(l, x, v), _subst(r, x, v))
        case Fst(a):
            return Fst(_subst(a, x, v))
        case Snd(a):
            return Snd(_subst(a, x, v))
        case Inl(a):
            return Inl(_subst(a, x, v))
        case Inr(a):
            return Inr(_subst(a, x, v))
        case Case(s, lv, lb, rv, rb):
            s = _subst(s, x, v)
            if lv != x:
                (lv,), lb = _avoid(v.fv, (lv,), lb)
                lb = _subst(lb, x, v)
            if rv != x:
                (rv,), rb = _avoid(v.fv, (rv,), rb)
                rb = _subst(rb, x, v)
            return Case(s, lv, lb, rv, rb)
        case Alloc(a):
            return Alloc(_subst(a, x, v))
        case Load(a):
            return Load(_subst(a, x, v))
        case Store(l, r):
            return Store(_subst(l, x, v), _subst(r, x, v))
        case Rand(b, lbl):
            return Rand(
                _subst(b, x, v), None if lbl is None else _subst(lbl, x, v)
            )
        case AllocTape(a):
            return AllocTape(_subst(a, x, v))
        case Pack(a):
            return Pack(_subst(a, x, v))
        case Unpack(p, y, body):
            p = _subst(p, x, v)
            if y == x:
                return Unpack(p, y, body)
            (y,), body = _avoid(v.fv, (y,), body)
            return Unpack(p, y, _subst(body, x, v))
        case _:
            raise AssertionError(f"unhandled node {type(e).__name__}")


def _avoid(avoid: frozenset, binders: tuple, body: Expr):
    """Rename ``binders`` of ``body`` away from the name set ``avoid``."""
    if not (avoid & set(binders)):
        return binders, body
    new = []
    for b in binders:
        if b in avoid:
            nb = _fresh(b)
            body = _subst_var(body, b, Var(nb))
            new.append(nb)
        else:
            new.append(b)
    return tuple(new), body


def _subst_var(e: Expr, x: str, v: Var) -> Expr:
    """Substitution specialized to variables (used for alpha-renaming).

    A fresh variable never captures, so a plain structural walk suffices.
    """
    if x not in e.fv:
        return e
    match e:
        case Var(name):
            return v if name == x else e
        case Rec(f, a, body):
            if f == x or a == x:
                return e
            return Rec(f, a, _subst_var(body, x, v))
        case App(fn, arg):
            return App(_subst_var(fn, x, v), _subst_var(arg, x, v))
        case BinOp(op, l, r):
            return BinOp(op, _subst_var(l, x, v), _subst_var(r, x, v))
        case If(c, t, f_):
            return If(
                _subst_var(c, x, v), _subst_var(t, x, v), _subst_var(f_, x, v)
            )
        case Pair(l, r):
            return Pair(_subst_var(l, x, v), _subst_var(r, x, v))
        case Fst(a):
            return Fst(_subst_var(a, x, v))
        case Snd(a):
            return Snd(_subst_var(a, x, v))
        case Inl(a):
            return Inl(_subst_var(a, x, v))
        case Inr(a):
            return Inr(_subst_var(a, x, v))
        case Case(s, lv, lb, rv, rb):
            s = _subst_var(s, x, v)
            lb = lb if lv == x else _subst_var(lb, x, v)
            rb = rb if rv == x else _subst_var(rb, x, v)
            return Case(s, lv, lb, rv, rb)
        case Alloc(a):
            return Alloc(_subst_var(a, x, v))
        case Load(a):
            return Load(_subst_var(a, x, v))
        case Store(l, r):
            return Store(_subst_var(l, x, v), _subst_var(r, x, v))
        case Rand(b, lbl):
            return Rand(
                _subst_var(b, x, v),
                None if lbl is None else _subst_var(lbl, x, v),
            )
        case AllocTape(a):
            return AllocTape(_subst_var(a, x, v))
        case Pack(a):
            return Pack(_subst_var(a, x, v))
        case Unpack(p, y, body):
            p = _subst_var(p, x, v)
            body = body if y == x else _subst_var(body, x, v)
            return Unpack(p, y, body)
        case _:
            raise AssertionError(f"unhandled node {type(e).__name__}")


def check_closed(e: Expr) -> None:
    if e.fv:
        names = ", ".join(sorted(e.fv))
        raise UnboundVariableError(f"unbound variable(s): {names}")


class UnboundVariableError(Exception):
    pass


# -- convenience constructors (used by harness code and tests) -------------


def let(x: str, bound: Expr, body: Expr) -> Expr:
    """``let x = bound in body`` as the application it desugars to."""
    return App(Rec("_", x, body), bound)


def seq(e1: Expr, e2: Expr) -> Expr:
    return let("_", e1, e2)


def lam(x: str, body: Expr) -> Expr:
    return Rec("_", x, body)


def num(n: int) -> Lit:
    return Lit(n)


def app(fn: Expr, *args: Expr) -> Expr:
    for a in args:
        fn = App(fn, a)
    return fn
