"""Concrete-syntax printer. ``parse(print_expr(e)) == e`` for source ASTs."""

from __future__ import annotations

from . import syntax as S

# precedence levels, matching the parser
_SEQ = 0
_STORE = 1
_CMP = 2
_ADD = 3
_MUL = 4
_APP = 5
_UNARY = 6
_ATOM = 7

_OP_LEVEL = {
    "=": _CMP, "!=": _CMP, "<": _CMP, "<=": _CMP, ">": _CMP, ">=": _CMP,
    "+": _ADD, "-": _ADD,
    "*": _MUL, "div": _MUL, "mod": _MUL,
}


def print_expr(e: S.Expr) -> str:
    return _pr(e, _SEQ)


def _paren(s: str, level: int, minlevel: int) -> str:
    return s if level >= minlevel else f"({s})"


def _pr(e: S.Expr, min_level: int) -> str:
    match e:
        case S.Lit(None):
            return "()"
        case S.Lit(True):
            return "true"
        case S.Lit(False):
            return "false"
        case S.Lit(n):
            # negative literals parse at operand level, not as atoms
            return _paren(str(n), _ADD, min_level) if n < 0 else str(n)
        case S.Var(x):
            return x
        case S.LocV(l):
            return f"<loc {l}>"
        case S.LblV(l):
            return f"<tape {l}>"
        case S.App(S.Rec("_", x, body), arg):
            s = f"let {x} = {_pr(arg, _SEQ)} in {_pr(body, _SEQ)}"
            return _paren(s, 0, min_level)
        case S.Rec("_", x, body):
            s = f"fun {x} -> {_pr(body, _SEQ)}"
            return _paren(s, 0, min_level)
        case S.Rec(f, x, body):
            s = f"rec {f} {x} = {_pr(body, _SEQ)}"
            return _paren(s, 0, min_level)
        case S.App(fn, arg):
            s = f"{_pr(fn, _APP)} {_pr(arg, _UNARY)}"
            return _paren(s, _APP, min_level)
        case S.BinOp(op, l, r):
            lv = _OP_LEVEL[op]
            # left-assoc chains for arithmetic; comparisons non-assoc
            if lv == _CMP:
                s = f"{_pr(l, lv + 1)} {op} {_pr(r, lv + 1)}"
            else:
                s = f"{_pr(l, lv)} {op} {_pr(r, lv + 1)}"
            return _paren(s, lv, min_level)
        case S.If(c, t, f):
            s = f"if {_pr(c, _SEQ)} then {_pr(t, _SEQ)} else {_pr(f, _SEQ)}"
            return _paren(s, 0, min_level)
        case S.Pair(l, r):
            return f"({_pr(l, _SEQ)}, {_pr(r, _SEQ)})"
        case S.Fst(a):
            return _paren(f"fst {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Snd(a):
            return _paren(f"snd {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Inl(a):
            return _paren(f"inl {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Inr(a):
            return _paren(f"inr {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Case(s0, lv_, lb, rv, rb):
            s = (
                f"match {_pr(s0, _SEQ)} with"
                f" inl {lv_} -> {_pr(lb, _SEQ)}"
                f" | inr {rv} -> {_pr(rb, _SEQ)} end"
            )
            return s
        case S.Alloc(a):
            return _paren(f"alloc {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Load(a):
            return _paren(f"!{_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Store(l, r):
            s = f"{_pr(l, _CMP)} <- {_pr(r, _STORE)}"
            return _paren(s, _STORE, min_level)
        case S.Rand(b, None):
            return _paren(f"rand {_pr(b, _UNARY)}", _UNARY, min_level)
        case S.Rand(b, lbl):
            s = f"rand {_pr(b, _ATOM)} @ {_pr(lbl, _ATOM)}"
            return _paren(s, _UNARY, min_level)
        case S.AllocTape(a):
            return _paren(f"alloctape {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Pack(a):
            return _paren(f"pack {_pr(a, _UNARY)}", _UNARY, min_level)
        case S.Unpack(p, x, body):
            s = f"unpack {_pr(p, _SEQ)} as {x} in {_pr(body, _SEQ)}"
            return _paren(s, 0, min_level)
        case _:
            raise AssertionError(f"unprintable node {type(e).__name__}")
