"""Concrete-syntax parser for the object language.

The grammar is ML-flavoured; `let`, `;`, `fun`, `&&`, `||` and `for` loops
are parse-time sugar over the core constructs, so the evaluator only ever
sees the core step relation.  Top-level files are a sequence of
``let name = expr;;`` definitions optionally followed by a main expression.
"""

from __future__ import annotations

import re

from . import syntax as S
from .syntax import (
    Alloc, AllocTape, App, BinOp, Case, Expr, Fst, If, Inl, Inr, Lit, Load,
    Pack, Pair, Rand, Rec, Snd, Store, Unpack, Var,
)


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


KEYWORDS = {
    "let", "rec", "in", "fun", "if", "then", "else", "match", "with",
    "inl", "inr", "end", "fst", "snd", "alloc", "alloctape", "rand",
    "pack", "unpack", "as", "for", "to", "do", "done", "true", "false",
    "div", "mod",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<int>\d+)
  | (?P<name>%?[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>;;|->|<-|\|\||&&|!=|<=|>=|[()!;,@=<>+\-*|])
    """,
    # the optional % prefix admits compiler-generated names on reparse

    re.VERBOSE,
)


def tokenize(source: str) -> list[tuple[str, str, int, int]]:
    toks = []
    line, col, pos = 1, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            if kind == "name" and text in KEYWORDS:
                kind = text
            elif kind == "sym":
                kind = text
            toks.append((kind, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    toks.append(("eof", "", line, col))
    return toks


_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
# match/for are closed by `end`/`done`, so they parse at atom level
_ATOM_START = ("int", "name", "true", "false", "(", "match", "for")
_UNARY_START = _ATOM_START + (
    "!", "fst", "snd", "inl", "inr", "alloc", "alloctape", "rand", "pack",
)


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    def peek(self) -> str:
        return self.toks[self.i][0]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str):
        t = self.next()
        if t[0] != kind:
            raise ParseError(f"expected {kind!r}, found {t[1]!r}", t[2], t[3])
        return t

    def err(self, msg: str):
        t = self.toks[self.i]
        raise ParseError(msg, t[2], t[3])

    def name(self) -> str:
        t = self.next()
        if t[0] != "name":
            raise ParseError(f"expected identifier, found {t[1]!r}", t[2], t[3])
        return t[1]

    # -- grammar -----------------------------------------------------------

    def expr(self) -> Expr:
        k = self.peek()
        if k in ("let", "fun", "rec", "if", "unpack"):
            return self.open_form()
        return self.seq_expr()

    def open_form(self) -> Expr:
        kind, _, line, col = self.next()
        if kind == "let":
            if self.peek() == "rec":
                self.next()
                f = self.name()
                x = self.name()
                self.expect("=")
                fn_body = self.expr()
                self.expect("in")
                body = self.expr()
                return App(Rec("_", f, body), Rec(f, x, fn_body))
            x = self.name()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return App(Rec("_", x, body), bound)
        if kind == "fun":
            x = self.name()
            self.expect("->")
            return Rec("_", x, self.expr())
        if kind == "rec":
            f = self.name()
            x = self.name()
            self.expect("=")
            return Rec(f, x, self.expr())
        if kind == "if":
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            return If(c, t, self.expr())
        if kind == "unpack":
            packed = self.expr()
            self.expect("as")
            x = self.name()
            self.expect("in")
            return Unpack(packed, x, self.expr())
        raise ParseError(f"unexpected {kind!r}", line, col)  # pragma: no cover

    def _match_form(self) -> Expr:
        scrut = self.expr()
        self.expect("with")
        self.expect("inl")
        lv = self.name()
        self.expect("->")
        lb = self.expr()
        self.expect("|")
        self.expect("inr")
        rv = self.name()
        self.expect("->")
        rb = self.expr()
        self.expect("end")
        return Case(scrut, lv, lb, rv, rb)

    def _for_form(self) -> Expr:
        x = self.name()
        self.expect("=")
        lo = self.expr()
        self.expect("to")
        hi = self.expr()
        self.expect("do")
        body = self.expr()
        self.expect("done")
        # desugars to a tail-recursive loop; bound evaluated once
        loop = Rec(
            "%loop",
            x,
            If(
                BinOp("<=", Var(x), Var("%hi")),
                S.seq(body, App(Var("%loop"), BinOp("+", Var(x), Lit(1)))),
                S.UNIT,
            ),
        )
        return App(Rec("_", "%hi", App(loop, lo)), hi)

    def seq_expr(self) -> Expr:
        e = self.store_expr()
        if self.peek() == ";":
            self.next()
            return S.seq(e, self.expr())
        return e

    def store_expr(self) -> Expr:
        e = self.or_expr()
        if self.peek() == "<-":
            self.next()
            return Store(e, self.store_expr())
        return e

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.peek() == "||":
            self.next()
            e = If(e, S.TRUE, self.and_expr())
        return e

    def and_expr(self) -> Expr:
        e = self.cmp_expr()
        while self.peek() == "&&":
            self.next()
            e = If(e, self.cmp_expr(), S.FALSE)
        return e

    def cmp_expr(self) -> Expr:
        e = self.add_expr()
        if self.peek() in _CMP_OPS:
            op = self.next()[0]
            e = BinOp(op, e, self.add_expr())
        return e

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.peek() in ("+", "-"):
            op = self.next()[0]
            e = BinOp(op, e, self.mul_expr())
        return e

    def mul_expr(self) -> Expr:
        e = self.app_expr()
        while self.peek() in ("*", "div", "mod"):
            op = self.next()[0]
            e = BinOp(op, e, self.app_expr())
        return e

    def app_expr(self) -> Expr:
        e = self.unary()
        while self.peek() in _UNARY_START:
            e = App(e, self.unary())
        return e

    def unary(self) -> Expr:
        k = self.peek()
        if k == "!":
            self.next()
            return Load(self.unary())
        if k in ("fst", "snd", "inl", "inr", "alloc", "alloctape", "pack"):
            self.next()
            ctor = {
                "fst": Fst, "snd": Snd, "inl": Inl, "inr": Inr,
                "alloc": Alloc, "alloctape": AllocTape, "pack": Pack,
            }[k]
            return ctor(self.unary())
        if k == "rand":
            self.next()
            bound = self.unary()
            if self.peek() == "@":
                self.next()
                return Rand(bound, self.atom())
            return Rand(bound)
        return self.atom()

    def atom(self) -> Expr:
        kind, text, line, col = self.next()
        if kind == "int":
            return Lit(int(text))
        if text == "-":
            # negative literal; only reachable in operand position, so
            # binary subtraction is unaffected
            k2, t2, l2, c2 = self.next()
            if k2 != "int":
                raise ParseError(f"expected integer after '-', got {t2!r}",
                                 l2, c2)
            return Lit(-int(t2))
        if kind == "true":
            return S.TRUE
        if kind == "false":
            return S.FALSE
        if kind == "name":
            return Var(text)
        if kind == "match":
            return self._match_form()
        if kind == "for":
            return self._for_form()
        if kind == "(":
            if self.peek() == ")":
                self.next()
                return S.UNIT
            e = self.expr()
            if self.peek() == ",":
                self.next()
                e = Pair(e, self.expr())
            self.expect(")")
            return e
        raise ParseError(f"unexpected {text!r}", line, col)

    # -- top level ---------------------------------------------------------

    def program(self) -> tuple[dict[str, Expr], Expr | None]:
        defs: dict[str, Expr] = {}
        main: Expr | None = None
        while self.peek() != "eof":
            if self.peek() == "let" and self._is_toplevel_def():
                self.next()
                if self.peek() == "rec":
                    self.next()
                    f = self.name()
                    x = self.name()
                    self.expect("=")
                    body = self.expr()
                    defs[f] = Rec(f, x, body)
                else:
                    name = self.name()
                    self.expect("=")
                    defs[name] = self.expr()
                self.expect(";;")
            else:
                main = self.expr()
                if self.peek() == ";;":
                    self.next()
                if self.peek() != "eof":
                    self.err("trailing input after main expression")
        return defs, main

    def _is_toplevel_def(self) -> bool:
        """A `let` at top level is a definition iff a `;;` is reached before
        the `in` belonging to this `let` (nested let/unpack pairs tracked)."""
        depth = 0
        pending = 0
        for j in range(self.i + 1, len(self.toks)):
            kind = self.toks[j][0]
            if kind == "(":
                depth += 1
            elif kind == ")":
                depth -= 1
            elif depth == 0:
                if kind in ("let", "unpack"):
                    pending += 1
                elif kind == "in":
                    if pending == 0:
                        return False
                    pending -= 1
                elif kind == ";;":
                    return True
        return False


def parse(source: str) -> Expr:
    """Parse a single expression."""
    p = _Parser(source)
    e = p.expr()
    if p.peek() != "eof":
        p.err("trailing input")
    return e


def parse_program(source: str) -> tuple[dict[str, Expr], Expr | None]:
    """Parse a file: named ``let name = e;;`` definitions plus optional main
    expression.  Definitions may refer to earlier ones in the same file."""
    return _Parser(source).program()
