"""Loading and linking of object-language source files.

Linking is substitution: every definition in a file must reduce, after the
definitions before it are substituted in, to a closed value.  Substituting
closed values costs no evaluation steps, so linked programs have the same
step counts as hand-inlined ones.
"""

from __future__ import annotations

from functools import cache
from importlib import resources

from .parser import parse_program
from .syntax import Expr, subst


class LinkError(Exception):
    pass


def link(e: Expr, env: dict[str, Expr]) -> Expr:
    """Substitute the closed-value bindings of ``env`` into ``e``."""
    for name in sorted(e.fv & env.keys()):
        e = subst(e, name, env[name])
    return e


def link_defs(defs: dict[str, Expr], base: dict[str, Expr] | None = None,
              ) -> dict[str, Expr]:
    """Resolve a definition list against ``base`` and earlier entries."""
    linked = dict(base or {})
    for name, body in defs.items():
        body = link(body, linked)
        if not body.is_val:
            raise LinkError(f"definition {name!r} is not a value")
        if body.fv:
            raise LinkError(
                f"definition {name!r} has unbound names {sorted(body.fv)}"
            )
        linked[name] = body
    return linked


def _asset_text(relpath: str) -> str:
    return (resources.files("randml") / "assets" / relpath).read_text()


@cache
def prelude_env() -> dict[str, Expr]:
    defs, main = parse_program(_asset_text("prelude.rml"))
    if main is not None:
        raise LinkError("library file has a main expression")
    return link_defs(defs)


def load_program_text(source: str) -> tuple[dict[str, Expr], Expr | None]:
    """Parse and link a program against the standard library.

    Returns the fully linked definition environment and the linked main
    expression, if any.
    """
    defs, main = parse_program(source)
    env = link_defs(defs, prelude_env())
    if main is not None:
        main = link(main, env)
        if main.fv:
            raise LinkError(f"unbound names in program: {sorted(main.fv)}")
    return env, main


def load_asset_program(name: str) -> tuple[dict[str, Expr], Expr | None]:
    """Load a bundled program by its path under the package assets."""
    return load_program_text(_asset_text(name))
