"""Command-line interface.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or input
error.  Numeric output is printed both as an exact rational and as a
12-digit decimal; only the rationals enter any verdict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from fractions import Fraction
from importlib import resources

from . import cases, rules
from .coupling import (
    InvalidInstance, SupportTooLarge, arcoupl_check, query_from_json,
    verdict_to_json,
)
from .dist import ProbError, tv_distance
from .parser import ParseError
from .prelude import LinkError, load_program_text
from .printer import print_expr
from .semantics import Cfg, State, exec_approx, pexec_n
from .syntax import UnboundVariableError


def _fmt(x: Fraction) -> str:
    return f"{x} (~{float(x):.12f})"


def _read_source(path: str) -> str:
    if os.path.exists(path):
        with open(path) as fh:
            return fh.read()
    asset = resources.files("randml") / "assets" / path
    if asset.is_file():
        return asset.read_text()
    raise FileNotFoundError(f"no such file or bundled asset: {path}")


def _load_main(path: str, main_text: str | None):
    from .parser import parse
    from .prelude import link, link_defs, prelude_env

    defs, main = load_program_text(_read_source(path))
    if main_text is not None:
        main = link(parse(main_text), defs)
    if main is None:
        raise LinkError(
            f"{path} has no main expression; supply one with --main"
        )
    if main.fv:
        raise LinkError(f"unbound names: {sorted(main.fv)}")
    return main


def _case_budget() -> int:
    raw = os.environ.get("RANDML_CASE_BUDGET")
    return int(raw) if raw else cases.DEFAULT_CASE_BUDGET


# -- subcommands -----------------------------------------------------------


def cmd_dist(args) -> int:
    main = _load_main(args.file, args.main)
    if args.trace:
        d = pexec_n(Cfg(main, State()), 0)
        for k in range(args.n_max + 1):
            entries = d.items()
            print(f"step {k}: {len(entries)} configuration(s)")
            for cfg, w in entries[:args.trace_width]:
                print(f"  {_fmt(w)}  {print_expr(cfg.expr)}")
            if len(entries) > args.trace_width:
                print(f"  ... {len(entries) - args.trace_width} more")
            if all(c.expr.is_val for c in d.support()):
                break
            if k < args.n_max:
                d = pexec_n(Cfg(main, State()), k + 1)
    res = exec_approx(Cfg(main, State()), args.n_max)
    if args.json:
        def frac(p):
            return {"num": str(p.numerator), "den": str(p.denominator)}

        print(json.dumps({
            "dist": res.dist.to_json(print_expr),
            "residual": frac(res.residual),
            "stuck_mass": frac(res.stuck_mass),
            "steps": res.steps,
        }, indent=2))
        return 0
    for v, p in res.dist.items():
        print(f"{print_expr(v)}\t{_fmt(p)}")
    print(f"residual: {_fmt(res.residual)}")
    print(f"termination probability (lower bound): {_fmt(res.dist.mass())}")
    return 0


def cmd_compare(args) -> int:
    m1 = _load_main(args.file_a, args.main_a)
    m2 = _load_main(args.file_b, args.main_b)
    r1 = exec_approx(Cfg(m1, State()), args.n_max)
    r2 = exec_approx(Cfg(m2, State()), args.n_max)
    tv = tv_distance(r1.dist, r2.dist)
    print(f"tv distance: {_fmt(tv)}")
    print(f"residual A: {_fmt(r1.residual)}")
    print(f"residual B: {_fmt(r2.residual)}")
    if args.eps is None:
        return 0
    eps = Fraction(args.eps)
    slack = r1.residual + r2.residual
    within = tv <= eps + slack
    print(f"within({eps}) given residual slack {_fmt(slack)}: {within}")
    return 0 if within else 1


def cmd_coupling(args) -> int:
    with open(args.query) as fh:
        q = query_from_json(json.load(fh))
    verdict = arcoupl_check(q)
    if args.json:
        print(json.dumps(verdict_to_json(verdict), indent=2))
    else:
        print(f"holds: {verdict.holds}")
        print(f"max violation: {_fmt(verdict.max_violation)}")
        print(f"epsilon: {_fmt(Fraction(q.epsilon))}")
        print(f"witness set: {verdict.witness_set}")
    return 0 if verdict.holds else 1


def _run_rule_instance(inst: dict) -> tuple[str, dict | None]:
    """Returns (outcome, report json); outcome is holds/fails/error."""
    rule = inst["rule"]
    f = {a: b for a, b in inst.get("f", [])}
    eps = (
        Fraction(int(inst["epsilon"]["num"]), int(inst["epsilon"]["den"]))
        if "epsilon" in inst else Fraction(0)
    )
    try:
        if rule == "rand-rand-le":
            rep = rules.validate_rand_rand_le(inst["n"], inst["m"], f)
        elif rule == "rand-rand-ge":
            rep = rules.validate_rand_rand_ge(inst["n"], inst["m"], f)
        elif rule == "many-to-one":
            rep = rules.validate_many_to_one(inst["n"], inst["p"])
        elif rule == "fragmented":
            rep = rules.validate_fragmented(inst["n"], inst["m"], f, eps)
        elif rule == "tape-tape-append":
            rep = _tape_tape_instance(inst, eps)
        elif rule == "erasability":
            rep = _erasability_instance(inst)
        else:
            raise InvalidInstance(f"unknown rule {rule!r}")
    except (InvalidInstance, ProbError, ValueError) as ex:
        return "error", {"error": str(ex)}
    return ("holds" if rep.ok else "fails"), rep.to_json()


def _tape_tape_instance(inst, eps):
    from .coupling import FiniteRelation
    from .dist import uniform_lists

    n, m, p, q = inst["n"], inst["m"], inst["p"], inst["q"]
    kind = inst.get("relation", "identity")
    if kind == "identity":
        rel = FiniteRelation.equality(uniform_lists(n + 1, p).support())
    elif kind == "decoder":
        rel = FiniteRelation(
            (digits, (rules.decoder(n, list(digits)),))
            for digits in uniform_lists(n + 1, p).support()
        )
    else:
        raise InvalidInstance(f"unknown relation kind {kind!r}")
    return rules.validate_tape_tape_append(n, m, p, q, rel, eps)


def _erasability_instance(inst):
    bound = inst.get("bound", 2)
    n_max = inst.get("n_max", 8)
    lbl, sigma = State().alloc_tape(bound)
    control = inst.get("control", "state-step")
    if control == "state-step":
        from .semantics import state_step

        mu = state_step(sigma, lbl)
    elif control == "fixed-value":
        mu = rules.fixed_append_dist(sigma, lbl, 0)
    else:
        raise InvalidInstance(f"unknown control {control!r}")
    corpus = rules.apply_corpus(rules.load_corpus(), lbl, bound)
    rep = rules.erasability_check(mu, sigma, corpus, n_max)
    return rules.RuleReport(
        "erasability", {"bound": bound, "control": control}, rep.ok,
        {"counterexamples": [list(c) for c in rep.counterexamples]},
    )


def cmd_rules(args) -> int:
    if args.manifest is None or args.manifest == "default":
        text = (
            resources.files("randml") / "assets" / "manifests"
            / "default.toml"
        ).read_text()
    else:
        with open(args.manifest) as fh:
            text = fh.read()
    manifest = tomllib.loads(text)
    failures = 0
    for inst in manifest.get("instance", []):
        expect = inst.get("expect", "holds")
        outcome, rep = _run_rule_instance(inst)
        ok = outcome == expect
        failures += not ok
        tag = "PASS" if ok else "FAIL"
        print(f"{tag} {inst['rule']}: expected {expect}, got {outcome}")
        if args.json and rep is not None:
            print(json.dumps(rep, indent=2))
    return 0 if failures == 0 else 1


def _parse_shape(text: str):
    shape = json.loads(text)

    def chk(s):
        if isinstance(s, int):
            return s
        if isinstance(s, list):
            return [chk(c) for c in s]
        raise ValueError(f"bad tree shape element {s!r}")

    return chk(shape)


def cmd_case(args) -> int:
    budget = _case_budget()
    name = args.name
    if name == "many-to-one":
        report = cases.run_many_to_one_prog(args.n_max, args.n, args.p)
    elif name == "rejection":
        report = cases.run_rejection(args.n, args.m, args.rounds)
    elif name == "dice":
        report = cases.run_dice(args.rounds)
    elif name == "switching-weak":
        report = cases.run_switching_weak(args.n, args.q, budget)
    elif name == "switching-transcript":
        report = cases.run_switching_transcript(args.n, args.q, budget)
    elif name == "cpa":
        msgs = [int(x) for x in args.msgs.split(",")] if args.msgs else []
        report = cases.run_cpa(args.n, args.q, msgs, budget)
    elif name == "bptree":
        spec = cases.TreeSpec(args.m, _parse_shape(args.shape))
        report = cases.run_bptree(spec, args.rounds)
    elif name == "bptree-insert":
        spec = cases.TreeSpec(args.m, _parse_shape(args.shape))
        report = cases.insert_and_resample(spec, args.payload, args.rounds)
    else:
        raise InvalidInstance(f"unknown case {name!r}")
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        verdict = {True: "pass", False: "FAIL", None: "inconclusive"}
        print(f"case:     {report.case} {report.params}")
        if report.computed is not None:
            print(f"computed: {_fmt(report.computed)}")
        if report.bound is not None:
            print(f"bound:    {_fmt(report.bound)}")
        if report.residual is not None:
            print(f"residual: {_fmt(report.residual)}")
        print(f"verdict:  {verdict[report.verdict]}")
    return 0 if report.verdict else 1


def cmd_corpus(args) -> int:
    from .semantics import state_step

    lbl, sigma = State().alloc_tape(args.bound)
    corpus = rules.apply_corpus(rules.load_corpus(), lbl, args.bound)
    rep = rules.erasability_check(
        state_step(sigma, lbl), sigma, corpus, args.n_max
    )
    for name, _ in corpus:
        bad = any(c[0] == name for c in rep.counterexamples)
        print(f"{'FAIL' if bad else 'PASS'} {name}")
    neg = rules.erasability_check(
        rules.fixed_append_dist(sigma, lbl, 0), sigma, corpus, args.n_max
    )
    print(f"{'PASS' if not neg.ok else 'FAIL'} negative control "
          f"(fixed-value append must not be erasable)")
    return 0 if rep.ok and not neg.ok else 1


# -- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="randml",
        description="Exact distribution and coupling workbench for a "
        "probabilistic language with presampling tapes.",
        epilog="Precedence: command-line flags override manifest values, "
        "which override built-in defaults.  RANDML_ENUM_LIMIT bounds the "
        "coupling subset enumeration; RANDML_CASE_BUDGET bounds case-study "
        "path enumeration.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="exact distribution of a program")
    p.add_argument("file", help="source file, or a bundled asset path")
    p.add_argument("-n", "--n-max", type=int, default=2000)
    p.add_argument("--main", help="driver expression over the file's defs")
    p.add_argument("--json", action="store_true")
    p.add_argument("--trace", action="store_true",
                   help="print weighted configurations per step")
    p.add_argument("--trace-width", type=int, default=16)
    p.set_defaults(fn=cmd_dist)

    p = sub.add_parser("compare", help="total variation of two programs")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.add_argument("-n", "--n-max", type=int, default=2000)
    p.add_argument("--main-a")
    p.add_argument("--main-b")
    p.add_argument("--eps", help="verdict threshold, e.g. 1/1024")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("coupling", help="decide a coupling query")
    p.add_argument("query", help="JSON query file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_coupling)

    p = sub.add_parser("rules", help="validate a rule-instance manifest")
    p.add_argument("manifest", nargs="?",
                   help="TOML manifest (default: bundled)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_rules)

    p = sub.add_parser("case", help="run a case study")
    p.add_argument("name", choices=[
        "many-to-one", "rejection", "dice", "switching-weak",
        "switching-transcript", "cpa", "bptree", "bptree-insert",
    ])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--msgs", help="comma-separated plaintexts")
    p.add_argument("--shape", default="[[0,1],[2,3,4],[5]]",
                   help="tree shape as nested JSON lists of payloads")
    p.add_argument("--payload", type=int, default=9)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_case)

    p = sub.add_parser("corpus", help="run the erasability corpus")
    p.add_argument("--bound", type=int, default=2)
    p.add_argument("-n", "--n-max", type=int, default=8)
    p.set_defaults(fn=cmd_corpus)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, LinkError, UnboundVariableError, InvalidInstance,
            SupportTooLarge, ProbError, FileNotFoundError,
            json.JSONDecodeError, tomllib.TOMLDecodeError, KeyError,
            ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
