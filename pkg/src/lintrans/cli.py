"""Command-line interface: lintrans {analyze,rewrite,entail,saturate,chase,check}."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .analysis import RuleSplitError, build_grd, compute_specializations, is_agrd, longest_path, split_rules
from .checking import run_check
from .datalog import (
    NO,
    UNKNOWN,
    entails_compiled,
    program_lines,
    saturate,
    translate_pattern_set,
    translate_queries,
    ucq_lines,
)
from .kbformat import KBDocument, KBSyntaxError, format_atom, format_kb, format_query, format_rule, parse_kb
from .oracle import chase
from .rewriter import MODIFIED, UNMODIFIED, InvariantViolation, RewriterConfig, compile_rules, rewrite_compiled

EX_OK = 0
EX_NO = 1
EX_UNKNOWN = 2
EX_LIMIT = 3
EX_USAGE = 64
EX_DATAERR = 65
EX_SOFTWARE = 70
EX_IOERR = 74


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EX_USAGE)


class _Fail(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _load(path: str) -> KBDocument:
    try:
        if path == "-":
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise _Fail(EX_IOERR, f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return parse_kb(text)
    except KBSyntaxError as exc:
        raise _Fail(EX_DATAERR, f"{path}: {exc}") from exc
    except ValueError as exc:
        raise _Fail(EX_DATAERR, f"{path}: {exc}") from exc


def _compile(doc: KBDocument):
    try:
        return compile_rules(doc.all_rules())
    except RuleSplitError as exc:
        raise _Fail(EX_DATAERR, str(exc)) from exc


def _config(args) -> RewriterConfig:
    return RewriterConfig(
        getattr(args, "mode", MODIFIED),
        getattr(args, "max_steps", None),
        getattr(args, "max_pcqs", None),
    )


def _split_report(split) -> dict:
    return {
        "linear": [format_rule(r) for r in split.linear],
        "transitivity": [format_rule(r) for r in split.transitivity],
        "transitive": sorted(split.transitive),
        "rejected": [{"rule": format_rule(r), "reason": why} for r, why in split.rejects],
    }


def build_report(doc: KBDocument, config: RewriterConfig, with_answers: bool = True) -> dict:
    """The structured analysis/rewriting report; keys in a fixed order."""
    rules = doc.all_rules()
    split = split_rules(rules)
    notes: list[str] = []
    specs = sorted(compute_specializations(split, notes), key=repr)
    grd = build_grd(rules)
    report: dict = {
        "split": _split_report(split),
        "specializations": {
            "entries": [
                {"q": s.q, "p": s.p, "first": sorted(s.first), "second": sorted(s.second)} for s in specs
            ],
            "notes": notes,
        },
    }
    if not split.ok:
        report["safety"] = None
        report["grd"] = _grd_report(grd)
        report["rewrite_stats"] = []
        report["answers"] = []
        return report
    compiled = compile_rules(rules)
    saf = compiled.safety
    report["safety"] = {
        "safe": saf.safe,
        "pseudo_transitive": list(saf.pseudo_transitive),
        "witness": {q: list(pair) for q, pair in sorted(saf.witness.items())},
        "failing": list(saf.failing),
    }
    report["grd"] = _grd_report(grd)
    stats = []
    answers = []
    saturated = None
    if with_answers:
        saturated = saturate(doc.fact_base(), translate_pattern_set(compiled.pattern_set))
    for q in doc.queries:
        out = rewrite_compiled(q, compiled, config)
        ucq = translate_queries(out.pcqs, out.pattern_set)
        entry = {"query": format_query(q), "termination": out.termination_flag, "complete": out.complete}
        entry.update(out.stats.as_dict())
        entry["pcqs"] = len(out.pcqs)
        entry["ucq"] = ucq_lines(ucq)
        entry["datalog"] = program_lines(translate_pattern_set(out.pattern_set))
        entry["notes"] = out.notes
        stats.append(entry)
        if with_answers:
            ans = entails_compiled(doc.fact_base(), compiled, q, config, saturated)
            answers.append({"query": format_query(q), "verdict": ans.verdict})
    report["rewrite_stats"] = stats
    report["answers"] = answers
    return report


def _grd_report(grd) -> dict:
    return {
        "rules": [format_rule(r) for r in grd.rules],
        "edges": [list(e) for e in sorted(grd.edges)],
        "acyclic": is_agrd(grd),
        "longest_path": longest_path(grd),
    }


def _posset(positions: list[int]) -> str:
    return "{" + ",".join(map(str, positions)) + "}"


# commands -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    doc = _load(args.kb)
    report = build_report(doc, RewriterConfig(), with_answers=False)
    if args.json:
        print(json.dumps(report, indent=2))
        return EX_OK
    sp = report["split"]
    print(f"linear rules: {len(sp['linear'])}")
    print(f"transitivity rules: {len(sp['transitivity'])} ({', '.join(sp['transitive']) or '-'})")
    for rej in sp["rejected"]:
        print(f"rejected: {rej['rule']}  ({rej['reason']})")
    print("specializations:")
    for s in report["specializations"]["entries"]:
        print(f"  {s['q']} of {s['p']} on {{{_posset(s['first'])},{_posset(s['second'])}}}")
    for n in report["specializations"]["notes"]:
        print(f"  note: {n}")
    saf = report["safety"]
    if saf is None:
        print("safety: n/a (rule set outside the linear+transitivity fragment)")
    else:
        print(f"safety: {'safe' if saf['safe'] else 'unsafe'}")
        for q, pair in saf["witness"].items():
            print(f"  witness {q}: positions {pair[0]},{pair[1]}")
        for q in saf["failing"]:
            print(f"  no common position pair for {q}")
    grd = report["grd"]
    print(f"grd: {len(grd['edges'])} edges, {'acyclic' if grd['acyclic'] else 'cyclic'}")
    for i, j in grd["edges"]:
        print(f"  r{i + 1} -> r{j + 1}")
    return EX_OK


def cmd_rewrite(args) -> int:
    doc = _load(args.kb)
    config = _config(args)
    compiled = _compile(doc)
    hit = False
    if args.emit == "json":
        report = build_report(doc, config)
        print(json.dumps(report, indent=2))
        hit = any(e["termination"] == "limit_hit" for e in report["rewrite_stats"])
    else:
        for lines in program_lines(translate_pattern_set(compiled.pattern_set)):
            print(lines)
        for q in doc.queries:
            out = rewrite_compiled(q, compiled, config)
            hit = hit or out.termination_flag == "limit_hit"
            print(f"% query {format_query(q)} termination={out.termination_flag} complete={str(out.complete).lower()}")
            for note in out.notes:
                print(f"% {note}")
            for line in ucq_lines(translate_queries(out.pcqs, out.pattern_set)):
                print(line)
    return EX_LIMIT if hit and config.mode == UNMODIFIED else EX_OK


def cmd_entail(args) -> int:
    doc = _load(args.kb)
    config = _config(args)
    compiled = _compile(doc)
    saturated = saturate(doc.fact_base(), translate_pattern_set(compiled.pattern_set))
    verdicts = []
    for q in doc.queries:
        ans = entails_compiled(doc.fact_base(), compiled, q, config, saturated)
        verdicts.append(ans.verdict)
        print(f"{format_query(q)} % {ans.verdict}")
    if NO in verdicts:
        return EX_NO
    if UNKNOWN in verdicts:
        return EX_UNKNOWN
    return EX_OK


def cmd_saturate(args) -> int:
    doc = _load(args.kb)
    compiled = _compile(doc)
    fb = saturate(doc.fact_base(), translate_pattern_set(compiled.pattern_set))
    for f in fb.sorted():
        print(format_atom(f) + ".")
    return EX_OK


def cmd_chase(args) -> int:
    doc = _load(args.kb)
    state = chase(doc.facts, doc.all_rules(), args.depth)
    print("% round 0")
    for f in sorted(doc.facts):
        print(format_atom(f) + ".")
    for k, added in enumerate(state.rounds, 1):
        print(f"% round {k}")
        for f in added:
            print(format_atom(f) + ".")
    if state.at_fixpoint:
        print(f"% fixpoint after {state.depth} rounds")
    return EX_OK


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    report = run_check(args.seed, args.cases, args.max_terms, args.depth)
    elapsed = time.perf_counter() - t0
    tally = ", ".join(f"{k}={v}" for k, v in sorted(report.tally().items()))
    print(f"cases={len(report.results)} compared={report.counted} disagreements={len(report.disagreements)}")
    print(f"pipeline/oracle: {tally}")
    print(f"elapsed: {elapsed:.1f}s")
    for r in report.disagreements:
        print(f"% counterexample case {r.index}: pipeline={r.pipeline} oracle={r.oracle}")
        if r.error:
            print(f"% error: {r.error}")
        sys.stdout.write(format_kb(r.doc))
    return EX_SOFTWARE if report.disagreements else EX_OK


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def _nonneg(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lintrans", description="Query rewriting for linear rules with transitive predicates.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="rule split, specializations, safety and rule dependencies")
    a.add_argument("kb")
    a.add_argument("--json", action="store_true", help="emit the JSON report")
    a.set_defaults(func=cmd_analyze)

    def rewriting_flags(sp):
        sp.add_argument("--mode", choices=[MODIFIED, UNMODIFIED], default=MODIFIED)
        sp.add_argument("--max-steps", type=_positive, default=None)
        sp.add_argument("--max-pcqs", type=_positive, default=None)

    r = sub.add_parser("rewrite", help="print the Datalog program and the UCQ rewriting")
    r.add_argument("kb")
    rewriting_flags(r)
    r.add_argument("--emit", choices=["datalog", "json"], default="datalog")
    r.set_defaults(func=cmd_rewrite)

    e = sub.add_parser("entail", help="answer every query of the KB")
    e.add_argument("kb")
    rewriting_flags(e)
    e.set_defaults(func=cmd_entail)

    s = sub.add_parser("saturate", help="print the saturated fact base")
    s.add_argument("kb")
    s.set_defaults(func=cmd_saturate)

    c = sub.add_parser("chase", help="print chase facts per round")
    c.add_argument("kb")
    c.add_argument("--depth", type=_nonneg, default=6)
    c.set_defaults(func=cmd_chase)

    k = sub.add_parser("check", help="random cross-check of the pipeline against the chase")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--cases", type=_positive, default=100)
    k.add_argument("--max-terms", type=_positive, default=4)
    k.add_argument("--depth", type=_nonneg, default=6)
    k.set_defaults(func=cmd_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"lintrans: {exc}", file=sys.stderr)
        return exc.code
    except InvariantViolation as exc:
        print(f"lintrans: internal invariant violated: {exc}", file=sys.stderr)
        return EX_SOFTWARE


if __name__ == "__main__":
    sys.exit(main())
