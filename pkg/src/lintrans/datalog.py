"""Datalog translation of pattern sets, fact-base saturation and CQ evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .canonical import canonical_copy, canonicalize
from .model import VAR, M1, M2, Atom, ConjunctiveQuery, ExistentialRule, FactBase, Term, var
from .patterns import PatternCQ, PatternSet

TC_SUFFIX = "__tc"

YES = "yes"
NO = "no"
UNKNOWN = "unknown"


def tc_name(pred: str) -> str:
    return pred + TC_SUFFIX


@dataclass(frozen=True)
class DatalogRule:
    body: tuple[Atom, ...]
    head: Atom

    def __post_init__(self) -> None:
        body_vars = {t for a in self.body for t in a.args if t.kind == VAR}
        if not {t for t in self.head.args if t.kind == VAR} <= body_vars:
            raise ValueError(f"head variables of {self!r} must occur in the body")

    def __repr__(self) -> str:
        return f"{format_atom(self.head)} :- {', '.join(format_atom(a) for a in self.body)}."


@dataclass(frozen=True)
class DatalogProgram:
    rules: tuple[DatalogRule, ...]
    closure_predicates: tuple[str, ...]

    def step_rules(self) -> list[DatalogRule]:
        return [r for r in self.rules if not _is_closure_rule(r)]

    def lines(self) -> list[str]:
        return sorted(repr(r) for r in self.rules)


def _is_closure_rule(r: DatalogRule) -> bool:
    return len(r.body) == 2 and all(a.pred == r.head.pred for a in r.body) and r.head.pred.endswith(TC_SUFFIX)


def format_atom(a: Atom) -> str:
    return f"{a.pred}({','.join(t.name for t in a.args)})"


def translate_pattern_set(ps: PatternSet) -> DatalogProgram:
    """A closure rule per pattern plus one rule per definition atom."""
    x, y, z = var("X"), var("Y"), var("Z")
    rules = []
    preds = []
    for d in ps.definitions():
        tc = tc_name(d.predicate)
        preds.append(tc)
        rules.append(DatalogRule((Atom(tc, (x, z)), Atom(tc, (z, y))), Atom(tc, (x, y))))
        for a in d.atoms:
            rules.append(DatalogRule((a.substitute({M1: x, M2: y}),), Atom(tc, (x, y))))
    return DatalogProgram(tuple(rules), tuple(preds))


def translate_pcq(q: PatternCQ, ps: PatternSet) -> ConjunctiveQuery:
    atoms = set(q.atoms)
    for r in q.repeatables:
        atoms.add(Atom(tc_name(ps[r.name].predicate), (r.t1, r.t2)))
    return ConjunctiveQuery(atoms)


def translate_queries(pcqs: Iterable[PatternCQ], ps: PatternSet) -> list[ConjunctiveQuery]:
    out: dict[tuple, ConjunctiveQuery] = {}
    for q in pcqs:
        cq = canonical_copy(translate_pcq(q, ps))
        out.setdefault(canonicalize(cq), cq)
    return list(out.values())


def match_atom(pattern: Atom, fact: Atom, binding: dict[Term, Term]) -> dict[Term, Term] | None:
    if pattern.pred != fact.pred or len(pattern.args) != len(fact.args):
        return None
    out = binding
    copied = False
    for s, t in zip(pattern.args, fact.args):
        if s.kind == VAR:
            bound = out.get(s)
            if bound is None:
                if not copied:
                    out = dict(out)
                    copied = True
                out[s] = t
            elif bound != t:
                return None
        elif s != t:
            return None
    return out


def _candidates(a: Atom, fb: FactBase, binding: dict[Term, Term]) -> set[Atom]:
    best = None
    for i, t in enumerate(a.args):
        v = binding.get(t, t) if t.kind == VAR else t
        if v.kind == VAR:
            continue
        s = fb.with_arg(a.pred, i, v)
        if best is None or len(s) < len(best):
            best = s
            if not best:
                break
    return fb.with_pred(a.pred) if best is None else best


def iter_homomorphisms(
    atoms: Iterable[Atom], fb: FactBase, binding: dict[Term, Term] | None = None
) -> Iterator[dict[Term, Term]]:
    """Homomorphisms mapping the atoms into fb, constants fixed.

    Backtracking picks the atom with the fewest candidate facts first.
    """
    remaining = list(atoms)
    start = dict(binding or {})

    def go(rem: list[Atom], b: dict[Term, Term]) -> Iterator[dict[Term, Term]]:
        if not rem:
            yield b
            return
        best_i, best_c = 0, None
        for i, a in enumerate(rem):
            c = _candidates(a, fb, b)
            if best_c is None or len(c) < len(best_c):
                best_i, best_c = i, c
                if not c:
                    return
        a = rem[best_i]
        rest = rem[:best_i] + rem[best_i + 1 :]
        for f in sorted(best_c):
            nb = match_atom(a, f, b)
            if nb is not None:
                yield from go(rest, nb)

    yield from go(remaining, start)


def evaluate_cq(q: ConjunctiveQuery | Iterable[Atom], fb: FactBase) -> bool:
    atoms = q.atoms if isinstance(q, ConjunctiveQuery) else q
    return next(iter_homomorphisms(atoms, fb), None) is not None


def saturate(fb: FactBase, prog: DatalogProgram) -> FactBase:
    """One pass of the step rules, then transitive closure of every closure predicate."""
    out = fb.copy()
    for rule in prog.step_rules():
        (body,) = rule.body
        for f in sorted(fb.with_pred(body.pred)):
            b = match_atom(body, f, {})
            if b is not None:
                out.add(rule.head.substitute(b))
    for tc in prog.closure_predicates:
        succ: dict[Term, set[Term]] = {}
        for f in out.with_pred(tc):
            succ.setdefault(f.args[0], set()).add(f.args[1])
        for src in sorted(succ):
            seen: set[Term] = set()
            todo = list(succ[src])
            while todo:
                n = todo.pop()
                if n in seen:
                    continue
                seen.add(n)
                todo.extend(succ.get(n, ()))
            for dst in seen:
                out.add(Atom(tc, (src, dst)))
    return out


def program_lines(prog: DatalogProgram) -> list[str]:
    return prog.lines()


def ucq_lines(cqs: Iterable[ConjunctiveQuery]) -> list[str]:
    return sorted("? :- " + ", ".join(format_atom(a) for a in sorted(q.atoms)) + "." for q in cqs)


@dataclass
class Answer:
    verdict: str
    ucq_size: int
    termination: str
    complete: bool
    witness: ConjunctiveQuery | None = None


def entails_compiled(fb: FactBase, compiled, q: ConjunctiveQuery, config=None, saturated: FactBase | None = None) -> Answer:
    from .rewriter import RewriterConfig, rewrite_compiled

    config = config or RewriterConfig()
    out = rewrite_compiled(q, compiled, config)
    if saturated is None:
        saturated = saturate(fb, translate_pattern_set(out.pattern_set))
    ucq = translate_queries(out.pcqs, out.pattern_set)
    for cq in ucq:
        if evaluate_cq(cq, saturated):
            return Answer(YES, len(ucq), out.termination_flag, out.complete, cq)
    verdict = NO if out.complete else UNKNOWN
    return Answer(verdict, len(ucq), out.termination_flag, out.complete)


def entails(fb: FactBase, rules: Iterable[ExistentialRule], q: ConjunctiveQuery, config=None) -> str:
    """yes / no / unknown for F, R |= Q via rewriting and saturation."""
    from .rewriter import compile_rules

    return entails_compiled(fb, compile_rules(rules), q, config).verdict
