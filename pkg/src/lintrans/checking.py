"""Random safe KBs and the pipeline-versus-chase cross-check."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .analysis import is_safe, split_rules, transitivity_rule
from .datalog import NO, YES, entails_compiled
from .kbformat import KBDocument
from .model import CONST, VAR, Atom, ConjunctiveQuery, ExistentialRule, FactBase, Term
from .oracle import NO_TERMINATED, chase, is_null, oracle_entails
from .rewriter import InvariantViolation, RewriterConfig, compile_rules


@dataclass(frozen=True)
class GeneratorBounds:
    max_predicates: int = 4
    max_arity: int = 3
    max_linear_rules: int = 5
    max_transitive: int = 2
    max_terms: int = 4
    max_query_atoms: int = 3


def _v(i: int) -> Term:
    return Term(VAR, f"X{i}")


def _random_rule(rng: random.Random, preds: list[tuple[str, int]]) -> ExistentialRule:
    bp, ba = rng.choice(preds)
    hp, ha = rng.choice(preds)
    pool = rng.randint(1, ba)
    body = Atom(bp, tuple(_v(rng.randrange(pool)) for _ in range(ba)))
    body_vars = sorted(set(body.args))
    args = []
    n_ex = 0
    for _ in range(ha):
        if rng.random() < 0.3:
            args.append(Term(VAR, f"E{n_ex}"))
            n_ex += 1 if rng.random() < 0.7 else 0
        else:
            args.append(rng.choice(body_vars))
    return ExistentialRule((body,), (Atom(hp, tuple(args)),))


def random_safe_kb(rng: random.Random, bounds: GeneratorBounds = GeneratorBounds()) -> KBDocument:
    """A safe linear+transitivity KB with one Boolean query."""
    while True:
        n_pred = rng.randint(2, bounds.max_predicates)
        preds = []
        for i in range(n_pred):
            arity = 2 if i == 0 else rng.randint(1, bounds.max_arity)
            preds.append((f"p{i}", arity))
        binary = [p for p, a in preds if a == 2]
        n_trans = rng.randint(1, min(bounds.max_transitive, len(binary)))
        transitive = sorted(rng.sample(binary, n_trans))
        rules = [_random_rule(rng, preds) for _ in range(rng.randint(1, bounds.max_linear_rules))]
        split = split_rules(rules + [transitivity_rule(p) for p in transitive])
        if split.ok and is_safe(split).safe:
            break
    consts = [Term(CONST, f"c{i}") for i in range(rng.randint(1, bounds.max_terms))]
    facts = []
    for _ in range(rng.randint(1, 2 * len(consts) + 1)):
        p, a = rng.choice(preds)
        facts.append(Atom(p, tuple(rng.choice(consts) for _ in range(a))))
    doc = KBDocument(sorted(set(facts)), rules, [], transitive)
    doc.queries.append(_random_query(rng, doc, preds, consts, bounds))
    return doc


def _random_query(rng, doc: KBDocument, preds, consts, bounds: GeneratorBounds) -> ConjunctiveQuery:
    n_atoms = 1 if rng.random() < 0.5 else rng.randint(2, bounds.max_query_atoms)
    if rng.random() < 0.6:
        # build the query from chased facts so that positive answers are common
        state = chase(doc.facts, doc.all_rules(), 3, max_facts=2000)
        pool = sorted(state.facts)
        if pool:
            picked = [rng.choice(pool)]
            for _ in range(n_atoms - 1):
                linked = [f for f in pool if set(f.args) & set(picked[-1].args)]
                picked.append(rng.choice(linked or pool))
            ren: dict[Term, Term] = {}
            atoms = []
            for f in picked:
                args = []
                for t in f.args:
                    if is_null(t) or rng.random() < 0.5:
                        if t not in ren:
                            ren[t] = Term(VAR, f"Y{len(ren)}")
                        args.append(ren[t])
                    else:
                        args.append(t)
                atoms.append(Atom(f.pred, tuple(args)))
            if rng.random() < 0.25:
                # perturb one atom to get negative cases as well
                i = rng.randrange(len(atoms))
                p, a = rng.choice([x for x in preds if x[1] == atoms[i].arity] or [(atoms[i].pred, atoms[i].arity)])
                atoms[i] = Atom(p, atoms[i].args[::-1])
            return ConjunctiveQuery(atoms)
    n_vars = rng.randint(1, 3)
    atoms = []
    for _ in range(n_atoms):
        p, a = rng.choice(preds)
        args = tuple(
            rng.choice(consts) if rng.random() < 0.25 else Term(VAR, f"Y{rng.randrange(n_vars)}") for _ in range(a)
        )
        atoms.append(Atom(p, args))
    return ConjunctiveQuery(atoms)


@dataclass
class CaseResult:
    index: int
    doc: KBDocument
    pipeline: str
    oracle: str
    agree: bool
    counted: bool
    error: str | None = None


@dataclass
class CheckReport:
    results: list[CaseResult] = field(default_factory=list)

    @property
    def disagreements(self) -> list[CaseResult]:
        return [r for r in self.results if r.counted and not r.agree]

    @property
    def counted(self) -> int:
        return sum(1 for r in self.results if r.counted)

    def tally(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.results:
            key = f"{r.pipeline}/{r.oracle}"
            out[key] = out.get(key, 0) + 1
        return out


def check_case(index: int, doc: KBDocument, depth: int) -> CaseResult:
    q = doc.queries[0]
    rules = doc.all_rules()
    try:
        compiled = compile_rules(rules)
        ans = entails_compiled(FactBase(doc.facts), compiled, q, RewriterConfig())
        pipeline = ans.verdict
        error = None
    except InvariantViolation as exc:
        pipeline, error = "error", str(exc)
    oracle = oracle_entails(doc.facts, rules, q, depth)
    counted = oracle in (YES, NO_TERMINATED) or error is not None
    if error is not None:
        agree = False
    elif oracle == YES:
        agree = pipeline == YES
    elif oracle == NO_TERMINATED:
        agree = pipeline == NO
    else:
        # the oracle cannot refute, but a pipeline "yes" must still be sound;
        # such cases are reported without being counted
        agree = True
    return CaseResult(index, doc, pipeline, oracle, agree, counted, error)


def run_check(seed: int, cases: int, max_terms: int = 4, depth: int = 6) -> CheckReport:
    bounds = GeneratorBounds(max_terms=max_terms)
    report = CheckReport()
    for i in range(cases):
        rng = random.Random(f"{seed}:{i}")
        doc = random_safe_kb(rng, bounds)
        report.results.append(check_case(i, doc, depth))
    return report
