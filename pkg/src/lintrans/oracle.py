"""Breadth-first restricted chase used as ground truth for entailment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .datalog import evaluate_cq, iter_homomorphisms, match_atom
from .model import CONST, Atom, ConjunctiveQuery, ExistentialRule, FactBase, Term

YES = "yes"
UNKNOWN = "unknown"
NO_TERMINATED = "no_terminated"

NULL_PREFIX = "_n"


@dataclass
class ChaseState:
    facts: FactBase
    frontier: set[Atom]
    depth: int = 0
    nulls: int = 0
    rounds: list[list[Atom]] = field(default_factory=list)

    @classmethod
    def start(cls, facts: Iterable[Atom]) -> "ChaseState":
        fb = FactBase(facts)
        return cls(fb, set(fb))

    @property
    def at_fixpoint(self) -> bool:
        return self.depth > 0 and not self.frontier


def _triggers(rules: list[ExistentialRule], state: ChaseState) -> list[tuple[int, tuple]]:
    """Body matches that use at least one fact of the current frontier."""
    found: set[tuple[int, tuple]] = set()
    for ri, rule in enumerate(rules):
        body = list(rule.body)
        for bi, atom in enumerate(body):
            rest = body[:bi] + body[bi + 1 :]
            for f in state.frontier:
                b = match_atom(atom, f, {})
                if b is None:
                    continue
                for h in iter_homomorphisms(rest, state.facts, b):
                    found.add((ri, tuple(sorted(h.items()))))
    return sorted(found)


def chase_step(state: ChaseState, rules: Iterable[ExistentialRule]) -> ChaseState:
    """One breadth-first round of the restricted chase."""
    rules = list(rules)
    facts = state.facts.copy()
    added: list[Atom] = []
    nulls = state.nulls
    for ri, binding in _triggers(rules, state):
        rule = rules[ri]
        b = dict(binding)
        frontier_map = {v: b[v] for v in rule.frontier}
        if next(iter_homomorphisms(rule.head, facts, frontier_map), None) is not None:
            continue
        ext = dict(frontier_map)
        for z in sorted(rule.existentials):
            ext[z] = Term(CONST, f"{NULL_PREFIX}{nulls}")
            nulls += 1
        for h in rule.head:
            a = h.substitute(ext)
            if facts.add(a):
                added.append(a)
    rounds = state.rounds + [sorted(added)]
    return ChaseState(facts, set(added), state.depth + 1, nulls, rounds)


def chase(facts: Iterable[Atom], rules: Iterable[ExistentialRule], depth: int, max_facts: int | None = None) -> ChaseState:
    rules = list(rules)
    state = ChaseState.start(facts)
    for _ in range(depth):
        state = chase_step(state, rules)
        if not state.frontier:
            break
        if max_facts is not None and len(state.facts) > max_facts:
            break
    return state


def oracle_entails(
    facts: Iterable[Atom] | FactBase,
    rules: Iterable[ExistentialRule],
    q: ConjunctiveQuery,
    max_depth: int = 6,
    max_facts: int = 50_000,
) -> str:
    """yes if q maps into the chase within max_depth rounds, no_terminated at a fixpoint."""
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    rules = list(rules)
    state = ChaseState.start(facts)
    if evaluate_cq(q, state.facts):
        return YES
    for _ in range(max_depth):
        state = chase_step(state, rules)
        if not state.frontier:
            return NO_TERMINATED
        if evaluate_cq(q, state.facts):
            return YES
        if len(state.facts) > max_facts:
            return UNKNOWN
    # a chase that stops exactly at the depth bound is still a fixpoint
    if not chase_step(state, rules).frontier:
        return NO_TERMINATED
    return UNKNOWN


def is_null(t: Term) -> bool:
    return t.kind == CONST and t.name.startswith(NULL_PREFIX)
