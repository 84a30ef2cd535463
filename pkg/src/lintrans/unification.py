"""Term partitions, single-piece unifiers and classical direct rewriting."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from .canonical import canonical_copy, canonicalize
from .model import CONST, VAR, Atom, ConjunctiveQuery, ExistentialRule, Fresh, Term, freshen_rule


class InadmissiblePartition(ValueError):
    """Raised when a partition puts two distinct constants in one class."""


def _natural(name: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name))


@lru_cache(maxsize=None)
def rep_key(t: Term) -> tuple:
    """Constants first, then markers, then variables in natural name order."""
    return (t.kind, _natural(t.name))


class TermPartition:
    """Union-find over terms with explicit class listing."""

    def __init__(self, pairs: Iterable[tuple[Term, Term]] = ()) -> None:
        self._parent: dict[Term, Term] = {}
        for a, b in pairs:
            self.union(a, b)

    def copy(self) -> "TermPartition":
        other = TermPartition()
        other._parent = dict(self._parent)
        return other

    def add(self, t: Term) -> None:
        self._parent.setdefault(t, t)

    def find(self, t: Term) -> Term:
        parent = self._parent
        if t not in parent:
            parent[t] = t
            return t
        root = t
        while parent[root] != root:
            root = parent[root]
        while parent[t] != root:
            parent[t], t = root, parent[t]
        return root

    def union(self, a: Term, b: Term) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rep_key(rb) < rep_key(ra):
                ra, rb = rb, ra
            self._parent[rb] = ra

    def same(self, a: Term, b: Term) -> bool:
        return self.find(a) == self.find(b)

    def terms(self) -> set[Term]:
        return set(self._parent)

    def groups(self) -> dict[Term, set[Term]]:
        """Classes keyed by their root, in no particular order."""
        groups: dict[Term, set[Term]] = {}
        for t in self._parent:
            groups.setdefault(self.find(t), set()).add(t)
        return groups

    def classes(self) -> list[frozenset[Term]]:
        return sorted((frozenset(g) for g in self.groups().values()), key=lambda c: sorted(map(rep_key, c)))

    def frozen(self) -> frozenset[frozenset[Term]]:
        return frozenset(self.classes())

    def is_admissible(self) -> bool:
        return all(sum(1 for t in c if t.kind == CONST) <= 1 for c in self.groups().values())


def representative(cls: Iterable[Term]) -> Term:
    return min(cls, key=rep_key)


def substitution_of(p: TermPartition | Iterable[Iterable[Term]]) -> dict[Term, Term]:
    """Map every term to the representative of its class.

    Raises InadmissiblePartition if a class holds two distinct constants.
    """
    classes = p.classes() if isinstance(p, TermPartition) else [frozenset(c) for c in p]
    subst: dict[Term, Term] = {}
    for cls in classes:
        consts = {t for t in cls if t.kind == CONST}
        if len(consts) > 1:
            raise InadmissiblePartition(f"constants {sorted(t.name for t in consts)} in one class")
        rep = representative(cls)
        for t in cls:
            subst[t] = rep
    return subst


@dataclass(frozen=True)
class PieceUnifier:
    q_prime: frozenset[Atom]
    h_prime: frozenset[Atom]
    partition: frozenset[frozenset[Term]]
    rule: ExistentialRule = field(compare=False, hash=False)

    def substitution(self) -> dict[Term, Term]:
        return substitution_of(self.partition)

    def existential_classes(self) -> list[frozenset[Term]]:
        ex = self.rule.existentials
        return [c for c in self.partition if c & ex]


def _partition_of(pairs: Iterable[tuple[Atom, Atom]]) -> TermPartition:
    part = TermPartition()
    for qa, ha in pairs:
        for s, t in zip(qa.args, ha.args):
            part.union(s, t)
    return part


def _violations(
    q_atoms: frozenset[Atom],
    chosen: frozenset[Atom],
    part: TermPartition,
    head_vars: frozenset[Term],
    existentials: frozenset[Term],
) -> tuple[bool, list[Atom]]:
    """Check conditions on a candidate; return (dead, atoms that must be added)."""
    ex_roots: set[Term] = set()
    for cls in part.classes():
        if sum(1 for t in cls if t.kind == CONST) > 1:
            return True, []
        ex = cls & existentials
        if not ex:
            continue
        if len(ex) > 1 or any(t.kind != VAR for t in cls) or (cls & head_vars) - ex:
            return True, []
        ex_roots.add(part.find(next(iter(ex))))
    if not ex_roots:
        return False, []
    needed = []
    terms = part.terms()
    for a in sorted(q_atoms - chosen):
        if any(t in terms and t.kind == VAR and part.find(t) in ex_roots for t in a.args):
            needed.append(a)
    return False, needed


def enumerate_piece_unifiers(q: ConjunctiveQuery | Iterable[Atom], rule: ExistentialRule) -> list[PieceUnifier]:
    """All most general single-piece unifiers of q with the head of rule.

    The query and the rule must not share variables.
    """
    q_atoms = frozenset(q.atoms if isinstance(q, ConjunctiveQuery) else q)
    head = tuple(rule.head)
    head_vars = frozenset(t for a in head for t in a.args if t.kind == VAR)
    existentials = rule.existentials
    results: dict[tuple, PieceUnifier] = {}
    seen: set[frozenset] = set()

    def compatible(qa: Atom, ha: Atom) -> bool:
        return qa.pred == ha.pred and len(qa.args) == len(ha.args)

    def grow(pairs: frozenset[tuple[Atom, Atom]]) -> None:
        if pairs in seen:
            return
        seen.add(pairs)
        part = _partition_of(pairs)
        chosen = frozenset(qa for qa, _ in pairs)
        dead, needed = _violations(q_atoms, chosen, part, head_vars, existentials)
        if dead:
            return
        if not needed:
            mu = PieceUnifier(chosen, frozenset(ha for _, ha in pairs), part.frozen(), rule)
            results.setdefault((mu.q_prime, mu.h_prime, mu.partition), mu)
            return
        forced = needed[0]
        for ha in head:
            if compatible(forced, ha):
                grow(pairs | {(forced, ha)})

    for qa in sorted(q_atoms):
        for ha in head:
            if compatible(qa, ha):
                grow(frozenset({(qa, ha)}))
    return [results[k] for k in sorted(results, key=repr)]


def is_piece_unifier(q: Iterable[Atom], mu: PieceUnifier) -> bool:
    """Direct check of the two unifier conditions for an arbitrary triple."""
    q_atoms = frozenset(q)
    if not mu.q_prime <= q_atoms or not mu.q_prime or not mu.h_prime:
        return False
    try:
        sigma = substitution_of(mu.partition)
    except InadmissiblePartition:
        return False
    if {a.substitute(sigma) for a in mu.q_prime} != {a.substitute(sigma) for a in mu.h_prime}:
        return False
    outside = {t for a in q_atoms - mu.q_prime for t in a.args}
    q_vars = {t for a in mu.q_prime for t in a.args if t.kind == VAR}
    ex = mu.rule.existentials
    for cls in mu.partition:
        if cls & ex:
            others = cls - ex
            if len(cls & ex) > 1:
                return False
            if not all(t in q_vars and t not in outside for t in others):
                return False
    return True


def classical_direct_rewriting(
    q: ConjunctiveQuery, mu: PieceUnifier, fresh: Fresh | None = None
) -> ConjunctiveQuery:
    """sigma(Q minus Q') together with sigma(body)."""
    sigma = mu.substitution()
    kept = [a.substitute(sigma) for a in q.atoms - mu.q_prime]
    body = [a.substitute(sigma) for a in mu.rule.body]
    out = ConjunctiveQuery(kept + body)
    if fresh is not None:
        ren = {}
        for t in sorted(out.variables()):
            if t.name in fresh.taken:
                ren[t] = fresh()
        out = out.substitute(ren)
    return out


def rewrite_once(q: ConjunctiveQuery, rule: ExistentialRule) -> Iterator[ConjunctiveQuery]:
    """All classical direct rewritings of q with rule (rule freshened first)."""
    fresh = Fresh("W", (t.name for t in q.variables()))
    r = freshen_rule(rule, fresh)
    for mu in enumerate_piece_unifiers(q, r):
        yield classical_direct_rewriting(q, mu)


def classical_rewriting_closure(
    q: ConjunctiveQuery, rules: Iterable[ExistentialRule], max_depth: int
) -> list[ConjunctiveQuery]:
    """Rewritings reachable in at most max_depth steps, one per isomorphism class."""
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    rules = list(rules)
    start = canonical_copy(q)
    seen = {canonicalize(start): start}
    layer = [start]
    for _ in range(max_depth):
        nxt = []
        for cur in layer:
            for rule in rules:
                for rw in rewrite_once(cur, rule):
                    rw = canonical_copy(rw)
                    key = canonicalize(rw)
                    if key not in seen:
                        seen[key] = rw
                        nxt.append(rw)
        layer = nxt
        if not layer:
            break
    return list(seen.values())
