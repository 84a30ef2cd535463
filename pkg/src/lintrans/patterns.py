"""Pattern definitions, pattern conjunctive queries and their instances.

A pattern definition ``P := a1 | ... | ak`` lists atoms that each mention
the markers #1 and #2; one atom stands for a single step of the
transitive predicate the pattern belongs to. A repeatable pattern
``P+[t1,t2]`` stands for any finite chain of such steps from t1 to t2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Union

from .canonical import canonical_form, canonical_renaming
from .model import M1, M2, VAR, Atom, ConjunctiveQuery, ExistentialRule, Fresh, Term, terms_of


class Repeatable(NamedTuple):
    """The repeatable pattern name+[t1,t2]."""

    name: str
    t1: Term
    t2: Term

    @property
    def args(self) -> tuple[Term, Term]:
        return (self.t1, self.t2)

    def substitute(self, subst: dict[Term, Term]) -> "Repeatable":
        return Repeatable(self.name, subst.get(self.t1, self.t1), subst.get(self.t2, self.t2))

    def __repr__(self) -> str:
        return f"{self.name}+[{self.t1.name},{self.t2.name}]"


def pattern_name(pred: str) -> str:
    return f"P_{pred}"


def canonical_atom(a: Atom) -> Atom:
    """Single atom with non-marker variables renamed canonically."""
    return a.substitute(canonical_renaming([(a.pred, a.args)]))


@dataclass(frozen=True)
class PatternDefinition:
    name: str
    predicate: str
    atoms: tuple[Atom, ...]

    def __post_init__(self) -> None:
        canon = sorted({canonical_atom(a) for a in self.atoms})
        for a in canon:
            if M1 not in a.args or M2 not in a.args:
                raise ValueError(f"definition atom {a!r} must contain both #1 and #2")
        object.__setattr__(self, "atoms", tuple(canon))

    def with_predicate(self, pred: str) -> tuple[Atom, ...]:
        return tuple(a for a in self.atoms if a.pred == pred)

    def __repr__(self) -> str:
        return f"{self.name} := " + " | ".join(repr(a) for a in self.atoms)


class PatternSet:
    """Mapping from pattern names to their definitions."""

    def __init__(self, defs: Iterable[PatternDefinition] = ()) -> None:
        self._defs: dict[str, PatternDefinition] = {}
        for d in defs:
            if d.name in self._defs:
                raise ValueError(f"pattern {d.name} defined twice")
            self._defs[d.name] = d
        self._by_pred = {d.predicate: d.name for d in self._defs.values()}

    def __getitem__(self, name: str) -> PatternDefinition:
        return self._defs[name]

    def __contains__(self, name: object) -> bool:
        return name in self._defs

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._defs))

    def __len__(self) -> int:
        return len(self._defs)

    def definitions(self) -> list[PatternDefinition]:
        return [self._defs[n] for n in sorted(self._defs)]

    def name_for(self, pred: str) -> str | None:
        return self._by_pred.get(pred)

    def transitive_predicates(self) -> set[str]:
        return set(self._by_pred)

    def with_atoms(self, name: str, atoms: Iterable[Atom]) -> "PatternSet":
        d = self._defs[name]
        new = PatternDefinition(d.name, d.predicate, d.atoms + tuple(atoms))
        return PatternSet([new if x.name == name else x for x in self.definitions()])

    def size(self) -> int:
        return sum(len(d.atoms) for d in self._defs.values())

    def key(self) -> tuple:
        return tuple((d.name, d.predicate, d.atoms) for d in self.definitions())

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PatternSet):
            return self.key() == other.key()
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return "; ".join(repr(d) for d in self.definitions())


Item = Union[Atom, Repeatable]


def item_label(x: Item) -> tuple[str, tuple[Term, ...]]:
    if isinstance(x, Repeatable):
        return ("+" + x.name, (x.t1, x.t2))
    return (x.pred, x.args)


@dataclass(frozen=True)
class PatternCQ:
    """A conjunction of atoms and repeatable patterns."""

    atoms: frozenset[Atom] = frozenset()
    repeatables: frozenset[Repeatable] = frozenset()

    def __init__(self, atoms: Iterable[Atom] = (), repeatables: Iterable[Repeatable] = ()) -> None:
        object.__setattr__(self, "atoms", frozenset(atoms))
        object.__setattr__(self, "repeatables", frozenset(repeatables))

    @property
    def size(self) -> int:
        return len(self.atoms) + len(self.repeatables)

    def items(self) -> list[tuple[str, tuple[Term, ...]]]:
        return [item_label(a) for a in self.atoms] + [item_label(r) for r in self.repeatables]

    def terms(self) -> set[Term]:
        out = terms_of(self.atoms)
        for r in self.repeatables:
            out.update((r.t1, r.t2))
        return out

    def variables(self) -> set[Term]:
        return {t for t in self.terms() if t.kind == VAR}

    def substitute(self, subst: dict[Term, Term]) -> "PatternCQ":
        return PatternCQ(
            (a.substitute(subst) for a in self.atoms),
            (r.substitute(subst) for r in self.repeatables),
        )

    def canonical(self) -> tuple:
        return canonical_form(self.items())

    def canonical_copy(self) -> "PatternCQ":
        return self.substitute(canonical_renaming(self.items()))

    def is_pattern_free(self) -> bool:
        return not self.repeatables

    def as_cq(self) -> ConjunctiveQuery:
        if self.repeatables:
            raise ValueError("PCQ still contains repeatable patterns")
        return ConjunctiveQuery(self.atoms)

    def __repr__(self) -> str:
        parts = [repr(a) for a in sorted(self.atoms)] + [repr(r) for r in sorted(self.repeatables)]
        return " & ".join(parts) if parts else "true"


def init_pattern_set(transitive_rules: Iterable[ExistentialRule]) -> PatternSet:
    """One definition p(#1,#2) per transitive predicate."""
    from .analysis import transitivity_predicate

    preds = set()
    for rule in transitive_rules:
        p = transitivity_predicate(rule)
        if p is None:
            raise ValueError(f"not a transitivity rule: {rule!r}")
        preds.add(p)
    return PatternSet(PatternDefinition(pattern_name(p), p, (Atom(p, (M1, M2)),)) for p in sorted(preds))


def patternize(q: ConjunctiveQuery | Iterable[Atom], ps: PatternSet) -> PatternCQ:
    """Replace every atom of a transitive predicate by its repeatable pattern."""
    atoms = q.atoms if isinstance(q, ConjunctiveQuery) else list(q)
    plain, reps = [], []
    for a in atoms:
        name = ps.name_for(a.pred)
        if name is not None and a.arity == 2:
            reps.append(Repeatable(name, a.args[0], a.args[1]))
        else:
            plain.append(a)
    return PatternCQ(plain, reps)


@dataclass(frozen=True)
class PatternRule:
    """A linear rule whose body atom may have become a repeatable pattern."""

    body: Item
    head: Atom
    source: ExistentialRule = field(compare=False)

    @property
    def body_terms(self) -> set[Term]:
        return set(self.body.args)

    @property
    def existentials(self) -> frozenset[Term]:
        return frozenset(t for t in self.head.args if t.kind == VAR and t not in self.body_terms)

    @property
    def frontier(self) -> frozenset[Term]:
        return frozenset(t for t in self.head.args if t.kind == VAR and t in self.body_terms)

    def substitute(self, subst: dict[Term, Term]) -> "PatternRule":
        return PatternRule(self.body.substitute(subst), self.head.substitute(subst), self.source)

    def variables(self) -> set[Term]:
        return {t for t in (*self.body.args, *self.head.args) if t.kind == VAR}

    def __repr__(self) -> str:
        return f"{self.head!r} :- {self.body!r}"


def patternize_rule(rule: ExistentialRule, ps: PatternSet) -> PatternRule:
    if len(rule.body) != 1 or len(rule.head) != 1:
        raise ValueError(f"expected a single-atom body and head: {rule!r}")
    pcq = patternize(rule.body, ps)
    body = next(iter(pcq.repeatables)) if pcq.repeatables else next(iter(pcq.atoms))
    return PatternRule(body, rule.head[0], rule)


def instantiate(atom: Atom, start: Term, end: Term, fresh: Fresh) -> Atom:
    """Expand one standard pattern step: markers to start/end, other variables fresh."""
    subst: dict[Term, Term] = {M1: start, M2: end}
    for t in atom.args:
        if t.kind == VAR and t not in subst:
            subst[t] = fresh()
    return atom.substitute(subst)


def chain(defn_atoms: tuple[Atom, ...], start: Term, end: Term, fresh: Fresh) -> tuple[list[Term], list[Atom]]:
    """Instantiate a sequence of definition atoms as a chain from start to end."""
    k = len(defn_atoms)
    points = [start] + [fresh() for _ in range(k - 1)] + [end]
    return points, [instantiate(a, points[i], points[i + 1], fresh) for i, a in enumerate(defn_atoms)]


def expand_full_instances(q: PatternCQ, ps: PatternSet, k_max: int) -> list[ConjunctiveQuery]:
    """Full instances whose repeatable patterns use chains of at most k_max steps."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    reps = sorted(q.repeatables)
    options_per_rep = []
    for r in reps:
        atoms = ps[r.name].atoms
        opts = [seq for k in range(1, k_max + 1) for seq in itertools.product(atoms, repeat=k)]
        options_per_rep.append(opts)
    seen: dict[tuple, ConjunctiveQuery] = {}
    taken = [t.name for t in q.variables()]
    for combo in itertools.product(*options_per_rep):
        fresh = Fresh("Y", taken)
        atoms = set(q.atoms)
        for r, seq in zip(reps, combo):
            atoms.update(chain(seq, r.t1, r.t2, fresh)[1])
        cq = ConjunctiveQuery(atoms)
        seen.setdefault(canonical_form([(a.pred, a.args) for a in atoms]), cq)
    return list(seen.values())


@dataclass(frozen=True)
class Instance:
    """An instance of a PCQ together with the bookkeeping of its expansion.

    ``chains`` maps each expanded repeatable pattern to the chain terms
    (t1, midpoints..., t2) and the atoms expanded from each step;
    ``steps`` holds, in the same order, the definition atom behind each step.
    """

    atoms: frozenset[Atom]
    repeatables: frozenset[Repeatable]
    chains: tuple[tuple[Repeatable, tuple[Term, ...], tuple[Atom, ...]], ...]
    steps: tuple[tuple[Atom, ...], ...] = ()

    def origin(self) -> dict[Atom, tuple[Repeatable, int]]:
        out = {}
        for r, _, atoms in self.chains:
            for i, a in enumerate(atoms):
                out[a] = (r, i)
        return out

    def as_pcq(self) -> PatternCQ:
        return PatternCQ(self.atoms, self.repeatables)


def reanchor(definition: Atom, expanded: Atom, start: Term, end: Term) -> Atom:
    """Move an expanded step to new endpoints, keeping its other terms.

    Works by position, so a step whose endpoints coincide is handled too.
    """
    args = []
    for d, t in zip(definition.args, expanded.args):
        args.append(start if d == M1 else end if d == M2 else t)
    return Atom(expanded.pred, tuple(args))


def chain_bound(head_pred_arity: int, n_atoms: int) -> int:
    return min(head_pred_arity, n_atoms) + 2


def instances_of_interest(q: PatternCQ, ps: PatternSet, head: Atom) -> list[Instance]:
    """Instances of interest of q for a rule whose (only) head atom is ``head``.

    Every repeatable pattern whose definition has n > 0 atoms with the head
    predicate is either left unexpanded or expanded into a chain of
    k <= min(arity, n) + 2 of those atoms.
    """
    reps = sorted(q.repeatables)
    per_rep: list[list[tuple[Atom, ...] | None]] = []
    for r in reps:
        cands = ps[r.name].with_predicate(head.pred)
        opts: list[tuple[Atom, ...] | None] = [None]
        if cands:
            bound = chain_bound(head.arity, len(cands))
            opts += [seq for k in range(1, bound + 1) for seq in itertools.product(cands, repeat=k)]
        per_rep.append(opts)
    taken = [t.name for t in q.variables()]
    out = []
    for combo in itertools.product(*per_rep):
        fresh = Fresh("Y", taken)
        atoms = set(q.atoms)
        left = []
        chains = []
        steps = []
        for r, seq in zip(reps, combo):
            if seq is None:
                left.append(r)
                continue
            points, expanded = chain(seq, r.t1, r.t2, fresh)
            atoms.update(expanded)
            chains.append((r, tuple(points), tuple(expanded)))
            steps.append(tuple(seq))
        out.append(Instance(frozenset(atoms), frozenset(left), tuple(chains), tuple(steps)))
    return out
