"""Rule-set analysis: splitting, specializations, safety, rule dependencies.

Also builds the encoding that turns any rule set into an acyclic
(aGRD) one by routing every rule application through a transitive
predicate.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .model import CONST, VAR, Atom, ExistentialRule, Fresh, Term, freshen_rule, var, variables_of
from .unification import enumerate_piece_unifiers

AUX_PREFIX = "aux__"


def transitivity_predicate(rule: ExistentialRule) -> str | None:
    """p if the rule is p(x,y), p(y,z) -> p(x,z) up to renaming, else None."""
    if len(rule.body) != 2 or len(rule.head) != 1:
        return None
    h = rule.head[0]
    if h.arity != 2 or any(a.pred != h.pred or a.arity != 2 for a in rule.body):
        return None
    if any(t.kind != VAR for a in (*rule.body, h) for t in a.args):
        return None
    x, z = h.args
    if x == z:
        return None
    for first, second in (rule.body, rule.body[::-1]):
        if first.args[0] == x and second.args[1] == z and first.args[1] == second.args[0]:
            y = first.args[1]
            if y not in (x, z):
                return h.pred
    return None


def transitivity_rule(pred: str) -> ExistentialRule:
    x, y, z = var("X"), var("Y"), var("Z")
    return ExistentialRule((Atom(pred, (x, y)), Atom(pred, (y, z))), (Atom(pred, (x, z)),))


def linear_reject_reason(rule: ExistentialRule) -> str | None:
    if len(rule.body) != 1:
        return f"body has {len(rule.body)} atoms and is not a transitivity pattern"
    if not rule.head:
        return "empty head"
    if any(t.kind == CONST for a in (*rule.body, *rule.head) for t in a.args):
        return "linear rules may not contain constants"
    if any(t.kind != VAR and t.kind != CONST for a in (*rule.body, *rule.head) for t in a.args):
        return "rules may not contain pattern markers"
    return None


@dataclass(frozen=True)
class RuleSplit:
    linear: tuple[ExistentialRule, ...]
    transitivity: tuple[ExistentialRule, ...]
    rejects: tuple[tuple[ExistentialRule, str], ...]
    transitive: frozenset[str]

    @property
    def ok(self) -> bool:
        return not self.rejects


class RuleSplitError(ValueError):
    def __init__(self, split: RuleSplit) -> None:
        self.split = split
        reasons = "; ".join(f"{r!r}: {why}" for r, why in split.rejects)
        super().__init__(f"rule set is not linear+transitivity: {reasons}")


def split_rules(rules: Iterable[ExistentialRule]) -> RuleSplit:
    linear, trans, rejects = [], [], []
    preds = set()
    for r in rules:
        p = transitivity_predicate(r)
        if p is not None:
            trans.append(r)
            preds.add(p)
            continue
        why = linear_reject_reason(r)
        if why is None:
            linear.append(r)
        else:
            rejects.append((r, why))
    return RuleSplit(tuple(linear), tuple(trans), tuple(rejects), frozenset(preds))


def normalize_heads(rules: Iterable[ExistentialRule]) -> list[ExistentialRule]:
    """Split multi-atom heads through a fresh auxiliary predicate.

    B -> h1, ..., hn becomes B -> aux(v) and aux(v) -> hi, where v lists
    the frontier and existential variables. Single-atom heads are kept.
    """
    out = []
    n = 0
    for r in rules:
        if len(r.head) == 1:
            out.append(r)
            continue
        n += 1
        hv = sorted(variables_of(r.head), key=lambda t: (t not in r.frontier, t.name))
        aux = Atom(f"{AUX_PREFIX}{n}", tuple(hv))
        out.append(ExistentialRule(r.body, (aux,), r.label))
        out.extend(ExistentialRule((aux,), (h,), r.label) for h in r.head)
    return out


# specializations -----------------------------------------------------------


@dataclass(frozen=True)
class Specialization:
    """q is a specialization of the binary predicate p on positions {I, J}.

    Positions are 1-based. ``first`` holds the positions of q that carry
    p's first argument, ``second`` those carrying its second argument.
    """

    q: str
    p: str
    first: frozenset[int]
    second: frozenset[int]

    @property
    def positions(self) -> frozenset[frozenset[int]]:
        return frozenset({self.first, self.second})

    def __repr__(self) -> str:
        f = ",".join(map(str, sorted(self.first)))
        s = ",".join(map(str, sorted(self.second)))
        return f"{self.q} <= {self.p} on {{{{{f}}},{{{s}}}}}"


def _positions(args: tuple[Term, ...], terms: set[Term]) -> frozenset[int]:
    return frozenset(i + 1 for i, t in enumerate(args) if t in terms)


def compute_specializations(
    split: RuleSplit | Iterable[ExistentialRule], notes: list[str] | None = None
) -> frozenset[Specialization]:
    """Least fixpoint of the direct and propagated specialization clauses.

    Computed for every binary head predicate; a rule whose projected
    position sets overlap (for instance a repeated head variable) yields
    no entry and is reported through ``notes``.
    """
    rules = split.linear if isinstance(split, RuleSplit) else tuple(split)
    rules = [r for r in normalize_heads(rules) if len(r.body) == 1]
    found: set[Specialization] = set()
    flagged: set[str] = set()

    def consider(q_atom: Atom, p: str, first_terms: set[Term], second_terms: set[Term], rule) -> None:
        i = _positions(q_atom.args, first_terms)
        j = _positions(q_atom.args, second_terms)
        if not i or not j:
            return
        if i & j:
            flagged.add(f"{rule!r}: positions overlap, no specialization of {p} recorded")
            return
        found.add(Specialization(q_atom.pred, p, i, j))

    for r in rules:
        h = r.head[0]
        if h.arity == 2:
            consider(r.body[0], h.pred, {h.args[0]}, {h.args[1]}, r)
    changed = True
    while changed:
        before = len(found)
        for r in rules:
            h = r.head[0]
            for s in [s for s in found if s.q == h.pred]:
                k_terms = {h.args[i - 1] for i in s.first}
                l_terms = {h.args[i - 1] for i in s.second}
                consider(r.body[0], s.p, k_terms, l_terms, r)
        changed = len(found) != before
    if notes is not None:
        notes.extend(sorted(flagged))
    return frozenset(found)


class Safety(NamedTuple):
    safe: bool
    witness: dict[str, tuple[int, int]]
    pseudo_transitive: tuple[str, ...]
    failing: tuple[str, ...]


def _arities(rules: Iterable[ExistentialRule]) -> dict[str, int]:
    out: dict[str, int] = {}
    for r in rules:
        for a in (*r.body, *r.head):
            out[a.pred] = a.arity
    return out


def is_safe(split: RuleSplit) -> Safety:
    """Safety check with a witness position pair per pseudo-transitive predicate."""
    specs = [s for s in compute_specializations(split) if s.p in split.transitive]
    arity = _arities(normalize_heads(split.linear))
    by_q: dict[str, list[Specialization]] = {}
    for s in specs:
        by_q.setdefault(s.q, []).append(s)
    witness: dict[str, tuple[int, int]] = {}
    failing = []
    for q in sorted(by_q):
        n = arity.get(q, 0)
        choice = None
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                if all((i in s.first and j in s.second) or (i in s.second and j in s.first) for s in by_q[q]):
                    choice = (i, j)
                    break
            if choice:
                break
        if choice is None:
            failing.append(q)
        else:
            witness[q] = choice
    return Safety(not failing, witness if not failing else {}, tuple(sorted(by_q)), tuple(failing))


# rule dependencies ----------------------------------------------------------


@dataclass(frozen=True)
class DependencyGraph:
    rules: tuple[ExistentialRule, ...]
    edges: frozenset[tuple[int, int]] = field(default=frozenset())

    def successors(self, i: int) -> list[int]:
        return sorted(j for a, j in self.edges if a == i)

    def predecessors(self, j: int) -> list[int]:
        return sorted(i for i, b in self.edges if b == j)


def depends_on(r2: ExistentialRule, r1: ExistentialRule) -> bool:
    """True if some piece-unifier exists between the body of r2 and the head of r1."""
    fresh = Fresh("D", (t.name for t in r2.variables()))
    head_rule = freshen_rule(r1, fresh)
    return bool(enumerate_piece_unifiers(r2.body, head_rule))


def build_grd(rules: Iterable[ExistentialRule]) -> DependencyGraph:
    rules = tuple(rules)
    edges = frozenset(
        (i, j) for i, r1 in enumerate(rules) for j, r2 in enumerate(rules) if depends_on(r2, r1)
    )
    return DependencyGraph(rules, edges)


def _sorter(g: DependencyGraph) -> graphlib.TopologicalSorter:
    ts: graphlib.TopologicalSorter = graphlib.TopologicalSorter()
    for i in range(len(g.rules)):
        ts.add(i, *g.predecessors(i))
    return ts


def is_agrd(rules: Iterable[ExistentialRule] | DependencyGraph) -> bool:
    g = rules if isinstance(rules, DependencyGraph) else build_grd(rules)
    if any(a == b for a, b in g.edges):
        return False
    try:
        tuple(_sorter(g).static_order())
    except graphlib.CycleError:
        return False
    return True


def longest_path(g: DependencyGraph) -> int | None:
    """Number of edges on the longest directed path, or None when cyclic."""
    if not is_agrd(g):
        return None
    length = {i: 0 for i in range(len(g.rules))}
    for node in _sorter(g).static_order():
        for pred in g.predecessors(node):
            length[node] = max(length[node], length[pred] + 1)
    return max(length.values(), default=0)


# acyclic encoding through a transitive predicate ---------------------------


class Encoding(NamedTuple):
    rules: tuple[ExistentialRule, ...]
    transitive: str
    transitivity: ExistentialRule

    def all_rules(self) -> list[ExistentialRule]:
        return [*self.rules, self.transitivity]


def agrd_trans_encode(rules: Iterable[ExistentialRule], pred: str = "p") -> Encoding:
    """Encode each rule B -> H as two rules linked by a path of ``pred`` atoms.

    B -> a_i(x, z1), p(z1,z2), p(z2,z3), b_i(z3) and
    a_i(x, z1), p(z1,z2), b_i(z2) -> H, where x lists the body variables.
    Only the transitivity of p lets the second rule fire after the first.
    """
    rules = list(rules)
    used = {a.pred for r in rules for a in (*r.body, *r.head)}
    reserved = {pred} | {f"a{i}" for i in range(1, len(rules) + 1)} | {f"b{i}" for i in range(1, len(rules) + 1)}
    clash = used & reserved
    if clash:
        raise ValueError(f"reserved predicate names already in use: {sorted(clash)}")
    out = []
    for i, r in enumerate(rules, start=1):
        taken = {t.name for t in r.variables()}
        fresh = Fresh("Z", taken)
        z1, z2, z3 = fresh(), fresh(), fresh()
        xs = []
        for a in r.body:
            for t in a.args:
                if t.kind == VAR and t not in xs:
                    xs.append(t)
        a_i, b_i = f"a{i}", f"b{i}"
        out.append(
            ExistentialRule(
                r.body,
                (Atom(a_i, (*xs, z1)), Atom(pred, (z1, z2)), Atom(pred, (z2, z3)), Atom(b_i, (z3,))),
                f"{r.label or i}.1",
            )
        )
        out.append(
            ExistentialRule(
                (Atom(a_i, (*xs, z1)), Atom(pred, (z1, z2)), Atom(b_i, (z2,))),
                r.head,
                f"{r.label or i}.2",
            )
        )
    return Encoding(tuple(out), pred, transitivity_rule(pred))
