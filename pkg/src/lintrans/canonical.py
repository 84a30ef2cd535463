"""Canonical forms of atom sets under variable renaming.

Constants and markers are fixed points; only variables are renamed.
The form is computed by colour refinement on the variable/occurrence
incidence structure, followed by individualisation of one variable of
the first non-singleton colour class and recursion. The canonical form
is the smallest encoding over all leaves of that search tree, so two
inputs get equal forms exactly when they are isomorphic. Connected
components are handled separately, and branches related by a variable
transposition that is an automorphism are visited once.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

from .model import VAR, Atom, ConjunctiveQuery, Term

# An item is a labelled tuple of terms: atoms use the predicate as label,
# repeatable patterns use "+" followed by the pattern name.
Item = tuple[str, tuple[Term, ...]]
CanonicalForm = tuple


def _refine(items: Sequence[Item], variables: list[Term], colour: dict[Term, int]) -> dict[Term, int]:
    occurrences: dict[Term, list[tuple[str, int, tuple]]] = {v: [] for v in variables}
    n_colours = len(set(colour.values()))
    while True:
        for v in variables:
            occurrences[v].clear()
        for label, args in items:
            codes = tuple((2, colour[t]) if t.kind == VAR else (t.kind, t.name) for t in args)
            for pos, t in enumerate(args):
                if t.kind == VAR:
                    occurrences[t].append((label, pos, codes))
        sigs = {v: (colour[v], tuple(sorted(occurrences[v]))) for v in variables}
        ranking = {s: i for i, s in enumerate(sorted(set(sigs.values())))}
        new = {v: ranking[sigs[v]] for v in variables}
        count = len(ranking)
        if count == n_colours:
            return new
        colour, n_colours = new, count


def _encode(items: Sequence[Item], colour: dict[Term, int]) -> tuple:
    return tuple(
        sorted(
            (label, tuple((2, colour[t]) if t.kind == VAR else (t.kind, t.name) for t in args))
            for label, args in items
        )
    )


def _swap_is_automorphism(items: frozenset[Item], v: Term, w: Term) -> bool:
    swap = {v: w, w: v}
    return all((label, tuple(swap.get(t, t) for t in args)) in items for label, args in items)


def _search(
    items: Sequence[Item], item_set: frozenset[Item], variables: list[Term], colour: dict[Term, int]
) -> tuple[tuple, dict[Term, int]]:
    colour = _refine(items, variables, colour)
    cells: dict[int, list[Term]] = {}
    for v in variables:
        cells.setdefault(colour[v], []).append(v)
    target = None
    for c in sorted(cells):
        if len(cells[c]) > 1:
            target = c
            break
    if target is None:
        return _encode(items, colour), colour
    best: tuple | None = None
    best_colour: dict[Term, int] = {}
    explored: list[Term] = []
    for v in cells[target]:
        # a transposition with an explored variable that preserves the items
        # maps that subtree onto this one, so the leaves are the same
        if any(_swap_is_automorphism(item_set, u, v) for u in explored):
            continue
        explored.append(v)
        split = {u: 2 * c + 1 for u, c in colour.items()}
        split[v] = 2 * colour[v]
        enc, leaf = _search(items, item_set, variables, split)
        if best is None or enc < best:
            best, best_colour = enc, leaf
    assert best is not None
    return best, best_colour


def _components(items: Sequence[Item]) -> list[list[Item]]:
    """Group items that are connected through shared variables."""
    parent: dict[Term, Term] = {}

    def find(t: Term) -> Term:
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    for _, args in items:
        vs = [t for t in args if t.kind == VAR]
        for t in vs:
            parent.setdefault(t, t)
        for t in vs[1:]:
            a, b = find(vs[0]), find(t)
            if a != b:
                parent[b] = a
    groups: dict[Term | None, list[Item]] = {}
    for item in items:
        vs = [t for t in item[1] if t.kind == VAR]
        groups.setdefault(find(vs[0]) if vs else None, []).append(item)
    return list(groups.values())


@lru_cache(maxsize=200_000)
def _canonical(items: frozenset[Item]) -> tuple[tuple, tuple[tuple[Term, int], ...]]:
    ordered = sorted(items)
    if not any(t.kind == VAR for _, args in ordered for t in args):
        return _encode(ordered, {}), ()
    # components are labelled independently and laid out in order of their codes
    parts = []
    for comp in _components(ordered):
        variables = sorted({t for _, args in comp for t in args if t.kind == VAR})
        if not variables:
            continue
        enc, colour = _search(comp, frozenset(comp), variables, {v: 0 for v in variables})
        parts.append((enc, len(variables), colour))
    parts.sort(key=lambda p: p[:2])
    glob: dict[Term, int] = {}
    offset = 0
    for _, n, colour in parts:
        for v, c in colour.items():
            glob[v] = offset + c
        offset += n
    return _encode(ordered, glob), tuple(glob.items())


def canonical_form(items: Iterable[Item]) -> CanonicalForm:
    return _canonical(frozenset(items))[0]


def canonical_renaming(items: Iterable[Item], prefix: str = "V") -> dict[Term, Term]:
    """Variable renaming that maps the items onto their canonical representative."""
    _, colour = _canonical(frozenset(items))
    return {v: Term(VAR, f"{prefix}{c}") for v, c in colour}


def atom_items(atoms: Iterable[Atom]) -> list[Item]:
    return [(a.pred, a.args) for a in atoms]


def canonicalize(q: ConjunctiveQuery | Iterable[Atom]) -> CanonicalForm:
    atoms = q.atoms if isinstance(q, ConjunctiveQuery) else q
    return canonical_form(atom_items(atoms))


def is_isomorphic(a: ConjunctiveQuery, b: ConjunctiveQuery) -> bool:
    if len(a.atoms) != len(b.atoms):
        return False
    return canonicalize(a) == canonicalize(b)


def canonical_copy(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """The canonical representative of q's isomorphism class (variables V0, V1, ...)."""
    ren = canonical_renaming(atom_items(q.atoms))
    return q.substitute(ren)
