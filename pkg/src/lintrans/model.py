"""Terms, atoms, conjunctive queries, rules and fact bases.

Everything here is immutable except :class:`FactBase` and :class:`Fresh`,
which are owned by whoever creates them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

CONST = 0
MARKER = 1
VAR = 2


class Term(NamedTuple):
    """A constant, a pattern marker (#1 / #2) or a variable.

    The kind comes first so that sorting puts constants before markers
    before variables, which is the representative priority used by
    term partitions.
    """

    kind: int
    name: str

    @property
    def is_var(self) -> bool:
        return self.kind == VAR

    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    @property
    def is_marker(self) -> bool:
        return self.kind == MARKER

    def __repr__(self) -> str:
        return self.name


def const(name: str) -> Term:
    return Term(CONST, name)


def var(name: str) -> Term:
    return Term(VAR, name)


M1 = Term(MARKER, "#1")
M2 = Term(MARKER, "#2")


class Atom(NamedTuple):
    pred: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)

    def terms(self) -> set[Term]:
        return set(self.args)

    def variables(self) -> set[Term]:
        return {t for t in self.args if t.kind == VAR}

    def substitute(self, subst: dict[Term, Term]) -> "Atom":
        return Atom(self.pred, tuple(subst.get(t, t) for t in self.args))

    def is_ground(self) -> bool:
        return all(t.kind == CONST for t in self.args)

    def __repr__(self) -> str:
        return f"{self.pred}({','.join(t.name for t in self.args)})"


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    transitive: bool = False

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise ValueError(f"predicate {self.name} needs a positive arity")
        if self.transitive and self.arity != 2:
            raise ValueError(f"transitive predicate {self.name} must be binary")


def terms_of(atoms: Iterable[Atom]) -> set[Term]:
    out: set[Term] = set()
    for a in atoms:
        out.update(a.args)
    return out


def variables_of(atoms: Iterable[Atom]) -> set[Term]:
    return {t for t in terms_of(atoms) if t.kind == VAR}


def signature(atoms: Iterable[Atom]) -> dict[str, int]:
    """Predicate name to arity; raises ValueError on inconsistent use."""
    sig: dict[str, int] = {}
    for a in atoms:
        known = sig.setdefault(a.pred, a.arity)
        if known != a.arity:
            raise ValueError(f"predicate {a.pred} used with arities {known} and {a.arity}")
    return sig


@dataclass(frozen=True)
class ConjunctiveQuery:
    """A Boolean CQ: a set of atoms, all variables existentially closed."""

    atoms: frozenset[Atom]

    def __init__(self, atoms: Iterable[Atom] = ()) -> None:
        object.__setattr__(self, "atoms", frozenset(atoms))

    def __iter__(self) -> Iterator[Atom]:
        return iter(sorted(self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def terms(self) -> set[Term]:
        return terms_of(self.atoms)

    def variables(self) -> set[Term]:
        return variables_of(self.atoms)

    def substitute(self, subst: dict[Term, Term]) -> "ConjunctiveQuery":
        return ConjunctiveQuery(a.substitute(subst) for a in self.atoms)

    def __repr__(self) -> str:
        return " & ".join(repr(a) for a in self)


CQ = ConjunctiveQuery


@dataclass(frozen=True)
class ExistentialRule:
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", tuple(self.body))
        object.__setattr__(self, "head", tuple(self.head))

    @property
    def frontier(self) -> frozenset[Term]:
        return frozenset(variables_of(self.body) & variables_of(self.head))

    @property
    def existentials(self) -> frozenset[Term]:
        return frozenset(variables_of(self.head) - variables_of(self.body))

    def variables(self) -> set[Term]:
        return variables_of(self.body) | variables_of(self.head)

    def substitute(self, subst: dict[Term, Term]) -> "ExistentialRule":
        return ExistentialRule(
            tuple(a.substitute(subst) for a in self.body),
            tuple(a.substitute(subst) for a in self.head),
            self.label,
        )

    def __repr__(self) -> str:
        body = ", ".join(repr(a) for a in self.body)
        head = ", ".join(repr(a) for a in self.head)
        return f"{head} :- {body}"


class FactBase:
    """A set of ground atoms with per-predicate and per-argument indexes."""

    def __init__(self, facts: Iterable[Atom] = ()) -> None:
        self._facts: set[Atom] = set()
        self._by_pred: dict[str, set[Atom]] = {}
        self._by_arg: dict[tuple[str, int, Term], set[Atom]] = {}
        for f in facts:
            self.add(f)

    def add(self, fact: Atom) -> bool:
        """Insert a ground atom; returns False if it was already present."""
        if fact in self._facts:
            return False
        if not fact.is_ground():
            raise ValueError(f"fact {fact!r} is not ground")
        self._facts.add(fact)
        self._by_pred.setdefault(fact.pred, set()).add(fact)
        for i, t in enumerate(fact.args):
            self._by_arg.setdefault((fact.pred, i, t), set()).add(fact)
        return True

    def update(self, facts: Iterable[Atom]) -> int:
        return sum(1 for f in facts if self.add(f))

    def __contains__(self, fact: object) -> bool:
        return fact in self._facts

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._facts)

    def __len__(self) -> int:
        return len(self._facts)

    def with_pred(self, pred: str) -> set[Atom]:
        return self._by_pred.get(pred, set())

    def with_arg(self, pred: str, pos: int, term: Term) -> set[Atom]:
        return self._by_arg.get((pred, pos, term), set())

    def terms(self) -> set[Term]:
        return terms_of(self._facts)

    def predicates(self) -> set[str]:
        return {p for p, s in self._by_pred.items() if s}

    def copy(self) -> "FactBase":
        return FactBase(self._facts)

    def sorted(self) -> list[Atom]:
        return sorted(self._facts)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FactBase):
            return self._facts == other._facts
        return NotImplemented

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(a) for a in self.sorted()) + "}"


class Fresh:
    """Monotone generator of variable names that avoids a reserved set."""

    def __init__(self, prefix: str = "V", taken: Iterable[str] = ()) -> None:
        self.prefix = prefix
        self.counter = 0
        self.taken = set(taken)

    def reserve(self, names: Iterable[str]) -> None:
        self.taken.update(names)

    def __call__(self) -> Term:
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.taken:
                self.taken.add(name)
                return Term(VAR, name)


def freshen_atoms(atoms: Iterable[Atom], fresh: Fresh) -> tuple[list[Atom], dict[Term, Term]]:
    """Rename every variable, in first-occurrence order over sorted atoms."""
    atoms = sorted(atoms)
    ren: dict[Term, Term] = {}
    for a in atoms:
        for t in a.args:
            if t.kind == VAR and t not in ren:
                ren[t] = fresh()
    return [a.substitute(ren) for a in atoms], ren


def freshen(q: ConjunctiveQuery, reserved: Iterable[Term] = (), fresh: Fresh | None = None) -> ConjunctiveQuery:
    """Isomorphic copy of ``q`` whose variables avoid ``reserved``."""
    if fresh is None:
        fresh = Fresh()
    fresh.reserve(t.name for t in reserved)
    atoms, _ = freshen_atoms(q.atoms, fresh)
    return ConjunctiveQuery(atoms)


def freshen_rule(rule: ExistentialRule, fresh: Fresh) -> ExistentialRule:
    ren: dict[Term, Term] = {}
    for a in rule.body + rule.head:
        for t in a.args:
            if t.kind == VAR and t not in ren:
                ren[t] = fresh()
    return rule.substitute(ren)
