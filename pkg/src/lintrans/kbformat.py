"""Text format for knowledge bases.

    % comment
    @transitive p.
    p(X,Z) :- p(X,Y), p(Y,Z).
    r(X,Y) :- h(X).          Y occurs only in the head: existential
    h(a).                    facts are ground atoms
    ? :- p(a,X), h(X).       Boolean query

Variables start with an upper-case letter, constants with a lower-case
letter. Identifiers may not contain a double underscore; that spelling is
reserved for generated predicates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .analysis import transitivity_predicate, transitivity_rule
from .model import CONST, VAR, Atom, ConjunctiveQuery, ExistentialRule, FactBase, Term, signature


class KBSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int) -> None:
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<directive>@[a-z]+)
  | (?P<implies>:-)
  | (?P<var>[A-Z][A-Za-z0-9_]*)
  | (?P<const>[a-z][a-z0-9_]*)
  | (?P<punct>[(),.?])
  """,
    re.VERBOSE,
)


@dataclass
class KBDocument:
    facts: list[Atom] = field(default_factory=list)
    rules: list[ExistentialRule] = field(default_factory=list)
    queries: list[ConjunctiveQuery] = field(default_factory=list)
    transitive: list[str] = field(default_factory=list)

    def all_rules(self) -> list[ExistentialRule]:
        """Explicit rules plus the transitivity rule of every declared predicate lacking one."""
        explicit = {transitivity_predicate(r) for r in self.rules} - {None}
        implied = [transitivity_rule(p) for p in self.transitive if p not in explicit]
        return list(self.rules) + implied

    def fact_base(self) -> FactBase:
        return FactBase(self.facts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KBDocument):
            return NotImplemented
        return (
            sorted(self.facts) == sorted(other.facts)
            and self.rules == other.rules
            and self.queries == other.queries
            and sorted(self.transitive) == sorted(other.transitive)
        )


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens: list[tuple[str, str, int, int]] = []
        line, col = 1, 1
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise KBSyntaxError(f"unexpected character {text[pos]!r}", line, col)
            kind = m.lastgroup
            value = m.group()
            if kind in ("var", "const") and "__" in value:
                raise KBSyntaxError(f"identifier {value!r} contains a reserved double underscore", line, col)
            if kind not in ("ws", "comment"):
                self.tokens.append((kind, value, line, col))
            nl = value.count("\n")
            if nl:
                line += nl
                col = len(value) - value.rfind("\n")
            else:
                col += len(value)
            pos = m.end()
        self.eof = (line, col)
        self.i = 0

    def peek(self) -> tuple[str, str, int, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def where(self) -> tuple[int, int]:
        tok = self.peek()
        return (tok[2], tok[3]) if tok else self.eof

    def fail(self, message: str) -> KBSyntaxError:
        tok = self.peek()
        found = repr(tok[1]) if tok else "end of input"
        return KBSyntaxError(f"{message}, found {found}", *self.where())

    def expect(self, value: str) -> None:
        tok = self.peek()
        if tok is None or tok[1] != value:
            raise self.fail(f"expected {value!r}")
        self.i += 1

    def atom(self) -> Atom:
        tok = self.peek()
        if tok is None or tok[0] != "const":
            raise self.fail("expected a predicate name")
        self.i += 1
        self.expect("(")
        args = [self.term()]
        while self.peek() and self.peek()[1] == ",":
            self.i += 1
            args.append(self.term())
        self.expect(")")
        return Atom(tok[1], tuple(args))

    def term(self) -> Term:
        tok = self.peek()
        if tok is None or tok[0] not in ("var", "const"):
            raise self.fail("expected a term")
        self.i += 1
        return Term(VAR if tok[0] == "var" else CONST, tok[1])

    def atoms(self) -> list[Atom]:
        out = [self.atom()]
        while self.peek() and self.peek()[1] == ",":
            self.i += 1
            out.append(self.atom())
        return out

    def document(self) -> KBDocument:
        doc = KBDocument()
        while self.peek() is not None:
            kind, value, line, col = self.peek()
            if kind == "directive":
                if value != "@transitive":
                    raise KBSyntaxError(f"unknown directive {value!r}", line, col)
                self.i += 1
                tok = self.peek()
                if tok is None or tok[0] != "const":
                    raise self.fail("expected a predicate name")
                self.i += 1
                self.expect(".")
                if tok[1] not in doc.transitive:
                    doc.transitive.append(tok[1])
            elif value == "?":
                self.i += 1
                self.expect(":-")
                q = self.atoms()
                self.expect(".")
                doc.queries.append(ConjunctiveQuery(q))
            else:
                head = self.atoms()
                tok = self.peek()
                if tok is not None and tok[1] == ":-":
                    self.i += 1
                    body = self.atoms()
                    self.expect(".")
                    doc.rules.append(ExistentialRule(tuple(body), tuple(head), f"r{len(doc.rules) + 1}"))
                else:
                    self.expect(".")
                    if len(head) != 1:
                        raise KBSyntaxError("a fact must be a single atom", line, col)
                    if not head[0].is_ground():
                        raise KBSyntaxError(f"fact {head[0]!r} contains a variable", line, col)
                    if head[0] not in doc.facts:
                        doc.facts.append(head[0])
        return doc


def parse_kb(text: str) -> KBDocument:
    """Parse a KB document; raises KBSyntaxError or ValueError (arity clash)."""
    doc = _Parser(text).document()
    atoms = list(doc.facts)
    for r in doc.rules:
        atoms.extend(r.body)
        atoms.extend(r.head)
    for q in doc.queries:
        atoms.extend(q.atoms)
    atoms.extend(Atom(p, (Term(VAR, "X"), Term(VAR, "Y"))) for p in doc.transitive)
    signature(atoms)
    return doc


def parse_atom(text: str) -> Atom:
    p = _Parser(text)
    a = p.atom()
    if p.peek() is not None:
        raise p.fail("trailing input")
    return a


def parse_atoms(text: str) -> list[Atom]:
    p = _Parser(text)
    out = p.atoms()
    if p.peek() is not None:
        raise p.fail("trailing input")
    return out


def parse_cq(text: str) -> ConjunctiveQuery:
    return ConjunctiveQuery(parse_atoms(text))


def parse_rule(text: str) -> ExistentialRule:
    doc = _Parser(text.strip().rstrip(".") + ".").document()
    if len(doc.rules) != 1 or doc.facts or doc.queries:
        raise ValueError(f"not a single rule: {text!r}")
    return doc.rules[0]


def format_atom(a: Atom) -> str:
    return f"{a.pred}({','.join(t.name for t in a.args)})"


def format_rule(r: ExistentialRule) -> str:
    return f"{', '.join(map(format_atom, r.head))} :- {', '.join(map(format_atom, r.body))}."


def format_query(q: ConjunctiveQuery) -> str:
    return "? :- " + ", ".join(format_atom(a) for a in sorted(q.atoms)) + "."


def format_kb(doc: KBDocument) -> str:
    lines = [f"@transitive {p}." for p in doc.transitive]
    lines += [format_rule(r) for r in doc.rules]
    lines += [format_atom(f) + "." for f in doc.facts]
    lines += [format_query(q) for q in doc.queries]
    return "\n".join(lines) + ("\n" if lines else "")
