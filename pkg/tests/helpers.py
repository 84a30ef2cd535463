"""Small builders shared by the tests."""

from lintrans.kbformat import parse_atom, parse_cq, parse_kb, parse_rule
from lintrans.model import M1, M2, Atom, Term, const, var

__all__ = ["M1", "M2", "Atom", "Term", "const", "var", "A", "D", "Q", "R", "KB"]


def A(text: str) -> Atom:
    return parse_atom(text)


def Q(text: str):
    return parse_cq(text)


def R(text: str):
    return parse_rule(text)


def KB(text: str):
    return parse_kb(text)


def D(name: str, pred: str, text: str):
    """Pattern definition from ``a | b | ...`` where A1 and A2 stand for #1 and #2."""
    from lintrans.patterns import PatternDefinition

    marks = {var("A1"): M1, var("A2"): M2}
    atoms = [parse_atom(part.strip()).substitute(marks) for part in text.split("|")]
    return PatternDefinition(name, pred, tuple(atoms))
