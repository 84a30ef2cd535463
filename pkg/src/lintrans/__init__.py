"""UCQ rewriting for linear existential rules combined with transitivity rules."""

from .datalog import entails
from .kbformat import parse_kb
from .model import Atom, ConjunctiveQuery, ExistentialRule, FactBase, Term, const, var
from .oracle import oracle_entails
from .rewriter import RewriterConfig, compile_rules, rewrite

__all__ = [
    "Atom",
    "ConjunctiveQuery",
    "ExistentialRule",
    "FactBase",
    "RewriterConfig",
    "Term",
    "compile_rules",
    "const",
    "entails",
    "oracle_entails",
    "parse_kb",
    "rewrite",
    "var",
]

__version__ = "0.1.0"
