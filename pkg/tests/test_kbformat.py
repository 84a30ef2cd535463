import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import A, KB, const, var
from lintrans.analysis import transitivity_rule
from lintrans.checking import random_safe_kb
from lintrans.kbformat import KBSyntaxError, format_kb, parse_cq, parse_kb, parse_rule

DOC = """
% a small document
@transitive p.
p(X,Y) :- h(X).
r(X,Y), s(Y) :- q(X).
h(a).
q(b).
? :- p(a,X), h(X).
? :- s(Z).
"""


def test_document_sections():
    kb = parse_kb(DOC)
    assert kb.transitive == ["p"]
    assert len(kb.rules) == 2
    assert kb.facts == [A("h(a)"), A("q(b)")]
    assert len(kb.queries) == 2


def test_head_only_variables_are_existential():
    assert parse_rule("p(X,Y) :- h(X).").existentials == frozenset({var("Y")})
    assert parse_rule("r(X,Y), s(Y) :- q(X)").existentials == frozenset({var("Y")})


def test_explicit_transitivity_rule():
    kb = parse_kb("p(X,Z) :- p(X,Y), p(Y,Z).")
    assert kb.all_rules() == [transitivity_rule("p")]


def test_directive_implies_the_rule_once():
    kb = parse_kb("@transitive p. @transitive p. p(X,Z) :- p(X,Y), p(Y,Z).")
    assert kb.transitive == ["p"]
    assert len(kb.all_rules()) == 1


def test_terms_by_case():
    q = parse_cq("p(a,X), q(Xy_1,b2)")
    terms = {t for a in q.atoms for t in a.args}
    assert terms == {const("a"), var("X"), var("Xy_1"), const("b2")}


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("p(a,b.", 1, 6),
        ("h(a).\np(a,,b).", 2, 5),
        ("h(a).\n\n  p(X).", 3, 3),
        ("? p(a).", 1, 3),
        ("@foo p.", 1, 1),
        ("h(a) :- .", 1, 9),
        ("h(a)", 1, 5),
        ("p(a,b) & q(a).", 1, 8),
        ("p__tc(a,b).", 1, 1),
    ],
)
def test_syntax_errors_carry_positions(text, line, col):
    with pytest.raises(KBSyntaxError) as info:
        parse_kb(text)
    assert (info.value.line, info.value.col) == (line, col)
    assert f"line {line}, column {col}" in str(info.value)


def test_arity_clash_is_an_error():
    with pytest.raises(ValueError, match="arities"):
        parse_kb("p(a,b). ? :- p(X).")
    with pytest.raises(ValueError, match="arities"):
        parse_kb("@transitive h. h(a).")


def test_multi_atom_fact_is_rejected():
    with pytest.raises(KBSyntaxError):
        parse_kb("h(a), h(b).")


def test_round_trip_of_a_document():
    kb = parse_kb(DOC)
    assert parse_kb(format_kb(kb)) == kb
    assert format_kb(parse_kb(format_kb(kb))) == format_kb(kb)


def test_empty_document():
    kb = parse_kb("% nothing\n")
    assert format_kb(kb) == ""
    assert parse_kb("") == kb


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip_of_generated_documents(seed):
    kb = random_safe_kb(random.Random(seed))
    text = format_kb(kb)
    again = parse_kb(text)
    assert again == parse_kb(format_kb(again))
    assert format_kb(again) == text
    assert again.all_rules() == kb.all_rules()


def test_kb_helper_matches_parser():
    assert KB(DOC) == parse_kb(DOC)
