import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import A, Q, R
from lintrans.model import (
    CONST,
    MARKER,
    M1,
    ConjunctiveQuery,
    FactBase,
    Fresh,
    Predicate,
    const,
    freshen,
    signature,
    var,
)


def test_term_namespaces_are_disjoint():
    assert const("x") != var("x")
    assert const("a").kind == CONST
    assert M1.kind == MARKER


def test_predicate_transitive_must_be_binary():
    Predicate("p", 2, True)
    with pytest.raises(ValueError):
        Predicate("p", 3, True)
    with pytest.raises(ValueError):
        Predicate("p", 0)


def test_cq_set_semantics():
    q = ConjunctiveQuery([A("p(X,Y)"), A("p(X,Y)"), A("q(X)")])
    assert len(q) == 2
    assert q == Q("q(X), p(X,Y)")


def test_rule_frontier_and_existentials():
    r = R("p(X,Y) :- h(X)")
    assert r.frontier == {var("X")}
    assert r.existentials == {var("Y")}
    assert r.frontier | r.existentials == {var("X"), var("Y")}


def test_factbase_rejects_variables():
    fb = FactBase()
    assert fb.add(A("p(a,b)"))
    assert not fb.add(A("p(a,b)"))
    with pytest.raises(ValueError):
        fb.add(A("p(a,X)"))
    assert fb.with_arg("p", 1, const("b")) == {A("p(a,b)")}


def test_signature_detects_arity_clash():
    assert signature([A("p(a,b)"), A("q(a)")]) == {"p": 2, "q": 1}
    with pytest.raises(ValueError):
        signature([A("p(a,b)"), A("p(a)")])


def test_freshen_avoids_reserved():
    q = Q("p(X,Y), p(Y,a)")
    out = freshen(q, {var("V0"), var("V1")})
    assert not out.variables() & {var("V0"), var("V1")}
    assert const("a") in out.terms()


def test_freshen_is_deterministic():
    q = Q("p(X,Y), r(Y,Z)")
    assert freshen(q, set(), Fresh("N")) == freshen(q, set(), Fresh("N"))


names = st.sampled_from(["X", "Y", "Z", "U"])


@given(st.lists(st.tuples(st.sampled_from(["p", "q"]), names, names), min_size=1, max_size=5))
def test_freshen_preserves_shape(triples):
    q = ConjunctiveQuery(A(f"{p}({x},{y})") for p, x, y in triples)
    out = freshen(q, q.variables())
    assert len(out) == len(q)
    assert not out.variables() & q.variables()
