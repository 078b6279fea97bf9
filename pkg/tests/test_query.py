from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_bgp, canonical
from ltqp.query import (RDF_TYPE, Dependency, PrefixResolutionError, QueryError, QuerySyntaxError,
                        TriplePattern, UnsupportedFeatureError, decompose_stars, evaluate, evaluate_bgp,
                        format_select, parse_select, project, solution_line)
from ltqp.rdf import SourcedStore, Triple, iri, literal, var

EX = "http://ex.org/"


def test_parse_single_pattern():
    q = parse_select("SELECT ?s WHERE { ?s <http://ex.org/p> ?o }")
    assert q.projection == ["s"]
    assert q.bgp == [TriplePattern(var("s"), iri(EX + "p"), var("o"))]


def test_parse_prefixes_a_and_shorthand():
    q = parse_select("""
        PREFIX ex: <http://ex.org/>
        SELECT * WHERE {
          ?s a ex:Post ; ex:tag "x", "y"@en ; ex:n 3 .
          ?t ex:score 1.5
        }""")
    assert q.projection is None
    assert [tp.predicate.value for tp in q.bgp] == [RDF_TYPE, EX + "tag", EX + "tag", EX + "n", EX + "score"]
    assert q.bgp[2].object == literal("y", lang="en")
    assert q.bgp[3].object.datatype.endswith("#integer")
    assert q.bgp[4].object.datatype.endswith("#decimal")
    assert q.projected() == ["s", "t"]


def test_parse_four_patterns_two_subjects():
    q = parse_select("""
        PREFIX ex: <http://ex.org/>
        SELECT ?p ?n WHERE { ?p ex:hasCreator ?c . ?p ex:content ?x . ?c ex:name ?n . ?c a ex:Person }""")
    assert len(q.bgp) == 4
    d = decompose_stars(q.bgp)
    assert [s.subject for s in d.stars] == [var("p"), var("c")]
    assert [len(s.patterns) for s in d.stars] == [2, 2]
    assert d.dependencies == [Dependency(0, iri(EX + "hasCreator"), 1)]


def test_parse_typed_literal_and_where_optional():
    q = parse_select('PREFIX xsd: <http://www.w3.org/2001/XMLSchema#> SELECT ?s { ?s <http://ex.org/p> "1"^^xsd:int }')
    assert q.bgp[0].object == literal("1", "http://www.w3.org/2001/XMLSchema#int")


@pytest.mark.parametrize("text,token", [
    ("SELECT ?s WHERE { ?s <http://ex.org/p>/<http://ex.org/q> ?o }", "/"),
    ("SELECT ?s WHERE { ?s <http://ex.org/p>+ ?o }", "+"),
    ("SELECT ?s WHERE { ?s ^<http://ex.org/p> ?o }", "^"),
    ("SELECT ?s WHERE { ?s <http://ex.org/p> ?o FILTER(?o) }", "FILTER"),
    ("SELECT ?s WHERE { ?s <http://ex.org/p> ?o OPTIONAL { ?s <http://ex.org/q> ?z } }", "OPTIONAL"),
    ("SELECT ?s WHERE { { ?s <http://ex.org/p> ?o } UNION { ?s <http://ex.org/q> ?o } }", "{"),
    ("SELECT DISTINCT ?s WHERE { ?s <http://ex.org/p> ?o }", "DISTINCT"),
    ("SELECT ?s WHERE { ?s <http://ex.org/p> ?o } LIMIT 5", "LIMIT"),
    ("SELECT ?s WHERE { ?s <http://ex.org/p> ?o } ORDER BY ?s", "ORDER"),
    ("ASK { ?s <http://ex.org/p> ?o }", "ASK"),
])
def test_unsupported_features_are_named(text, token):
    with pytest.raises(UnsupportedFeatureError) as info:
        parse_select(text)
    assert info.value.token == token


@pytest.mark.parametrize("text,error", [
    ("SELECT ?s WHERE { ?s ex:p ?o }", PrefixResolutionError),
    ("SELECT ?x WHERE { ?s <http://ex.org/p> ?o }", QuerySyntaxError),
    ("SELECT ?s WHERE { }", QuerySyntaxError),
    ("SELECT ?s WHERE { ?s <http://ex.org/p> ?o ", QuerySyntaxError),
    ('SELECT ?s WHERE { "x" <http://ex.org/p> ?s }', QuerySyntaxError),
    ("SELECT WHERE { ?s <http://ex.org/p> ?o }", QuerySyntaxError),
])
def test_malformed_queries(text, error):
    with pytest.raises(error):
        parse_select(text)


def test_format_select_round_trips():
    q = parse_select('SELECT ?s ?o WHERE { ?s <http://ex.org/p> ?o ; <http://ex.org/q> "v"@en }')
    again = parse_select(format_select(q))
    assert again.bgp == q.bgp and again.projection == q.projection


def test_decompose_single_star():
    q = parse_select("SELECT * { ?s <http://ex.org/p> ?a ; <http://ex.org/q> ?b ; <http://ex.org/r> 1 }")
    d = decompose_stars(q.bgp)
    assert len(d.stars) == 1 and len(d.stars[0].patterns) == 3
    assert d.dependencies == []


def test_decompose_dependencies_are_deduplicated_and_include_self_loops():
    q = parse_select("SELECT * { ?a <http://ex.org/p> ?b . ?a <http://ex.org/p> ?b . "
                     "?b <http://ex.org/q> ?a . ?a <http://ex.org/r> ?a }")
    d = decompose_stars(q.bgp)
    assert d.dependencies == [Dependency(0, iri(EX + "p"), 1), Dependency(0, iri(EX + "r"), 0),
                              Dependency(1, iri(EX + "q"), 0)]


_vocab = [iri(EX + n) for n in "abcd"]
_var_names = ["x", "y", "z"]
_pos = st.one_of(st.sampled_from(_vocab), st.sampled_from(_var_names).map(var))
_patterns = st.builds(TriplePattern, _pos, _pos, _pos)
_triples = st.builds(Triple, st.sampled_from(_vocab), st.sampled_from(_vocab), st.sampled_from(_vocab))


@given(st.lists(_patterns, min_size=1, max_size=6))
def test_decomposition_partitions_patterns(bgp):
    d = decompose_stars(bgp)
    flat = [tp for s in d.stars for tp in s.patterns]
    assert sorted(map(TriplePattern.n3, flat)) == sorted(map(TriplePattern.n3, bgp))
    for star in d.stars:
        assert all(tp.subject == star.subject for tp in star.patterns)
    assert len({s.subject for s in d.stars}) == len(d.stars)


@given(st.lists(_triples, max_size=6), st.lists(_patterns, min_size=1, max_size=3))
def test_evaluate_bgp_matches_brute_force(triples, bgp):
    store = SourcedStore()
    for n, t in enumerate(triples):
        store.add(t, f"doc{n % 2}")
    assert canonical(evaluate_bgp(store, bgp)) == brute_force_bgp(triples, bgp)


def test_evaluate_two_pattern_join():
    a, b, c = (iri(EX + n) for n in "abc")
    p, q = iri(EX + "p"), iri(EX + "q")
    store = SourcedStore()
    store.add_all([Triple(a, p, b), Triple(b, q, c), Triple(a, p, c)], "d")
    query = parse_select("SELECT ?x ?z { ?x <http://ex.org/p> ?y . ?y <http://ex.org/q> ?z }")
    assert [solution_line(mu) for mu in evaluate(store, query)] == [f"?x=<{EX}a>\t?z=<{EX}c>"]


def test_triples_from_several_sources_count_once():
    a, p = iri(EX + "a"), iri(EX + "p")
    store = SourcedStore()
    store.add(Triple(a, p, a), "d1")
    store.add(Triple(a, p, a), "d2")
    assert len(evaluate_bgp(store, [TriplePattern(var("s"), p, var("o"))])) == 1


def test_projection_keeps_duplicates():
    sols = [{"s": iri(EX + "a"), "o": iri(EX + "b")}, {"s": iri(EX + "a"), "o": iri(EX + "c")}]
    assert project(sols, ["s"]) == [{"s": iri(EX + "a")}, {"s": iri(EX + "a")}]


def test_query_errors_share_a_base_class():
    assert issubclass(UnsupportedFeatureError, QueryError)
    assert issubclass(PrefixResolutionError, QueryError)
