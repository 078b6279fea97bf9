from __future__ import annotations

import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltqp.rdf import (NTriplesError, RDFError, SourcedStore, Term, Triple, iri, literal, match_pattern,
                      parse_ntriples, serialize_ntriples, var)

EX = "http://ex.org/"
XSD_INT = "http://www.w3.org/2001/XMLSchema#integer"


def test_parse_single_iri_triple():
    triples = parse_ntriples(f"<{EX}a> <{EX}p> <{EX}b> .\n")
    assert triples == [Triple(iri(EX + "a"), iri(EX + "p"), iri(EX + "b"))]


def test_parse_literals_with_datatype_lang_and_escapes():
    text = (
        f'<{EX}a> <{EX}p> "42"^^<{XSD_INT}> .\n'
        f'<{EX}a> <{EX}p> "hallo"@de-AT .\n'
        f'<{EX}a> <{EX}p> "line\\nbreak \\"q\\" \\u00e9" .\n'
    )
    a, b, c = parse_ntriples(text)
    assert a.object == literal("42", XSD_INT)
    assert b.object == literal("hallo", lang="de-AT")
    assert c.object.value == 'line\nbreak "q" é'


def test_parse_skips_blank_and_comment_lines():
    text = f"# header\n\n   \n<{EX}a> <{EX}p> <{EX}b> .\n# trailer\n"
    assert len(parse_ntriples(text)) == 1


def test_parse_empty_document():
    assert parse_ntriples("") == []


@pytest.mark.parametrize("line", [
    f"<{EX}a> <{EX}p> <{EX}b>",              # missing dot
    f'"lit" <{EX}p> <{EX}b> .',              # literal subject
    f"<{EX}a> <{EX}p> .",                    # missing object
    f"<relative> <{EX}p> <{EX}b> .",         # not absolute
    f'<{EX}a> <{EX}p> "x"^^<{XSD_INT}>@en .',
    "_:b0 <http://ex.org/p> <http://ex.org/b> .",
])
def test_parse_rejects_malformed_lines_with_line_number(line):
    text = f"<{EX}a> <{EX}p> <{EX}b> .\n{line}\n"
    with pytest.raises(NTriplesError) as info:
        parse_ntriples(text, source_iri=EX + "doc")
    assert info.value.lineno == 2
    assert info.value.line == line


def test_term_validation():
    with pytest.raises(RDFError):
        iri("no-scheme")
    with pytest.raises(RDFError):
        iri("http://ex.org/has space")
    with pytest.raises(RDFError):
        var("")
    with pytest.raises(RDFError):
        literal("x", XSD_INT, "en")
    with pytest.raises(RDFError):
        Triple(var("s"), iri(EX + "p"), iri(EX + "o"))
    with pytest.raises(RDFError):
        Triple(iri(EX + "s"), iri(EX + "p"), var("o"))


def test_serialize_is_canonical():
    t = Triple(iri(EX + "a"), iri(EX + "p"), literal('say "hi"\n', lang="en"))
    assert serialize_ntriples([t]) == f'<{EX}a> <{EX}p> "say \\"hi\\"\\n"@en .\n'


def test_round_trip_three_triples():
    triples = [
        Triple(iri(EX + "a"), iri(EX + "p"), iri(EX + "b")),
        Triple(iri(EX + "a"), iri(EX + "q"), literal("1", XSD_INT)),
        Triple(iri(EX + "b"), iri(EX + "p"), literal("x", lang="en")),
    ]
    assert parse_ntriples(serialize_ntriples(triples)) == triples


_names = st.sampled_from(["a", "b", "c", "d/e", "f#g"])
_iris = _names.map(lambda n: iri(EX + n))
_literals = st.builds(
    lambda text, tag: literal(text, *tag),
    st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=12),
    st.sampled_from([(None, None), (XSD_INT, None), (None, "en"), (None, "pt-BR")]),
)
_triples = st.builds(Triple, _iris, _iris, st.one_of(_iris, _literals))


@given(st.lists(_triples, max_size=8))
def test_round_trip_property(triples):
    assert parse_ntriples(serialize_ntriples(triples)) == triples


def _store(entries):
    store = SourcedStore()
    for t, src in entries:
        store.add(t, src)
    return store


A, B, C = iri(EX + "a"), iri(EX + "b"), iri(EX + "c")
P, Q = iri(EX + "p"), iri(EX + "q")


def test_match_pattern_subject_and_predicate():
    entries = [(Triple(A, P, B), "d1"), (Triple(A, P, C), "d1"), (Triple(A, Q, B), "d2")]
    hits = match_pattern(_store(entries), A, P, None)
    assert [t.object for t, _ in hits] == [B, C]


def test_match_pattern_all_wildcards_returns_everything_sorted():
    entries = [(Triple(B, P, A), "d2"), (Triple(A, Q, C), "d1"), (Triple(A, P, B), "d1"),
               (Triple(A, P, B), "d0")]
    hits = match_pattern(_store(entries))
    assert hits == [(Triple(A, P, B), "d0"), (Triple(A, P, B), "d1"),
                    (Triple(A, Q, C), "d1"), (Triple(B, P, A), "d2")]


def test_match_pattern_absent_predicate_is_empty():
    assert match_pattern(_store([(Triple(A, P, B), "d")]), None, Q, None) == []


def test_store_has_set_semantics():
    store = SourcedStore()
    assert store.add(Triple(A, P, B), "d") is True
    assert store.add(Triple(A, P, B), "d") is False
    assert store.add(Triple(A, P, B), "e") is True
    assert len(store) == 2
    assert store.sources() == {"d", "e"}
    assert store.triples() == {Triple(A, P, B)}


def test_match_pattern_rejects_variables():
    with pytest.raises(RDFError):
        match_pattern(SourcedStore(), var("s"))


_entries = st.lists(st.tuples(_triples, st.sampled_from(["d1", "d2", "d3"])), max_size=12)
_opt = st.one_of(st.none(), _iris)


@given(_entries, _opt, _opt, st.one_of(st.none(), _iris), st.randoms())
def test_match_pattern_independent_of_insertion_order(entries, s, p, o, rnd):
    shuffled = list(entries)
    rnd.shuffle(shuffled)
    assert match_pattern(_store(entries), s, p, o) == match_pattern(_store(shuffled), s, p, o)
    # and equal to a filter over the distinct entries
    expected = sorted({(t, src) for t, src in entries
                       if (s is None or t.subject == s) and (p is None or t.predicate == p)
                       and (o is None or t.object == o)},
                      key=lambda e: (*e[0].sort_key(), e[1]))
    assert match_pattern(_store(entries), s, p, o) == expected


def test_concurrent_inserts_are_all_kept():
    store = SourcedStore()
    triples = [Triple(iri(f"{EX}s{i}"), P, literal(str(i))) for i in range(400)]
    chunks = [triples[i::4] for i in range(4)]

    def worker(chunk):
        for t in chunk:
            store.add(t, "doc")

    threads = [threading.Thread(target=worker, args=(c,)) for c in chunks]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert store.triples() == set(triples)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=2**31))
def test_term_ordering_is_total_on_n3(seed):
    rng = random.Random(seed)
    terms = [iri(EX + rng.choice("abc")), literal(rng.choice("xyz")), var(rng.choice("uvw"))]
    ordered = sorted(terms)
    assert [t.n3() for t in ordered] == sorted(t.n3() for t in terms)
    assert isinstance(ordered[0], Term)
