"""RDF terms, triples, a source-tagged triple store and an N-Triples subset.

Only IRIs and literals are supported (no blank nodes, no quoted triples).
"""
from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator

IRI = "iri"
LITERAL = "literal"
VARIABLE = "variable"

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")
_IRI_FORBIDDEN = re.compile(r'[\x00-\x20<>"{}|^`\\]')
_LANGTAG = re.compile(r"^[A-Za-z]+(-[A-Za-z0-9]+)*$")


class RDFError(ValueError):
    pass


class NTriplesError(RDFError):
    """Malformed N-Triples line. Carries the 1-based line number and text."""

    def __init__(self, lineno: int, line: str, reason: str = "malformed triple"):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class Term:
    kind: str
    value: str
    datatype: str | None = None
    lang: str | None = None

    def __post_init__(self):
        if self.kind == IRI:
            if not _SCHEME.match(self.value) or _IRI_FORBIDDEN.search(self.value):
                raise RDFError(f"not an absolute IRI: {self.value!r}")
        elif self.kind == VARIABLE:
            if not self.value or any(c.isspace() for c in self.value):
                raise RDFError(f"bad variable name: {self.value!r}")
        elif self.kind == LITERAL:
            if self.datatype is not None and self.lang is not None:
                raise RDFError("literal cannot carry both datatype and language tag")
            if self.datatype is not None:
                Term(IRI, self.datatype)
            if self.lang is not None and not _LANGTAG.match(self.lang):
                raise RDFError(f"bad language tag: {self.lang!r}")
        else:
            raise RDFError(f"unknown term kind: {self.kind!r}")
        if self.kind != LITERAL and (self.datatype is not None or self.lang is not None):
            raise RDFError("only literals carry datatype or language tag")

    @property
    def is_iri(self) -> bool:
        return self.kind == IRI

    @property
    def is_literal(self) -> bool:
        return self.kind == LITERAL

    @property
    def is_variable(self) -> bool:
        return self.kind == VARIABLE

    def n3(self) -> str:
        """Canonical N-Triples (or SPARQL, for variables) rendering."""
        if self.kind == IRI:
            return f"<{self.value}>"
        if self.kind == VARIABLE:
            return f"?{self.value}"
        text = f'"{_escape(self.value)}"'
        if self.datatype is not None:
            return f"{text}^^<{self.datatype}>"
        if self.lang is not None:
            return f"{text}@{self.lang}"
        return text

    def __str__(self) -> str:
        return self.n3()

    def __lt__(self, other: Term) -> bool:
        return self.n3() < other.n3()


def iri(value: str) -> Term:
    return Term(IRI, value)


def literal(value: str, datatype: str | None = None, lang: str | None = None) -> Term:
    return Term(LITERAL, value, datatype, lang)


def var(name: str) -> Term:
    return Term(VARIABLE, name)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not self.subject.is_iri:
            raise RDFError(f"triple subject must be an IRI, got {self.subject}")
        if not self.predicate.is_iri:
            raise RDFError(f"triple predicate must be an IRI, got {self.predicate}")
        if self.object.is_variable:
            raise RDFError("triple object cannot be a variable")

    def __iter__(self) -> Iterator[Term]:
        return iter((self.subject, self.predicate, self.object))

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."

    def sort_key(self) -> tuple[str, str, str]:
        return (self.subject.n3(), self.predicate.n3(), self.object.n3())


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t",
              "b": "\b", "f": "\f", "'": "'"}


def _escape(text: str) -> str:
    return "".join(_ESCAPES.get(c, c) for c in text)


_UNESCAPE_RE = re.compile(r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)")


def unescape(text: str) -> str:
    def repl(m: re.Match) -> str:
        code = m.group(1)
        if code[0] in "uU" and len(code) > 1:
            return chr(int(code[1:], 16))
        if code in _UNESCAPES:
            return _UNESCAPES[code]
        raise RDFError(f"bad escape sequence \\{code}")

    return _UNESCAPE_RE.sub(repl, text)


_IRIREF = r"<([^\x00-\x20<>\"{}|^`\\]*)>"
_LINE = re.compile(
    r"^\s*" + _IRIREF + r"\s*" + _IRIREF + r"\s*"
    r"(?:" + _IRIREF + r'|"((?:[^"\\\n\r]|\\.)*)"(?:\^\^' + _IRIREF
    + r"|@([A-Za-z]+(?:-[A-Za-z0-9]+)*))?)"
    r"\s*\.\s*$"
)


def parse_ntriples(text: str, source_iri: str | None = None) -> list[Triple]:
    """Parse the IRI/literal subset of N-Triples.

    ``source_iri`` is accepted for symmetry with the store API and only
    appears in error messages.
    """
    triples = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _LINE.match(line)
        if m is None:
            raise NTriplesError(lineno, line, _where(source_iri))
        s, p, o_iri, o_lex, o_dt, o_lang = m.groups()
        try:
            if o_iri is not None:
                obj = iri(o_iri)
            else:
                obj = literal(unescape(o_lex), o_dt, o_lang)
            triples.append(Triple(iri(s), iri(p), obj))
        except RDFError as exc:
            raise NTriplesError(lineno, line, str(exc)) from None
    return triples


def _where(source_iri: str | None) -> str:
    return "malformed triple" if source_iri is None else f"malformed triple in {source_iri}"


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    return "".join(t.n3() + "\n" for t in triples)


class SourcedStore:
    """Append-only set of (triple, source document) entries.

    Inserts and reads are guarded by one lock, so a reader always sees a
    prefix-closed set of completed inserts.
    """

    def __init__(self, entries: Iterable[tuple[Triple, str]] = ()):
        self._lock = threading.Lock()
        self._entries: set[tuple[Triple, str]] = set()
        self._by_subject: dict[Term, set[tuple[Triple, str]]] = {}
        self._by_predicate: dict[Term, set[tuple[Triple, str]]] = {}
        self._by_object: dict[Term, set[tuple[Triple, str]]] = {}
        for triple, source in entries:
            self.add(triple, source)

    def add(self, triple: Triple, source: str) -> bool:
        entry = (triple, source)
        with self._lock:
            if entry in self._entries:
                return False
            self._entries.add(entry)
            self._by_subject.setdefault(triple.subject, set()).add(entry)
            self._by_predicate.setdefault(triple.predicate, set()).add(entry)
            self._by_object.setdefault(triple.object, set()).add(entry)
            return True

    def add_all(self, triples: Iterable[Triple], source: str) -> int:
        return sum(self.add(t, source) for t in triples)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def __iter__(self) -> Iterator[tuple[Triple, str]]:
        return iter(self.snapshot())

    def __contains__(self, entry) -> bool:
        with self._lock:
            return entry in self._entries

    def snapshot(self) -> list[tuple[Triple, str]]:
        with self._lock:
            return list(self._entries)

    def sources(self) -> set[str]:
        with self._lock:
            return {source for _, source in self._entries}

    def triples(self) -> set[Triple]:
        with self._lock:
            return {t for t, _ in self._entries}

    def _candidates(self, s, p, o) -> set[tuple[Triple, str]]:
        with self._lock:
            pools = []
            for term, index in ((s, self._by_subject), (p, self._by_predicate),
                                (o, self._by_object)):
                if term is not None:
                    pools.append(index.get(term, set()))
            if not pools:
                return set(self._entries)
            pools.sort(key=len)
            return set(pools[0])


def _entry_key(entry: tuple[Triple, str]):
    triple, source = entry
    return (*triple.sort_key(), source)


def match_pattern(store: SourcedStore, s: Term | None = None, p: Term | None = None,
                  o: Term | None = None) -> list[tuple[Triple, str]]:
    """Entries whose positions equal every given term, sorted by (s, p, o, source)."""
    for term in (s, p, o):
        if term is not None and term.is_variable:
            raise RDFError("match_pattern takes concrete terms or None, not variables")
    hits = [
        (t, src) for t, src in store._candidates(s, p, o)
        if (s is None or t.subject == s)
        and (p is None or t.predicate == p)
        and (o is None or t.object == o)
    ]
    hits.sort(key=_entry_key)
    return hits
