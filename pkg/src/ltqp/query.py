"""SELECT/BGP subset of SPARQL: parsing, star decomposition and evaluation."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable

from .rdf import RDFError, SourcedStore, Term, iri, literal, match_pattern, unescape, var

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"

Solution = dict  # variable name -> Term


class QueryError(ValueError):
    pass


class QuerySyntaxError(QueryError):
    pass


class UnsupportedFeatureError(QueryError):
    """The query uses SPARQL beyond SELECT over one basic graph pattern."""

    def __init__(self, token: str, detail: str = ""):
        msg = f"unsupported query feature: {token}"
        super().__init__(msg + (f" ({detail})" if detail else ""))
        self.token = token


class PrefixResolutionError(QueryError):
    pass


@dataclass(frozen=True)
class TriplePattern:
    subject: Term
    predicate: Term
    object: Term
    # free-form metadata (shape translation stores the originating constraint)
    annotation: Any = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        if self.subject.is_literal or self.predicate.is_literal:
            raise QueryError("literals may only appear in object position")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def variables(self) -> list[str]:
        return [t.value for t in self if t.is_variable]

    def n3(self) -> str:
        return f"{self.subject.n3()} {self.predicate.n3()} {self.object.n3()} ."


@dataclass
class SelectQuery:
    projection: list[str] | None  # None means SELECT *
    bgp: list[TriplePattern]
    prefixes: dict[str, str] = field(default_factory=dict)

    def variables(self) -> list[str]:
        seen: dict[str, None] = {}
        for tp in self.bgp:
            for name in tp.variables():
                seen.setdefault(name)
        return list(seen)

    def projected(self) -> list[str]:
        return self.variables() if self.projection is None else list(self.projection)


@dataclass(frozen=True)
class StarPattern:
    subject: Term
    patterns: tuple[TriplePattern, ...]
    id: int = 0

    def __post_init__(self):
        if not self.patterns:
            raise QueryError("a star pattern needs at least one triple pattern")
        if any(tp.subject != self.subject for tp in self.patterns):
            raise QueryError("all patterns of a star must share its subject")

    def constant_predicates(self) -> set[str]:
        return {tp.predicate.value for tp in self.patterns if tp.predicate.is_iri}

    def has_variable_predicate(self) -> bool:
        return any(tp.predicate.is_variable for tp in self.patterns)


@dataclass(frozen=True)
class Dependency:
    source: int
    predicate: Term
    target: int


@dataclass
class StarDecomposition:
    stars: list[StarPattern]
    dependencies: list[Dependency]


# --------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<var>[?$][A-Za-z0-9_]+)
  | (?P<string>"(?:[^"\\\n\r]|\\.)*"|'(?:[^'\\\n\r]|\\.)*')
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<dtype>\^\^)
  | (?P<pname>(?:[A-Za-z][\w\-]*)?:(?:[\w\-]+(?:\.[\w\-]+)*)?)
  | (?P<number>[+-]?\d+(?:\.\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[{}.;,*+/|^()?!=<>\[\]])
""", re.VERBOSE)

_UNSUPPORTED_WORDS = {
    "FILTER", "OPTIONAL", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH",
    "ORDER", "LIMIT", "OFFSET", "GROUP", "HAVING", "DISTINCT", "REDUCED",
    "CONSTRUCT", "ASK", "DESCRIBE", "FROM", "BASE", "EXISTS", "NOT",
}
_PATH_TOKENS = {"/", "|", "^", "+", "*", "?", "(", ")", "!"}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r} at offset {pos}")
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self, offset: int = 0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query")
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.next()
        if tok.text.upper() != text.upper():
            self._reject_unsupported(tok)
            raise QuerySyntaxError(f"expected {text!r} at offset {tok.pos}, found {tok.text!r}")

    def is_word(self, tok: _Tok | None, word: str) -> bool:
        return tok is not None and tok.kind == "word" and tok.text.upper() == word

    def _reject_unsupported(self, tok: _Tok) -> None:
        if tok.kind == "word" and tok.text.upper() in _UNSUPPORTED_WORDS:
            raise UnsupportedFeatureError(tok.text.upper())
        if tok.text == "{":
            raise UnsupportedFeatureError("{", "nested group pattern")

    def parse(self) -> SelectQuery:
        while self.is_word(self.peek(), "PREFIX"):
            self.next()
            name = self.next()
            if name.kind != "pname" or not name.text.endswith(":"):
                raise QuerySyntaxError(f"bad prefix declaration at offset {name.pos}")
            target = self.next()
            if target.kind != "iri":
                raise QuerySyntaxError(f"prefix {name.text} needs an <iri>")
            self.prefixes[name.text[:-1]] = target.text[1:-1]
        tok = self.peek()
        if tok is not None:
            self._reject_unsupported(tok)
        self.expect("SELECT")
        projection: list[str] | None = []
        tok = self.peek()
        if tok is not None and tok.text == "*":
            self.next()
            projection = None
        else:
            while (tok := self.peek()) is not None and tok.kind == "var":
                projection.append(self.next().text[1:])
            if not projection:
                tok = self.peek()
                if tok is not None:
                    self._reject_unsupported(tok)
                    if tok.text == "(":
                        raise UnsupportedFeatureError("(", "projection expression")
                raise QuerySyntaxError("SELECT needs variables or *")
        tok = self.peek()
        if tok is not None and tok.kind == "word" and tok.text.upper() != "WHERE":
            self._reject_unsupported(tok)
        if self.is_word(self.peek(), "WHERE"):
            self.next()
        self.expect("{")
        bgp = self.parse_group()
        self.expect("}")
        tok = self.peek()
        if tok is not None:
            self._reject_unsupported(tok)
            raise QuerySyntaxError(f"trailing input at offset {tok.pos}: {tok.text!r}")
        query = SelectQuery(projection, bgp, dict(self.prefixes))
        known = set(query.variables())
        for name in query.projected():
            if name not in known:
                raise QuerySyntaxError(f"projected variable ?{name} does not occur in the pattern")
        return query

    def parse_group(self) -> list[TriplePattern]:
        patterns: list[TriplePattern] = []
        while True:
            tok = self.peek()
            if tok is None or tok.text == "}":
                break
            self._reject_unsupported(tok)
            subject = self.term("subject")
            self.predicate_object_list(subject, patterns)
            tok = self.peek()
            if tok is not None and tok.text == ".":
                self.next()
                continue
            if tok is not None and tok.text != "}":
                self._reject_unsupported(tok)
                raise QuerySyntaxError(f"expected '.' or '}}' at offset {tok.pos}, found {tok.text!r}")
        if not patterns:
            raise QuerySyntaxError("empty graph pattern")
        return patterns

    def predicate_object_list(self, subject: Term, out: list[TriplePattern]) -> None:
        while True:
            predicate = self.predicate()
            while True:
                obj = self.term("object")
                out.append(TriplePattern(subject, predicate, obj))
                tok = self.peek()
                if tok is not None and tok.text == ",":
                    self.next()
                    continue
                break
            tok = self.peek()
            if tok is not None and tok.text == ";":
                self.next()
                nxt = self.peek()
                if nxt is not None and nxt.text in (".", "}"):
                    return
                continue
            return

    def predicate(self) -> Term:
        tok = self.peek()
        if tok is not None and tok.kind == "punct" and tok.text in _PATH_TOKENS:
            raise UnsupportedFeatureError(tok.text, "property path")
        if tok is not None and tok.kind == "word" and tok.text == "a":
            self.next()
            term = iri(RDF_TYPE)
        else:
            term = self.term("predicate")
        if term.is_literal:
            raise QuerySyntaxError("a literal cannot be a predicate")
        nxt = self.peek()
        if nxt is not None and nxt.kind == "punct" and nxt.text in _PATH_TOKENS:
            raise UnsupportedFeatureError(nxt.text, "property path")
        return term

    def term(self, position: str) -> Term:
        tok = self.next()
        self._reject_unsupported(tok)
        try:
            if tok.kind == "iri":
                return iri(tok.text[1:-1])
            if tok.kind == "var":
                return var(tok.text[1:])
            if tok.kind == "pname":
                return iri(self.expand(tok.text))
            if tok.kind == "string":
                if position != "object":
                    raise QuerySyntaxError(f"literal in {position} position at offset {tok.pos}")
                return self.literal_rest(unescape(tok.text[1:-1]))
            if tok.kind == "number":
                if position != "object":
                    raise QuerySyntaxError(f"literal in {position} position at offset {tok.pos}")
                dt = XSD + ("decimal" if "." in tok.text else "integer")
                return literal(tok.text, dt)
        except RDFError as exc:
            raise QuerySyntaxError(str(exc)) from None
        if tok.kind == "punct" and tok.text in _PATH_TOKENS | {"["}:
            raise UnsupportedFeatureError(tok.text)
        raise QuerySyntaxError(f"expected a term at offset {tok.pos}, found {tok.text!r}")

    def literal_rest(self, lexical: str) -> Term:
        tok = self.peek()
        if tok is not None and tok.kind == "lang":
            self.next()
            return literal(lexical, lang=tok.text[1:])
        if tok is not None and tok.kind == "dtype":
            self.next()
            dt = self.next()
            if dt.kind == "iri":
                return literal(lexical, dt.text[1:-1])
            if dt.kind == "pname":
                return literal(lexical, self.expand(dt.text))
            raise QuerySyntaxError(f"expected datatype IRI at offset {dt.pos}")
        return literal(lexical)

    def expand(self, pname: str) -> str:
        prefix, _, local = pname.partition(":")
        if prefix not in self.prefixes:
            raise PrefixResolutionError(f"unknown prefix: {prefix}:")
        return self.prefixes[prefix] + local


def parse_select(text: str) -> SelectQuery:
    return _Parser(text).parse()


def format_select(query: SelectQuery) -> str:
    head = "*" if query.projection is None else " ".join("?" + v for v in query.projection)
    body = "\n".join("  " + tp.n3() for tp in query.bgp)
    return f"SELECT {head} WHERE {{\n{body}\n}}\n"


# --------------------------------------------------------------------------
# Star decomposition

def decompose_stars(bgp: Iterable[TriplePattern]) -> StarDecomposition:
    """Group patterns by syntactic subject and link stars through object variables."""
    groups: dict[Term, list[TriplePattern]] = {}
    for tp in bgp:
        groups.setdefault(tp.subject, []).append(tp)
    if not groups:
        raise QueryError("cannot decompose an empty pattern")
    stars = [StarPattern(subject, tuple(tps), i) for i, (subject, tps) in enumerate(groups.items())]
    by_subject = {star.subject: star.id for star in stars if star.subject.is_variable}
    deps: list[Dependency] = []
    for star in stars:
        for tp in star.patterns:
            if tp.object.is_variable and tp.object in by_subject:
                dep = Dependency(star.id, tp.predicate, by_subject[tp.object])
                if dep not in deps:
                    deps.append(dep)
    return StarDecomposition(stars, deps)


# --------------------------------------------------------------------------
# Evaluation

def _solution_key(mu: Solution) -> tuple:
    return tuple((name, mu[name].n3()) for name in sorted(mu))


def sort_solutions(solutions: Iterable[Solution]) -> list[Solution]:
    return sorted(solutions, key=_solution_key)


def _substitute(term: Term, mu: Solution) -> Term | None:
    if term.is_variable:
        return mu.get(term.value)
    return term


def _extend(tp: TriplePattern, triple, mu: Solution) -> Solution | None:
    out = dict(mu)
    for pattern_term, value in zip(tp, triple):
        if pattern_term.is_variable:
            bound = out.get(pattern_term.value)
            if bound is None:
                out[pattern_term.value] = value
            elif bound != value:
                return None
        elif pattern_term != value:
            return None
    return out


def evaluate_bgp(store: SourcedStore, bgp: list[TriplePattern]) -> list[Solution]:
    """All solution mappings of ``bgp`` over the store's triples.

    Left-deep nested loops in pattern order, propagating bindings into each
    lookup. Triples stored under several sources count once.
    """
    solutions: list[Solution] = [{}]
    for tp in bgp:
        extended = []
        for mu in solutions:
            s, p, o = (_substitute(t, mu) for t in tp)
            seen = set()
            for triple, _ in match_pattern(store, s, p, o):
                if triple in seen:
                    continue
                seen.add(triple)
                nu = _extend(tp, triple, mu)
                if nu is not None:
                    extended.append(nu)
        solutions = extended
        if not solutions:
            break
    return sort_solutions(solutions)


def project(solutions: Iterable[Solution], variables: list[str]) -> list[Solution]:
    """Restrict every mapping to ``variables``; duplicates are kept."""
    return sort_solutions({v: mu[v] for v in variables if v in mu} for mu in solutions)


def evaluate(store: SourcedStore, query: SelectQuery) -> list[Solution]:
    return project(evaluate_bgp(store, query.bgp), query.projected())


def solution_line(mu: Solution, variables: list[str] | None = None) -> str:
    names = sorted(mu) if variables is None else variables
    return "\t".join(f"?{v}={mu[v].n3()}" for v in names if v in mu)
