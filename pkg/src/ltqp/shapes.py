"""Shapes, the shape index document, and shallow document validation.

Shape syntax (one block per shape, ``#`` starts a comment)::

    <http://ex.org/sh/Post> {
      <http://ex.org/v#content> LITERAL ;
      <http://ex.org/v#creator> @<http://ex.org/sh/Person> ;
      <http://ex.org/v#tag> . *
    } CLOSED

Object kinds are ``IRI``, ``LITERAL``, ``.`` (anything) or ``@<shape>``.
Cardinality is ``?`` (0..1), ``*`` (0..n), ``+`` (1..n), default exactly one.
"""
from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field

import jsonschema

from .query import StarPattern, TriplePattern
from .rdf import RDFError, Term, Triple, iri, var

KIND_IRI = "iri"
KIND_LITERAL = "literal"
KIND_ANY = "any"
KIND_SHAPE_REF = "shapeRef"

UNBOUNDED = None


class ShapeError(ValueError):
    pass


class ShapeSyntaxError(ShapeError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DuplicatePredicateError(ShapeError):
    def __init__(self, shape_iri: str, predicate: str):
        super().__init__(f"shape <{shape_iri}> constrains <{predicate}> more than once")
        self.shape_iri = shape_iri
        self.predicate = predicate


class DegenerateShapeError(ShapeError):
    pass


class ShapeIndexError(ShapeError):
    pass


class DomainViolationError(ShapeIndexError):
    pass


class ExclusivityError(ShapeIndexError):
    pass


def _check_iri(value: str) -> str:
    try:
        iri(value)
    except RDFError as exc:
        raise ShapeError(str(exc)) from None
    return value


@dataclass(frozen=True)
class PredicateConstraint:
    predicate: str
    kind: str = KIND_ANY
    shape_ref: str | None = None
    min_count: int = 1
    max_count: int | None = 1

    def __post_init__(self):
        _check_iri(self.predicate)
        if self.kind not in (KIND_IRI, KIND_LITERAL, KIND_ANY, KIND_SHAPE_REF):
            raise ShapeError(f"unknown object kind {self.kind!r}")
        if (self.kind == KIND_SHAPE_REF) != (self.shape_ref is not None):
            raise ShapeError("shape_ref is required exactly for shapeRef constraints")
        if self.shape_ref is not None:
            _check_iri(self.shape_ref)
        if self.min_count not in (0, 1) or self.max_count not in (1, UNBOUNDED):
            raise ShapeError(f"unsupported cardinality {self.min_count}..{self.max_count}")

    @property
    def cardinality(self) -> str:
        return {(1, 1): "", (0, 1): "?", (0, None): "*", (1, None): "+"}[
            (self.min_count, self.max_count)]

    def accepts(self, obj: Term) -> bool:
        if self.kind == KIND_ANY:
            return True
        if self.kind == KIND_LITERAL:
            return obj.is_literal
        return obj.is_iri  # IRI and shapeRef; shapeRef targets are not followed


@dataclass(frozen=True)
class Shape:
    iri: str
    constraints: tuple[PredicateConstraint, ...] = ()
    closed: bool = False

    def __post_init__(self):
        _check_iri(self.iri)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        seen = set()
        for c in self.constraints:
            if c.predicate in seen:
                raise DuplicatePredicateError(self.iri, c.predicate)
            seen.add(c.predicate)

    def constraint(self, predicate: str) -> PredicateConstraint | None:
        for c in self.constraints:
            if c.predicate == predicate:
                return c
        return None

    def predicates(self) -> set[str]:
        return {c.predicate for c in self.constraints}


# --------------------------------------------------------------------------
# Shape DSL

_SHAPE_TOKEN = re.compile(r"""
    (?P<nl>\n)
  | (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<ref>@<[^<>"{}|^`\\\x00-\x20]*>)
  | (?P<word>[A-Za-z]+)
  | (?P<count>\{\s*\d+\s*(?:,\s*\d*\s*)?\})
  | (?P<punct>[{};.?*+])
""", re.VERBOSE)

_CARDINALITIES = {"": (1, 1), "?": (0, 1), "*": (0, None), "+": (1, None)}


def _shape_tokens(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos, line = 0, 1
    while pos < len(text):
        m = _SHAPE_TOKEN.match(text, pos)
        if m is None:
            raise ShapeSyntaxError(line, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
        elif kind != "ws":
            out.append((kind, m.group(), line))
        pos = m.end()
    return out


def parse_shapes(text: str) -> list[Shape]:
    toks = _shape_tokens(text)
    i = 0
    shapes: list[Shape] = []

    def peek():
        return toks[i] if i < len(toks) else None

    def take(expected_kind=None, expected_text=None):
        nonlocal i
        tok = peek()
        if tok is None:
            last = toks[-1][2] if toks else 1
            raise ShapeSyntaxError(last, "unexpected end of input")
        if (expected_kind and tok[0] != expected_kind) or (expected_text and tok[1] != expected_text):
            want = expected_text or expected_kind
            raise ShapeSyntaxError(tok[2], f"expected {want}, found {tok[1]!r}")
        i += 1
        return tok

    while peek() is not None:
        _, head, _ = take("iri")
        shape_iri = head[1:-1]
        take("punct", "{")
        constraints: list[PredicateConstraint] = []
        seen: set[str] = set()
        while True:
            tok = peek()
            if tok is not None and tok[1] == "}":
                break
            _, pred_text, pred_line = take("iri")
            predicate = pred_text[1:-1]
            kind_tok = take()
            shape_ref = None
            if kind_tok[1] == "IRI":
                kind = KIND_IRI
            elif kind_tok[1] == "LITERAL":
                kind = KIND_LITERAL
            elif kind_tok[1] == ".":
                kind = KIND_ANY
            elif kind_tok[0] == "ref":
                kind, shape_ref = KIND_SHAPE_REF, kind_tok[1][2:-1]
            else:
                raise ShapeSyntaxError(kind_tok[2], f"expected IRI, LITERAL, . or @<shape>, found {kind_tok[1]!r}")
            card = ""
            tok = peek()
            if tok is not None and tok[1] in "?*+" and tok[0] == "punct":
                card = take()[1]
                tok = peek()
            if tok is None or tok[1] not in (";", "}"):
                line = tok[2] if tok else kind_tok[2]
                found = tok[1] if tok else "end of input"
                raise ShapeSyntaxError(line, f"malformed cardinality {found!r} for <{predicate}>")
            if predicate in seen:
                raise DuplicatePredicateError(shape_iri, predicate)
            seen.add(predicate)
            lo, hi = _CARDINALITIES[card]
            try:
                constraints.append(PredicateConstraint(predicate, kind, shape_ref, lo, hi))
            except ShapeError as exc:
                raise ShapeSyntaxError(pred_line, str(exc)) from None
            if tok[1] == ";":
                take()
        take("punct", "}")
        closed = False
        tok = peek()
        if tok is not None and tok[0] == "word":
            if tok[1] != "CLOSED":
                raise ShapeSyntaxError(tok[2], f"unexpected {tok[1]!r} after shape block")
            take()
            closed = True
        shapes.append(Shape(shape_iri, tuple(constraints), closed))
    return shapes


def format_shape(shape: Shape) -> str:
    lines = [f"<{shape.iri}> {{"]
    for n, c in enumerate(shape.constraints):
        obj = {KIND_IRI: "IRI", KIND_LITERAL: "LITERAL", KIND_ANY: "."}.get(c.kind) \
            or f"@<{c.shape_ref}>"
        card = f" {c.cardinality}" if c.cardinality else ""
        sep = " ;" if n < len(shape.constraints) - 1 else ""
        lines.append(f"  <{c.predicate}> {obj}{card}{sep}")
    lines.append("} CLOSED" if shape.closed else "}")
    return "\n".join(lines) + "\n"


def format_shapes(shapes: list[Shape]) -> str:
    return "\n".join(format_shape(s) for s in shapes)


def local_name(value: str) -> str:
    tail = re.split(r"[/#]", value.rstrip("/#"))[-1]
    return re.sub(r"\W", "_", tail) or "shape"


def shape_to_query(shape: Shape) -> StarPattern:
    """Translate a shape into a star pattern, one pattern per constraint.

    The originating constraint rides along as the pattern annotation so the
    object kind and any shape reference stay available to containment.
    """
    if not shape.constraints:
        raise DegenerateShapeError(f"shape <{shape.iri}> has no constraints")
    name = local_name(shape.iri)
    subject = var(f"s_{name}")
    patterns = tuple(
        TriplePattern(subject, iri(c.predicate), var(f"o_{name}_{n}"), annotation=c)
        for n, c in enumerate(shape.constraints)
    )
    return StarPattern(subject, patterns, 0)


# --------------------------------------------------------------------------
# Shape index

SHAPE_INDEX_SCHEMA = {
    "type": "object",
    "required": ["domain", "complete", "entries"],
    "additionalProperties": False,
    "properties": {
        "domain": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "complete": {"type": "boolean"},
        "entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["shape"],
                "additionalProperties": False,
                "properties": {
                    "shape": {"type": "string"},
                    "resources": {"type": "array", "items": {"type": "string"}},
                    "prefixes": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
    },
}


@dataclass(frozen=True)
class ShapeIndexEntry:
    shape: str
    resources: tuple[str, ...] = ()
    prefixes: tuple[str, ...] = ()

    def claims(self, document: str) -> bool:
        return document in self.resources or any(document.startswith(p) for p in self.prefixes)


@dataclass(frozen=True)
class ShapeIndex:
    domain: tuple[str, ...]
    complete: bool
    entries: tuple[ShapeIndexEntry, ...] = ()
    iri: str | None = field(default=None, compare=False)

    def in_domain(self, document: str) -> bool:
        return any(document.startswith(d) for d in self.domain)

    def claimant(self, document: str) -> ShapeIndexEntry | None:
        for entry in self.entries:
            if entry.claims(document):
                return entry
        return None

    def shape_iris(self) -> list[str]:
        return list(dict.fromkeys(e.shape for e in self.entries))

    def resources_of(self, shape_iris) -> list[str]:
        wanted = set(shape_iris)
        out: list[str] = []
        for entry in self.entries:
            if entry.shape in wanted:
                out.extend(entry.resources)
        return out

    def to_json(self) -> str:
        doc = {
            "domain": list(self.domain),
            "complete": self.complete,
            "entries": [
                {"shape": e.shape, "resources": list(e.resources), "prefixes": list(e.prefixes)}
                for e in self.entries
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_shape_index(json_text: str, index_iri: str | None = None) -> ShapeIndex:
    where = f" at <{index_iri}>" if index_iri else ""
    try:
        doc = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise ShapeIndexError(f"shape index{where} is not JSON: {exc}") from None
    try:
        jsonschema.validate(doc, SHAPE_INDEX_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ShapeIndexError(f"shape index{where} violates schema at {path}: {exc.message}") from None
    domain = tuple(doc["domain"])
    entries = []
    for raw in doc["entries"]:
        entry = ShapeIndexEntry(raw["shape"], tuple(raw.get("resources", ())),
                                tuple(raw.get("prefixes", ())))
        if not entry.resources and not entry.prefixes:
            raise ShapeIndexError(f"entry for <{entry.shape}>{where} maps no resources")
        entries.append(entry)
    index = ShapeIndex(domain, doc["complete"], tuple(entries), index_iri)
    check_shape_index(index)
    return index


def check_shape_index(index: ShapeIndex) -> None:
    """Raise if any IRI is malformed, outside the domain, or claimed twice."""
    try:
        for value in index.domain:
            _check_iri(value)
        for entry in index.entries:
            for value in (entry.shape, *entry.resources, *entry.prefixes):
                _check_iri(value)
    except ShapeError as exc:
        raise ShapeIndexError(str(exc)) from None
    for entry in index.entries:
        for value in (*entry.resources, *entry.prefixes):
            if not index.in_domain(value):
                raise DomainViolationError(f"<{value}> lies outside the index domain {list(index.domain)}")
    for a, first in enumerate(index.entries):
        for second in index.entries[a + 1:]:
            for doc in first.resources:
                if second.claims(doc):
                    raise ExclusivityError(f"<{doc}> is claimed by <{first.shape}> and <{second.shape}>")
            for doc in second.resources:
                if first.claims(doc):
                    raise ExclusivityError(f"<{doc}> is claimed by <{first.shape}> and <{second.shape}>")
            for p in first.prefixes:
                for q in second.prefixes:
                    if p.startswith(q) or q.startswith(p):
                        raise ExclusivityError(
                            f"prefixes <{p}> and <{q}> overlap across <{first.shape}> and <{second.shape}>")


# --------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Violation:
    subject: str
    predicate: str
    reason: str

    def __str__(self) -> str:
        return f"<{self.subject}> <{self.predicate}>: {self.reason}"


@dataclass
class ValidationReport:
    conformant: bool
    violations: list[Violation]


MISSING = "missing predicate"
TOO_MANY = "too many values"
WRONG_KIND = "object kind mismatch"
CLOSED_EXTRA = "closed-shape extra predicate"


def validate_document(doc: list[Triple], shape: Shape) -> ValidationReport:
    """Check every subject that uses a constrained predicate against ``shape``.

    Shape references are checked shallowly: the object must be an IRI.
    """
    by_subject: dict[Term, dict[str, list[Term]]] = defaultdict(lambda: defaultdict(list))
    for t in doc:
        by_subject[t.subject][t.predicate.value].append(t.object)
    constrained = shape.predicates()
    violations = []
    for subject in sorted(by_subject):
        props = by_subject[subject]
        if not constrained & props.keys():
            continue
        for c in shape.constraints:
            values = props.get(c.predicate, [])
            if c.min_count == 1 and not values:
                violations.append(Violation(subject.value, c.predicate, MISSING))
            if c.max_count == 1 and len(values) > 1:
                violations.append(Violation(subject.value, c.predicate, TOO_MANY))
            if any(not c.accepts(v) for v in values):
                violations.append(Violation(subject.value, c.predicate, WRONG_KIND))
        if shape.closed:
            for predicate in sorted(props.keys() - constrained):
                violations.append(Violation(subject.value, predicate, CLOSED_EXTRA))
    return ValidationReport(not violations, violations)
