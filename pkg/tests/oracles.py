"""Independent oracles: brute-force BGP evaluation and an enumerable universe
of shapes, conforming data and star queries for containment soundness."""
from __future__ import annotations

import itertools

from ltqp.query import StarPattern, TriplePattern
from ltqp.rdf import Term, Triple, iri, literal, var
from ltqp.shapes import KIND_ANY, KIND_IRI, KIND_LITERAL, PredicateConstraint, Shape


def brute_force_bgp(triples, bgp):
    """Every assignment of the BGP's variables to store terms whose
    instantiation lies entirely inside ``triples``. Returns canonical rows."""
    triples = set(triples)
    terms = sorted({t for tr in triples for t in tr}, key=Term.n3)
    names = sorted({t.value for tp in bgp for t in tp if t.is_variable})
    rows = []
    for values in itertools.product(terms, repeat=len(names)):
        mu = dict(zip(names, values))
        ok = True
        for tp in bgp:
            inst = [mu[t.value] if t.is_variable else t for t in tp]
            if inst[0].is_literal or inst[1].is_literal:
                ok = False
                break
            if Triple(*inst) not in triples:
                ok = False
                break
        if ok:
            rows.append(tuple((n, mu[n].n3()) for n in names))
    return sorted(rows)


def canonical(solutions):
    return sorted(tuple((n, mu[n].n3()) for n in sorted(mu)) for mu in solutions)


# --------------------------------------------------------------------------
# Small universe

U = "http://u.example/"
PREDICATES = [U + f"p{i}" for i in range(4)]
OBJ_IRI = iri(U + "o")
OBJ_LIT = literal("v")
KINDS = (KIND_IRI, KIND_LITERAL, KIND_ANY)


def enumerate_shapes(max_constraints: int = 3) -> list[Shape]:
    """All shapes over PREDICATES with 1..max constraints and kinds IRI/LITERAL/ANY.

    Constraints are optional and unbounded, so the conforming data below is
    the widest any cardinality choice allows.
    """
    shapes = []
    n = 0
    for k in range(1, max_constraints + 1):
        for preds in itertools.combinations(PREDICATES, k):
            for kinds in itertools.product(KINDS, repeat=k):
                cs = tuple(PredicateConstraint(p, kd, None, 0, None) for p, kd in zip(preds, kinds))
                shapes.append(Shape(f"{U}shape/{n}", cs))
                n += 1
    return shapes


_CHOICES = {
    KIND_IRI: [(), (OBJ_IRI,)],
    KIND_LITERAL: [(), (OBJ_LIT,)],
    KIND_ANY: [(), (OBJ_IRI,), (OBJ_LIT,), (OBJ_IRI, OBJ_LIT)],
}


def conforming_entities(shape: Shape) -> list[list[tuple[str, Term]]]:
    """Every distinct non-empty property set a conforming entity may carry.

    Only the shape's own predicates appear (exclusive placement).
    """
    out = []
    options = [[(c.predicate, objs) for objs in _CHOICES[c.kind]] for c in shape.constraints]
    for combo in itertools.product(*options):
        props = [(p, o) for p, objs in combo for o in objs]
        if props:
            out.append(props)
    return out


def universe_documents(shape: Shape, slot: int) -> dict[str, list[Triple]]:
    """One document per entity, all mapped to ``shape`` in the index."""
    docs = {}
    for n, props in enumerate(conforming_entities(shape)):
        doc = f"{U}s{slot}/d{n}"
        ent = iri(doc + "#e")
        docs[doc] = [Triple(ent, iri(p), o) for p, o in props]
    return docs


def enumerate_stars(max_patterns: int = 3) -> list[StarPattern]:
    """Stars on ?s with constant or variable predicates and variable, IRI or
    literal objects; variables other than ?s are fresh per pattern."""
    kinds = [(p, o) for p in PREDICATES + [None] for o in ("var", "iri", "lit")]
    stars = []
    for k in range(1, max_patterns + 1):
        for combo in itertools.combinations_with_replacement(kinds, k):
            pats = []
            for n, (p, o) in enumerate(combo):
                pred = iri(p) if p else var(f"p{n}")
                obj = {"var": var(f"o{n}"), "iri": OBJ_IRI, "lit": OBJ_LIT}[o]
                pats.append(TriplePattern(var("s"), pred, obj))
            stars.append(StarPattern(var("s"), tuple(pats), 0))
    return stars


def star_answers(star: StarPattern, props: list[tuple[str, Term]]) -> set:
    """Answers of ``star`` on one entity: every way to pick, per pattern, one of
    the entity's properties consistently. Returned without the subject binding."""
    out = set()
    per_pattern = []
    for tp in star.patterns:
        cands = []
        for p, o in props:
            if tp.predicate.is_iri and tp.predicate.value != p:
                continue
            if not tp.object.is_variable and tp.object != o:
                continue
            cands.append((tp, p, o))
        if not cands:
            return out
        per_pattern.append(cands)
    for pick in itertools.product(*per_pattern):
        mu = {}
        ok = True
        for tp, p, o in pick:
            for term, value in ((tp.predicate, p), (tp.object, o.n3())):
                if term.is_variable:
                    if mu.setdefault(term.value, value) != value:
                        ok = False
        if ok:
            out.add(tuple(sorted(mu.items())))
    return out
