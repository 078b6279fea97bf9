"""Query-shape containment and the reachability adaptation it drives.

Containment is decided on predicate sets and object kinds. Shapes translate
to star queries with pairwise distinct predicates, and for such stars this
check agrees with homomorphism-based conjunctive-query containment.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .query import StarDecomposition, StarPattern
from .rdf import Term
from .shapes import KIND_IRI, KIND_LITERAL, KIND_SHAPE_REF, PredicateConstraint, Shape, ShapeIndex


class Binding(enum.IntEnum):
    # ordered so that max() picks the best outcome
    NONE = 0
    PARTIAL = 1
    FULL = 2


class Mode(enum.Enum):
    PRUNE_UNMATCHED = "prune-unmatched"
    VISIT_PARTIAL = "visit-partial"
    DISCOVERY_ONLY = "discovery-only"


class MissingShapeError(KeyError):
    pass


@dataclass(frozen=True)
class BindingOutcome:
    binding: Binding
    matched_predicates: frozenset[str] = frozenset()


@dataclass
class ContainmentReport:
    per_pair: dict[tuple[int, str], BindingOutcome]
    per_star: dict[int, Binding]
    matched_shapes: set[str]
    partial_shapes: set[str]
    index_shapes: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ReachabilityDecision:
    mode: Mode
    allowed_shapes: frozenset[str]


def kind_compatible(obj: Term, constraint: PredicateConstraint) -> bool:
    if obj.is_variable:
        return True
    if obj.is_iri:
        return constraint.kind != KIND_LITERAL
    return constraint.kind not in (KIND_IRI, KIND_SHAPE_REF)


def bind_star_to_shape(star: StarPattern, shape: Shape) -> BindingOutcome:
    constant = star.constant_predicates()
    matched = set()
    for predicate in constant:
        c = shape.constraint(predicate)
        if c is None:
            continue
        # the same predicate may occur in several patterns; all must fit
        if all(kind_compatible(tp.object, c) for tp in star.patterns if tp.predicate.value == predicate):
            matched.add(predicate)
    frozen = frozenset(matched)
    if star.has_variable_predicate():
        return BindingOutcome(Binding.PARTIAL, frozen)
    if constant and matched == constant:
        return BindingOutcome(Binding.FULL, frozen)
    if not matched:
        return BindingOutcome(Binding.NONE, frozen)
    return BindingOutcome(Binding.PARTIAL, frozen)


def solve_containment(decomp: StarDecomposition, index: ShapeIndex,
                      shapes: dict[str, Shape]) -> ContainmentReport:
    shape_iris = index.shape_iris()
    for s in shape_iris:
        if s not in shapes:
            raise MissingShapeError(f"shape <{s}> referenced by the index is not available")
    per_pair = {
        (star.id, s): bind_star_to_shape(star, shapes[s])
        for star in decomp.stars for s in shape_iris
    }
    base = dict(per_pair)

    # One refinement pass over the unrefined outcomes: data reached from star A
    # through predicate p must conform to the shape A's FULL shapes reference at p.
    for dep in decomp.dependencies:
        if not dep.predicate.is_iri:
            continue
        full = [s for s in shape_iris if base[(dep.source, s)].binding is Binding.FULL]
        if not full:
            continue
        targets = set()
        for s in full:
            c = shapes[s].constraint(dep.predicate.value)
            if c is None or c.kind != KIND_SHAPE_REF:
                targets = None
                break
            targets.add(c.shape_ref)
        if targets is None:
            continue
        for s in shape_iris:
            outcome = per_pair[(dep.target, s)]
            if s not in targets and outcome.binding is Binding.FULL:
                per_pair[(dep.target, s)] = BindingOutcome(Binding.PARTIAL, outcome.matched_predicates)

    per_star = {
        star.id: max((per_pair[(star.id, s)].binding for s in shape_iris), default=Binding.NONE)
        for star in decomp.stars
    }
    matched = {s for (_, s), o in per_pair.items() if o.binding is Binding.FULL}
    partial = {s for (_, s), o in per_pair.items() if o.binding is Binding.PARTIAL} - matched
    return ContainmentReport(per_pair, per_star, matched, partial, shape_iris)


def decide_adaptation(report: ContainmentReport, complete: bool) -> ReachabilityDecision:
    classes = set(report.per_star.values())
    if classes <= {Binding.FULL, Binding.NONE}:
        return ReachabilityDecision(Mode.PRUNE_UNMATCHED, frozenset(report.matched_shapes))
    if complete:
        return ReachabilityDecision(Mode.VISIT_PARTIAL,
                                    frozenset(report.matched_shapes | report.partial_shapes))
    return ReachabilityDecision(Mode.DISCOVERY_ONLY, frozenset(report.index_shapes))
