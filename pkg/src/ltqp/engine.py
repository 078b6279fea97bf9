"""Link traversal over a DocumentNetwork with pluggable reachability criteria.

In shape-index mode, the first IRI seen under a pod root triggers a fetch of
the pod's shape index and of the shapes it references. Containment is then
solved once for the pod, the indexed resources of the allowed shapes are
queued, and every later link into the pod goes through ``admit_link``.
"""
from __future__ import annotations

import enum
import json
import logging
import re
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field

from .containment import (Binding, ContainmentReport, MissingShapeError, Mode, ReachabilityDecision,
                          decide_adaptation, solve_containment)
from .netsim import (RDF_DOC, SHAPE_INDEX_NAME, TYPE_INDEX_NAME, DocumentNetwork, FetchResponse,
                     strip_fragment)
from .query import RDF_TYPE, SelectQuery, Solution, StarDecomposition, decompose_stars, evaluate
from .rdf import SourcedStore, Triple
from .shapes import Shape, ShapeError, ShapeIndex, parse_shape_index, parse_shapes

log = logging.getLogger(__name__)

DEFAULT_POD_TEMPLATE = "/pods/{name}/"


class ReachabilityMode(enum.Enum):
    C_ALL = "c-all"
    TYPE_INDEX = "type-index"
    SHAPE_INDEX = "shape-index"


class ConfigurationError(ValueError):
    pass


class TraversalError(RuntimeError):
    pass


@dataclass
class TraversalMetrics:
    request_count: int = 0
    documents_dereferenced: int = 0
    triples_ingested: int = 0
    simulated_latency_total: int = 0
    result_count: int = 0
    timed_out: bool = False

    def to_dict(self) -> dict:
        return {
            "requestCount": self.request_count,
            "documentsDereferenced": self.documents_dereferenced,
            "triplesIngested": self.triples_ingested,
            "simulatedLatencyTotal": self.simulated_latency_total,
            "resultCount": self.result_count,
            "timedOut": self.timed_out,
        }


class LinkQueue:
    """FIFO of IRIs; each IRI is enqueued at most once per traversal."""

    def __init__(self):
        self.pending: deque[str] = deque()
        self._seen: set[str] = set()
        self.visited: list[str] = []

    def push(self, target: str) -> bool:
        if target in self._seen:
            return False
        self._seen.add(target)
        self.pending.append(target)
        return True

    def claim(self, target: str) -> bool:
        """Mark ``target`` as fetched out of band (index and shape documents)."""
        if target in self._seen:
            return False
        self._seen.add(target)
        self.visited.append(target)
        return True

    def pop(self) -> str:
        target = self.pending.popleft()
        self.visited.append(target)
        return target

    def seen(self, target: str) -> bool:
        return target in self._seen

    def __bool__(self) -> bool:
        return bool(self.pending)


@dataclass
class PodPolicy:
    """How one pod's links are admitted. ``None`` fields mean no pruning."""
    root: str
    decision: ReachabilityDecision | None = None
    index: ShapeIndex | None = None
    report: ContainmentReport | None = None
    type_classes: dict[str, set[str]] | None = None  # document -> listed classes
    query_classes: set[str] | None = None


@dataclass
class TraversalState:
    store: SourcedStore = field(default_factory=SourcedStore)
    queue: LinkQueue = field(default_factory=LinkQueue)
    policies: dict[str, PodPolicy] = field(default_factory=dict)
    metrics: TraversalMetrics = field(default_factory=TraversalMetrics)
    pruned: set[str] = field(default_factory=set)
    index_documents: set[str] = field(default_factory=set)
    shape_documents: set[str] = field(default_factory=set)

    @property
    def decisions_by_pod(self) -> dict[str, ReachabilityDecision | None]:
        return {root: p.decision for root, p in self.policies.items()}


def extract_links(triples: list[Triple], allowlist: list[str]) -> list[str]:
    """Distinct fragment-free IRIs from any position that fall under the allowlist."""
    out: dict[str, None] = {}
    for t in triples:
        for term in t:
            if term.is_iri:
                target = strip_fragment(term.value)
                if any(target.startswith(prefix) for prefix in allowlist):
                    out.setdefault(target)
    return list(out)


def admit_link(target: str, decision: ReachabilityDecision | None,
               index: ShapeIndex | None) -> bool:
    if decision is None or index is None:
        return True
    if decision.mode is Mode.DISCOVERY_ONLY:
        return True
    if not index.in_domain(target):
        # the index makes no claim outside its domain
        return True
    entry = index.claimant(target)
    if entry is None:
        return not index.complete
    return entry.shape in decision.allowed_shapes


def guard_incomplete(decision: ReachabilityDecision, report: ContainmentReport,
                     index: ShapeIndex) -> ReachabilityDecision:
    """Fall back to discovery when pruning could hide the only copies of some star's data.

    A star that binds no indexed shape can only match unclaimed documents of an
    incomplete index, and those are found solely through links in other
    documents, which pruning may skip.
    """
    if (decision.mode is Mode.PRUNE_UNMATCHED and not index.complete
            and Binding.NONE in report.per_star.values()):
        return ReachabilityDecision(Mode.DISCOVERY_ONLY, frozenset(report.index_shapes))
    return decision


def pod_root_pattern(template: str = DEFAULT_POD_TEMPLATE) -> re.Pattern:
    if "{name}" not in template:
        raise ConfigurationError("pod template needs a {name} placeholder")
    head, _, tail = template.partition("{name}")
    return re.compile("^(.*?" + re.escape(head) + r"[^/#?]+" + re.escape(tail) + ")")


def query_classes_by_star(decomp: StarDecomposition) -> list[set[str]]:
    return [
        {tp.object.value for tp in star.patterns
         if tp.predicate.is_iri and tp.predicate.value == RDF_TYPE and tp.object.is_iri}
        for star in decomp.stars
    ]


class TraversalEngine:
    def __init__(self, net: DocumentNetwork, mode: ReachabilityMode = ReachabilityMode.C_ALL,
                 workers: int = 1, pod_template: str = DEFAULT_POD_TEMPLATE,
                 timeout_ms: int | None = None):
        if workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.net = net
        self.mode = ReachabilityMode(mode)
        self.workers = workers
        self.timeout_ms = timeout_ms
        self._pod_re = pod_root_pattern(pod_template)
        self.state = TraversalState()
        self._decomp: StarDecomposition | None = None
        self._shape_cache: dict[str, dict[str, Shape]] = {}
        self._seeds: set[str] = set()

    def pod_root(self, target: str) -> str | None:
        m = self._pod_re.match(target)
        return m.group(1) if m else None

    # -- admission -------------------------------------------------------

    def offer(self, target: str) -> bool:
        """Queue ``target`` if it is new and the reachability criterion admits it."""
        queue = self.state.queue
        if queue.seen(target):
            return False
        root = self.pod_root(target)
        if self.mode is not ReachabilityMode.C_ALL and root is not None and root not in self.state.policies:
            self._decide(root)
            if queue.seen(target):
                return False
        if not self._admit(target, root):
            self.state.pruned.add(target)
            return False
        return queue.push(target)

    def _admit(self, target: str, root: str | None) -> bool:
        policy = self.state.policies.get(root) if root is not None else None
        if policy is None:
            return True
        if self.mode is ReachabilityMode.SHAPE_INDEX:
            return admit_link(target, policy.decision, policy.index)
        if policy.type_classes is None or policy.query_classes is None:
            return True
        listed = policy.type_classes.get(target)
        if not listed:
            return True
        return bool(listed & policy.query_classes)

    def _decide(self, root: str) -> None:
        policy = PodPolicy(root)
        self.state.policies[root] = policy
        if self.mode is ReachabilityMode.SHAPE_INDEX:
            self._decide_by_shapes(policy)
        else:
            self._decide_by_types(policy)

    def _fetch_aux(self, target: str) -> FetchResponse | None:
        if not self.state.queue.claim(target):
            return None
        resp = self.net.fetch(target)
        self._account(resp)
        return resp

    def _decide_by_shapes(self, policy: PodPolicy) -> None:
        index_iri = policy.root + SHAPE_INDEX_NAME
        self.state.index_documents.add(index_iri)
        resp = self._fetch_aux(index_iri)
        if resp is None or not resp.ok:
            log.info("no shape index at %s; pod traversed without pruning", index_iri)
            return
        try:
            index = parse_shape_index(resp.body, index_iri)
        except ShapeError as exc:
            log.warning("ignoring unusable shape index %s: %s", index_iri, exc)
            return
        shapes: dict[str, Shape] = {}
        for shape_iri in index.shape_iris():
            doc = strip_fragment(shape_iri)
            if doc not in self._shape_cache:
                self.state.shape_documents.add(doc)
                self._shape_cache[doc] = {}
                got = self._fetch_aux(doc)
                if got is not None and got.ok:
                    try:
                        self._shape_cache[doc] = {s.iri: s for s in parse_shapes(got.body)}
                    except ShapeError as exc:
                        log.warning("unparsable shapes at %s: %s", doc, exc)
            shapes.update(self._shape_cache[doc])
        try:
            report = solve_containment(self._decomp, index, shapes)
        except MissingShapeError as exc:
            log.warning("pod %s traversed without pruning: %s", policy.root, exc)
            return
        policy.index = index
        policy.report = report
        policy.decision = guard_incomplete(decide_adaptation(report, index.complete), report, index)
        log.debug("pod %s: %s allowed=%s", policy.root, policy.decision.mode.value,
                  sorted(policy.decision.allowed_shapes))
        for target in index.resources_of(policy.decision.allowed_shapes):
            self.offer(target)

    def _decide_by_types(self, policy: PodPolicy) -> None:
        index_iri = policy.root + TYPE_INDEX_NAME
        self.state.index_documents.add(index_iri)
        resp = self._fetch_aux(index_iri)
        if resp is None or not resp.ok:
            return
        try:
            mapping = json.loads(resp.body)
            listed: dict[str, set[str]] = {}
            for cls, docs in mapping.items():
                for doc in docs:
                    listed.setdefault(doc, set()).add(cls)
        except (ValueError, AttributeError, TypeError) as exc:
            log.warning("ignoring unusable type index %s: %s", index_iri, exc)
            return
        per_star = query_classes_by_star(self._decomp)
        wanted = set().union(*per_star)
        for cls in sorted(wanted):
            for doc in mapping.get(cls, []):
                self.offer(doc)
        # a star without a class, or a class the pod never registered, defeats pruning
        if all(per_star) and wanted <= mapping.keys():
            policy.type_classes = listed
            policy.query_classes = wanted

    # -- fetching --------------------------------------------------------

    def _account(self, resp: FetchResponse) -> None:
        m = self.state.metrics
        m.request_count += 1
        m.simulated_latency_total += resp.latency_ms

    def _ingest(self, resp: FetchResponse) -> None:
        if not resp.ok:
            if resp.iri in self._seeds:
                raise TraversalError(f"seed <{resp.iri}> could not be dereferenced")
            log.info("dereferencing %s failed (%s); link skipped", resp.iri, resp.status)
            return
        if resp.kind != RDF_DOC:
            return
        triples = resp.body
        m = self.state.metrics
        m.documents_dereferenced += 1
        m.triples_ingested += len(triples)
        self.state.store.add_all(triples, resp.iri)
        for target in extract_links(triples, self.net.allowlist):
            self.offer(target)

    def _over_budget(self) -> bool:
        return self.timeout_ms is not None and self.state.metrics.simulated_latency_total > self.timeout_ms

    def execute(self, query: SelectQuery, seeds: list[str]) -> tuple[list[Solution], TraversalMetrics]:
        if not seeds:
            raise ConfigurationError("at least one seed IRI is required")
        for seed in seeds:
            if not any(seed.startswith(prefix) for prefix in self.net.allowlist):
                raise ConfigurationError(f"seed <{seed}> is outside the allowlist {self.net.allowlist}")
        self.state = TraversalState()
        self._decomp = decompose_stars(query.bgp)
        self._seeds = {strip_fragment(s) for s in seeds}
        for seed in seeds:
            self.offer(strip_fragment(seed))

        queue = self.state.queue
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            inflight: dict = {}
            order = 0
            while True:
                while queue and len(inflight) < self.workers and not self._over_budget():
                    target = queue.pop()
                    inflight[pool.submit(self.net.fetch, target)] = order
                    order += 1
                if not inflight:
                    break
                done, _ = wait(inflight, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=inflight.__getitem__):
                    del inflight[fut]
                    resp = fut.result()
                    self._account(resp)
                    self._ingest(resp)
            if queue:
                self.state.metrics.timed_out = True
                log.warning("simulated time budget of %s ms exhausted", self.timeout_ms)

        results = evaluate(self.state.store, query)
        self.state.metrics.result_count = len(results)
        return results, self.state.metrics


def execute(query: SelectQuery, seeds: list[str], mode: ReachabilityMode, net: DocumentNetwork,
            **options) -> tuple[list[Solution], TraversalMetrics]:
    return TraversalEngine(net, mode, **options).execute(query, seeds)
