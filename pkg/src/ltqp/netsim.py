"""A deterministic, in-process network of linked-data pods.

Each pod holds a profile document, family documents (posts, comments, ...),
a shape index at ``<pod>/shape-index.json`` and a type index at
``<pod>/type-index.json``. Shapes are served as ``.shex`` documents outside
the pods. Every fetch is logged with a flat simulated latency.
"""
from __future__ import annotations

import json
import logging
import os
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urldefrag, urlsplit

from .query import RDF_TYPE
from .rdf import Triple, iri, literal, parse_ntriples, serialize_ntriples
from .shapes import (KIND_ANY, KIND_IRI, KIND_LITERAL, KIND_SHAPE_REF, PredicateConstraint, Shape,
                     ShapeIndex, ShapeIndexEntry, format_shapes, parse_shape_index, parse_shapes,
                     validate_document)

log = logging.getLogger(__name__)

DEFAULT_BASE = "https://solid.example/"
VOCAB = "https://vocab.example/sn#"
SHAPE_INDEX_NAME = "shape-index.json"
TYPE_INDEX_NAME = "type-index.json"
PROFILE = "profile"


class ParamsError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


class FixtureIntegrityError(RuntimeError):
    pass


def strip_fragment(value: str) -> str:
    return urldefrag(value)[0]


@dataclass(frozen=True)
class Family:
    name: str
    shape: str
    path_prefix: str

    @property
    def class_iri(self) -> str:
        return VOCAB + ("Person" if self.name == PROFILE else self.name[:1].upper() + self.name[1:])


def default_families(base: str = DEFAULT_BASE) -> list[Family]:
    return [
        Family(PROFILE, f"{base}shapes/profile.shex#Person", "profile/"),
        Family("post", f"{base}shapes/post.shex#Post", "posts/"),
        Family("comment", f"{base}shapes/comment.shex#Comment", "comments/"),
        Family("settings", f"{base}shapes/settings.shex#Settings", "settings/"),
    ]


@dataclass
class NetworkParams:
    pod_count: int = 10
    documents_per_pod: dict[str, int] = field(
        default_factory=lambda: {PROFILE: 1, "post": 20, "comment": 10, "settings": 4})
    families: list[Family] = field(default_factory=default_families)
    inter_pod_link_density: float = 0.3
    latency_ms_per_request: int = 20
    incomplete_index_fraction: float = 0.0
    seed: int = 0
    base_iri: str = DEFAULT_BASE

    def validate(self) -> None:
        if self.pod_count < 0:
            raise ParamsError("podCount must be >= 0")
        if self.latency_ms_per_request < 0:
            raise ParamsError("latencyMsPerRequest must be >= 0")
        for name in ("inter_pod_link_density", "incomplete_index_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ParamsError(f"{name} must lie in [0, 1], got {value}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParamsError("seed must be a 64-bit unsigned integer")
        names = [f.name for f in self.families]
        if len(set(names)) != len(names):
            raise ParamsError("family names must be unique")
        shapes = [f.shape for f in self.families]
        if len(set(shapes)) != len(shapes):
            raise ParamsError("each family needs its own shape IRI")
        for name, count in self.documents_per_pod.items():
            if name not in names:
                raise ParamsError(f"documentsPerPod names unknown family {name!r}")
            if not isinstance(count, int) or count < 0:
                raise ParamsError(f"document count for {name!r} must be a non-negative integer")
        if self.documents_per_pod.get(PROFILE, 1) != 1:
            raise ParamsError("every pod has exactly one profile document")
        if not self.base_iri.endswith("/"):
            raise ParamsError("baseIri must end with '/'")

    def count(self, family: str) -> int:
        if family == PROFILE:
            return 1
        return self.documents_per_pod.get(family, 0)

    @classmethod
    def from_dict(cls, raw: dict) -> NetworkParams:
        known = {"podCount", "documentsPerPod", "families", "interPodLinkDensity",
                 "latencyMsPerRequest", "incompleteIndexFraction", "seed", "baseIri"}
        unknown = set(raw) - known
        if unknown:
            raise ParamsError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        base = raw.get("baseIri", DEFAULT_BASE)
        try:
            families = [Family(f["name"], f["shape"], f["pathPrefix"]) for f in raw["families"]] \
                if "families" in raw else default_families(base)
            params = cls(
                pod_count=int(raw.get("podCount", 10)),
                documents_per_pod=dict(raw.get("documentsPerPod", cls().documents_per_pod)),
                families=families,
                inter_pod_link_density=float(raw.get("interPodLinkDensity", 0.3)),
                latency_ms_per_request=int(raw.get("latencyMsPerRequest", 20)),
                incomplete_index_fraction=float(raw.get("incompleteIndexFraction", 0.0)),
                seed=int(raw.get("seed", 0)),
                base_iri=base,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParamsError(f"invalid parameters: {exc}") from None
        if PROFILE not in {f.name for f in params.families}:
            params.families.insert(0, default_families(base)[0])
        params.validate()
        return params

    def to_dict(self) -> dict:
        return {
            "podCount": self.pod_count,
            "documentsPerPod": dict(self.documents_per_pod),
            "families": [{"name": f.name, "shape": f.shape, "pathPrefix": f.path_prefix}
                         for f in self.families],
            "interPodLinkDensity": self.inter_pod_link_density,
            "latencyMsPerRequest": self.latency_ms_per_request,
            "incompleteIndexFraction": self.incomplete_index_fraction,
            "seed": self.seed,
            "baseIri": self.base_iri,
        }


# --------------------------------------------------------------------------
# Request log and fetch

OK = "ok"
NOT_FOUND = "notFound"

RDF_DOC = "rdf"
SHAPE_INDEX_DOC = "shape-index"
TYPE_INDEX_DOC = "type-index"
SHAPES_DOC = "shapes"


@dataclass(frozen=True)
class RequestLogEntry:
    iri: str
    outcome: str
    latency_ms: int


class RequestLog:
    def __init__(self):
        self._lock = threading.Lock()
        self._entries: list[RequestLogEntry] = []

    def append(self, entry: RequestLogEntry) -> None:
        with self._lock:
            self._entries.append(entry)

    @property
    def entries(self) -> list[RequestLogEntry]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def total_latency(self) -> int:
        return sum(e.latency_ms for e in self.entries)

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


@dataclass(frozen=True)
class FetchResponse:
    iri: str
    status: str
    kind: str | None = None
    body: object = None
    latency_ms: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OK


@dataclass
class DocumentNetwork:
    documents: dict[str, list[Triple]] = field(default_factory=dict)
    shape_indexes: dict[str, ShapeIndex] = field(default_factory=dict)
    type_indexes: dict[str, dict[str, list[str]]] = field(default_factory=dict)
    shape_docs: dict[str, str] = field(default_factory=dict)
    allowlist: list[str] = field(default_factory=list)
    latency_ms: int = 0
    seeds: list[str] = field(default_factory=list)
    families: list[Family] = field(default_factory=list)
    request_log: RequestLog = field(default_factory=RequestLog, compare=False, repr=False)

    def resource_iris(self) -> list[str]:
        out = list(self.documents)
        out += [root + SHAPE_INDEX_NAME for root in self.shape_indexes]
        out += [root + TYPE_INDEX_NAME for root in self.type_indexes]
        out += list(self.shape_docs)
        return out

    def lookup(self, target: str) -> tuple[str, object] | None:
        """The resource served at ``target`` without logging a request."""
        target = strip_fragment(target)
        if target in self.documents:
            return RDF_DOC, self.documents[target]
        if target in self.shape_docs:
            return SHAPES_DOC, self.shape_docs[target]
        root, _, name = target.rpartition("/")
        root += "/"
        if name == SHAPE_INDEX_NAME and root in self.shape_indexes:
            return SHAPE_INDEX_DOC, self.shape_indexes[root].to_json()
        if name == TYPE_INDEX_NAME and root in self.type_indexes:
            return TYPE_INDEX_DOC, json.dumps(self.type_indexes[root], indent=2, sort_keys=True) + "\n"
        return None

    def fetch(self, target: str) -> FetchResponse:
        found = self.lookup(target)
        status = OK if found else NOT_FOUND
        self.request_log.append(RequestLogEntry(target, status, self.latency_ms))
        if found is None:
            return FetchResponse(target, NOT_FOUND, latency_ms=self.latency_ms)
        kind, body = found
        return FetchResponse(target, OK, kind, body, self.latency_ms)

    def pod_documents(self, root: str) -> list[str]:
        return [d for d in self.documents if d.startswith(root)]

    def pod_roots(self) -> list[str]:
        return sorted(set(self.shape_indexes) | set(self.type_indexes))

    def all_shapes(self) -> dict[str, Shape]:
        out = {}
        for text in self.shape_docs.values():
            for s in parse_shapes(text):
                out[s.iri] = s
        return out


def fetch(net: DocumentNetwork, target: str) -> FetchResponse:
    return net.fetch(target)


# --------------------------------------------------------------------------
# Generation

def _v(name: str):
    return iri(VOCAB + name)


def family_shape(family: Family, shapes_by_family: dict[str, str]) -> Shape:
    """The built-in shape for a family; unknown family names get a generic one."""
    person = shapes_by_family.get(PROFILE)
    creator = (PredicateConstraint(VOCAB + "hasCreator", KIND_SHAPE_REF, person) if person
               else PredicateConstraint(VOCAB + "hasCreator", KIND_IRI))
    typ = PredicateConstraint(RDF_TYPE, KIND_IRI)
    if family.name == PROFILE:
        knows = PredicateConstraint(VOCAB + "knows", KIND_SHAPE_REF, family.shape, 0, None)
        return Shape(family.shape, (
            typ,
            PredicateConstraint(VOCAB + "name", KIND_LITERAL),
            knows,
            PredicateConstraint(VOCAB + "hasResource", KIND_IRI, None, 0, None),
        ))
    if family.name == "post":
        return Shape(family.shape, (
            typ,
            PredicateConstraint(VOCAB + "content", KIND_LITERAL),
            creator,
            PredicateConstraint(VOCAB + "hasTag", KIND_LITERAL, None, 0, None),
        ), closed=True)
    if family.name == "comment":
        post = shapes_by_family.get("post")
        reply = (PredicateConstraint(VOCAB + "replyOf", KIND_SHAPE_REF, post, 0, 1) if post
                 else PredicateConstraint(VOCAB + "replyOf", KIND_IRI, None, 0, 1))
        return Shape(family.shape, (
            typ,
            PredicateConstraint(VOCAB + "commentText", KIND_LITERAL),
            creator,
            reply,
        ))
    if family.name == "settings":
        owner = (PredicateConstraint(VOCAB + "settingOf", KIND_SHAPE_REF, person) if person
                 else PredicateConstraint(VOCAB + "settingOf", KIND_IRI))
        return Shape(family.shape, (
            typ,
            PredicateConstraint(VOCAB + "settingKey", KIND_LITERAL),
            PredicateConstraint(VOCAB + "settingValue", KIND_ANY),
            owner,
        ), closed=True)
    return Shape(family.shape, (
        typ,
        PredicateConstraint(VOCAB + family.name + "Label", KIND_LITERAL),
        creator,
    ))


_TAGS = ["linked-data", "solid", "rdf", "sparql", "shapes", "privacy", "web"]


def _pod_root(params: NetworkParams, k: int) -> str:
    width = max(2, len(str(max(params.pod_count - 1, 0))))
    return f"{params.base_iri}pods/pod{k:0{width}d}/"


def _doc_iri(root: str, family: Family, i: int) -> str:
    if family.name == PROFILE:
        return f"{root}{family.path_prefix}card"
    return f"{root}{family.path_prefix}{i}"


def _entity(doc: str, family: Family) -> str:
    return doc + ("#me" if family.name == PROFILE else "#it")


def generate_network(params: NetworkParams) -> DocumentNetwork:
    """Build a network; a pure function of ``params``.

    Raises GenerationError if the result breaks validity, exclusivity or
    completeness-flag honesty (it never should).
    """
    params.validate()
    rng = random.Random(params.seed)
    fams = list(params.families)
    shape_iris = {f.name: f.shape for f in fams}
    shapes = {f.name: family_shape(f, shape_iris) for f in fams}
    roots = [_pod_root(params, k) for k in range(params.pod_count)]
    docs_of: list[dict[str, list[str]]] = [
        {f.name: [_doc_iri(root, f, i) for i in range(1, params.count(f.name) + 1)] for f in fams}
        for root in roots
    ]
    posts_of = [[_entity(d, f) for f in fams if f.name == "post" for d in pod[f.name]]
                for pod in docs_of]
    me_of = [root + "profile/card#me" for root in roots]
    for k, pod in enumerate(docs_of):
        me_of[k] = _entity(pod[PROFILE][0], next(f for f in fams if f.name == PROFILE))

    documents: dict[str, list[Triple]] = {}
    type_ = iri(RDF_TYPE)
    for k, root in enumerate(roots):
        me = iri(me_of[k])
        for fam in fams:
            for i, doc in enumerate(docs_of[k][fam.name], start=1):
                ent = iri(_entity(doc, fam))
                ts = [Triple(ent, type_, iri(fam.class_iri))]
                if fam.name == PROFILE:
                    ts.append(Triple(ent, _v("name"), literal(f"Person {k}")))
                    for j in range(params.pod_count):
                        if j != k and rng.random() < params.inter_pod_link_density:
                            ts.append(Triple(ent, _v("knows"), iri(me_of[j])))
                    for other in fams:
                        if other.name != PROFILE:
                            ts.extend(Triple(ent, _v("hasResource"), iri(d)) for d in docs_of[k][other.name])
                elif fam.name == "post":
                    ts.append(Triple(ent, _v("content"), literal(f"post {i} of pod {k}")))
                    ts.append(Triple(ent, _v("hasCreator"), me))
                    for tag in sorted(rng.sample(_TAGS, rng.randint(0, 2))):
                        ts.append(Triple(ent, _v("hasTag"), literal(tag)))
                elif fam.name == "comment":
                    ts.append(Triple(ent, _v("commentText"), literal(f"comment {i} of pod {k}", lang="en")))
                    ts.append(Triple(ent, _v("hasCreator"), me))
                    foreign = [p for j, ps in enumerate(posts_of) if j != k for p in ps]
                    target = None
                    if foreign and (rng.random() < params.inter_pod_link_density or not posts_of[k]):
                        target = rng.choice(foreign)
                    elif posts_of[k]:
                        target = rng.choice(posts_of[k])
                    if target is not None:
                        ts.append(Triple(ent, _v("replyOf"), iri(target)))
                elif fam.name == "settings":
                    ts.append(Triple(ent, _v("settingKey"), literal(f"key{i}")))
                    ts.append(Triple(ent, _v("settingValue"),
                                     literal(str(rng.randint(0, 99)), "http://www.w3.org/2001/XMLSchema#integer")))
                    ts.append(Triple(ent, _v("settingOf"), me))
                else:
                    ts.append(Triple(ent, _v(fam.name + "Label"), literal(f"{fam.name} {i} of pod {k}")))
                    ts.append(Triple(ent, _v("hasCreator"), me))
                documents[doc] = ts

    n_incomplete = int(params.incomplete_index_fraction * params.pod_count + 0.5)
    incomplete = set(rng.sample(range(params.pod_count), n_incomplete))
    shape_indexes: dict[str, ShapeIndex] = {}
    type_indexes: dict[str, dict[str, list[str]]] = {}
    for k, root in enumerate(roots):
        present = [f for f in fams if docs_of[k][f.name]]
        omitted = rng.choice(present).name if k in incomplete else None
        entries = tuple(ShapeIndexEntry(f.shape, tuple(docs_of[k][f.name]))
                        for f in present if f.name != omitted)
        shape_indexes[root] = ShapeIndex((root,), k not in incomplete, entries, root + SHAPE_INDEX_NAME)
        type_indexes[root] = {f.class_iri: list(docs_of[k][f.name]) for f in present if f.name != omitted}

    shape_docs: dict[str, list[Shape]] = {}
    for f in fams:
        shape_docs.setdefault(strip_fragment(f.shape), []).append(shapes[f.name])

    net = DocumentNetwork(
        documents=documents,
        shape_indexes=shape_indexes,
        type_indexes=type_indexes,
        shape_docs={d: format_shapes(s) for d, s in shape_docs.items()},
        allowlist=[params.base_iri + "pods/"],
        latency_ms=params.latency_ms_per_request,
        seeds=[strip_fragment(me_of[0])] if roots else [],
        families=fams,
    )
    check = check_network(net)
    if not check.ok:
        raise GenerationError("generated network violates its guarantees:\n" + "\n".join(check.failures()))
    return net


# --------------------------------------------------------------------------
# Guarantee checks

@dataclass
class FixtureCheck:
    documents_validated: int = 0
    validity: list[str] = field(default_factory=list)
    exclusivity: list[str] = field(default_factory=list)
    completeness: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.validity or self.exclusivity or self.completeness)

    def failures(self) -> list[str]:
        return ([f"validity: {m}" for m in self.validity]
                + [f"exclusivity: {m}" for m in self.exclusivity]
                + [f"completeness: {m}" for m in self.completeness])


def check_network(net: DocumentNetwork) -> FixtureCheck:
    """Validity of claimed documents, family exclusivity, completeness honesty."""
    report = FixtureCheck()
    shapes = net.all_shapes()

    for root, index in sorted(net.shape_indexes.items()):
        for entry in index.entries:
            shape = shapes.get(entry.shape)
            claimed = [d for d in net.documents if entry.claims(d)]
            for doc in entry.resources:
                if doc not in net.documents:
                    report.validity.append(f"<{doc}> is indexed but not served")
            if shape is None:
                report.validity.append(f"shape <{entry.shape}> is not served")
                continue
            for doc in claimed:
                result = validate_document(net.documents[doc], shape)
                report.documents_validated += 1
                if not result.conformant:
                    report.validity.extend(f"<{doc}> vs <{shape.iri}>: {v}" for v in result.violations)
        unclaimed = [d for d in net.pod_documents(root) if index.in_domain(d) and index.claimant(d) is None]
        if index.complete and unclaimed:
            report.completeness.append(f"{root} is marked complete but leaves {len(unclaimed)} unclaimed")
        if not index.complete and not unclaimed:
            report.completeness.append(f"{root} is marked incomplete but claims every document")

    if net.families:
        family_by_class = {f.class_iri: f for f in net.families}
        preds = {f.name: shapes[f.shape].predicates() for f in net.families if f.shape in shapes}
        for doc, triples in net.documents.items():
            classes = {t.object.value for t in triples if t.predicate.value == RDF_TYPE}
            fams = {family_by_class[c].name for c in classes if c in family_by_class}
            if len(fams) != 1:
                report.exclusivity.append(f"<{doc}> mixes or lacks families: {sorted(fams)}")
                continue
            (name,) = fams
            if name not in preds:
                continue
            stray = {t.predicate.value for t in triples} - preds[name]
            if stray:
                report.exclusivity.append(f"<{doc}> ({name}) uses foreign predicates {sorted(stray)}")
    return report


# --------------------------------------------------------------------------
# Fixture directories

MANIFEST = "manifest.json"


def _relpath(target: str, suffix: str) -> str:
    parts = urlsplit(target)
    path = (parts.netloc + parts.path).strip("/") or "root"
    if target.endswith("/"):
        path += "/index"
    if not path.endswith(suffix):
        path += suffix
    return path


def save_fixture(net: DocumentNetwork, directory: str | os.PathLike) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    resources: dict[str, str] = {}

    def write(target: str, rel: str, text: str) -> None:
        if rel in resources.values():
            raise FixtureIntegrityError(f"two resources map to {rel}")
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        resources[target] = rel

    for doc, triples in net.documents.items():
        write(doc, _relpath(doc, ".nt"), serialize_ntriples(triples))
    for root, index in net.shape_indexes.items():
        write(root + SHAPE_INDEX_NAME, _relpath(root + SHAPE_INDEX_NAME, ".json"), index.to_json())
    for root, mapping in net.type_indexes.items():
        write(root + TYPE_INDEX_NAME, _relpath(root + TYPE_INDEX_NAME, ".json"),
              json.dumps(mapping, indent=2, sort_keys=True) + "\n")
    for doc, text in net.shape_docs.items():
        write(doc, _relpath(doc, ".shex"), text)

    manifest = {
        "allowlist": net.allowlist,
        "latencyMsPerRequest": net.latency_ms,
        "seeds": net.seeds,
        "families": [{"name": f.name, "shape": f.shape, "pathPrefix": f.path_prefix}
                     for f in net.families],
        "resources": resources,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                encoding="utf-8", newline="\n")
    return out


def load_fixture(directory: str | os.PathLike) -> DocumentNetwork:
    root_dir = Path(directory)
    manifest_path = root_dir / MANIFEST
    if not manifest_path.is_file():
        raise FixtureIntegrityError(f"no {MANIFEST} in {root_dir}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        resources: dict[str, str] = manifest["resources"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FixtureIntegrityError(f"unreadable manifest: {exc}") from None

    declared = set()
    for rel in resources.values():
        path = (root_dir / rel).resolve()
        if not path.is_file():
            raise FixtureIntegrityError(f"manifest names missing file {rel}")
        declared.add(path)
    for path in root_dir.rglob("*"):
        if path.is_file() and path.resolve() != manifest_path.resolve() and path.resolve() not in declared:
            raise FixtureIntegrityError(f"file {path.relative_to(root_dir)} is not declared in the manifest")

    net = DocumentNetwork(
        allowlist=list(manifest.get("allowlist", [])),
        latency_ms=int(manifest.get("latencyMsPerRequest", 0)),
        seeds=list(manifest.get("seeds", [])),
        families=[Family(f["name"], f["shape"], f["pathPrefix"]) for f in manifest.get("families", [])],
    )
    for target, rel in resources.items():
        text = (root_dir / rel).read_text(encoding="utf-8")
        name = target.rsplit("/", 1)[-1]
        pod = target[: len(target) - len(name)]
        try:
            if rel.endswith(".nt"):
                net.documents[target] = parse_ntriples(text, target)
            elif rel.endswith(".shex"):
                parse_shapes(text)
                net.shape_docs[target] = text
            elif name == SHAPE_INDEX_NAME:
                net.shape_indexes[pod] = parse_shape_index(text, target)
            elif name == TYPE_INDEX_NAME:
                mapping = json.loads(text)
                if not isinstance(mapping, dict) or not all(isinstance(v, list) for v in mapping.values()):
                    raise ValueError("type index must map class IRIs to lists of resources")
                net.type_indexes[pod] = mapping
            else:
                raise FixtureIntegrityError(f"cannot tell what kind of resource {rel} is")
        except FixtureIntegrityError:
            raise
        except ValueError as exc:
            raise FixtureIntegrityError(f"{rel}: {exc}") from None
    return net
