"""Suite runs across reachability modes, digests, and CSV/JSON reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ReachabilityMode, TraversalEngine, TraversalMetrics
from .netsim import DocumentNetwork
from .query import SelectQuery, Solution, parse_select, solution_line, sort_solutions

MODES = (ReachabilityMode.C_ALL, ReachabilityMode.TYPE_INDEX, ReachabilityMode.SHAPE_INDEX)
BASELINES = (ReachabilityMode.C_ALL, ReachabilityMode.TYPE_INDEX)
CSV_COLUMNS = ["queryId", "mode", "requestCount", "documentsDereferenced",
               "simulatedLatencyTotal", "resultCount", "requestReductionPct"]

_SEEDS_LINE = re.compile(r"^\s*#\s*seeds?\s*:\s*(.*)$", re.IGNORECASE | re.MULTILINE)


def results_digest(results: list[Solution]) -> str:
    """sha256 over the canonically serialized, sorted solution multiset."""
    text = "\n".join(solution_line(mu) for mu in sort_solutions(results))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def set_digest(items) -> str:
    return hashlib.sha256("\n".join(sorted(items)).encode("utf-8")).hexdigest()


def reduction_pct(baseline: float, value: float) -> float | None:
    if baseline == 0:
        return None
    return 100.0 * (baseline - value) / baseline


def format_pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def seeds_from_query_text(text: str) -> list[str]:
    """IRIs listed on ``# seeds: <iri> ...`` comment lines of a query file."""
    out = []
    for m in _SEEDS_LINE.finditer(text):
        out.extend(re.findall(r"<([^<>\s]+)>", m.group(1)))
    return out


@dataclass
class QueryCase:
    query_id: str
    query: SelectQuery
    seeds: list[str]


@dataclass
class RunRecord:
    query_id: str
    mode: ReachabilityMode
    metrics: TraversalMetrics
    digest: str
    visited: list[str]
    index_documents: set[str] = field(default_factory=set)
    shape_documents: set[str] = field(default_factory=set)
    decisions: dict[str, str | None] = field(default_factory=dict)


@dataclass
class RunReport:
    records: list[RunRecord] = field(default_factory=list)
    mismatches: list[str] = field(default_factory=list)
    unstable: list[str] = field(default_factory=list)

    def record(self, query_id: str, mode: ReachabilityMode) -> RunRecord:
        for r in self.records:
            if r.query_id == query_id and r.mode is mode:
                return r
        raise KeyError((query_id, mode))

    def query_ids(self) -> list[str]:
        return list(dict.fromkeys(r.query_id for r in self.records))

    def reductions(self, query_id: str) -> dict[str, dict[str, float | None]]:
        shape = self.record(query_id, ReachabilityMode.SHAPE_INDEX).metrics
        out = {}
        for base in BASELINES:
            m = self.record(query_id, base).metrics
            out[base.value] = {
                "requestReductionPct": reduction_pct(m.request_count, shape.request_count),
                "simulatedLatencyReductionPct": reduction_pct(m.simulated_latency_total,
                                                              shape.simulated_latency_total),
            }
        return out

    def csv_rows(self) -> list[list[str]]:
        rows = []
        for r in self.records:
            m = r.metrics
            if r.mode is ReachabilityMode.SHAPE_INDEX:
                pct = ""
            else:
                shape = self.record(r.query_id, ReachabilityMode.SHAPE_INDEX).metrics
                pct = format_pct(reduction_pct(m.request_count, shape.request_count))
            rows.append([r.query_id, r.mode.value, str(m.request_count), str(m.documents_dereferenced),
                         str(m.simulated_latency_total), str(m.result_count), pct])
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def to_dict(self) -> dict:
        queries = {}
        for qid in self.query_ids():
            queries[qid] = {
                "runs": {
                    r.mode.value: {**r.metrics.to_dict(), "resultsDigest": r.digest,
                                   "visitedDigest": set_digest(r.visited),
                                   "decisions": r.decisions}
                    for r in self.records if r.query_id == qid
                },
                "shapeIndexReduction": self.reductions(qid),
            }
        return {"queries": queries, "mismatches": self.mismatches, "unstable": self.unstable}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_queries(directory: str | Path) -> list[tuple[str, str]]:
    """(query id, query text) for every ``.rq`` file, sorted by file name."""
    return [(p.stem, p.read_text(encoding="utf-8")) for p in sorted(Path(directory).glob("*.rq"))]


def run_case(net: DocumentNetwork, case: QueryCase, mode: ReachabilityMode, workers: int = 1,
             timeout_ms: int | None = None) -> RunRecord:
    engine = TraversalEngine(net, mode, workers=workers, timeout_ms=timeout_ms)
    results, metrics = engine.execute(case.query, case.seeds)
    st = engine.state
    decisions = {root: (p.decision.mode.value if p.decision else None)
                 for root, p in sorted(st.policies.items())} if mode is ReachabilityMode.SHAPE_INDEX else {}
    return RunRecord(case.query_id, mode, metrics, results_digest(results), list(st.queue.visited),
                     set(st.index_documents), set(st.shape_documents), decisions)


def run_suite(net: DocumentNetwork, cases: list[QueryCase], repeat: int = 1, workers: int = 1,
              timeout_ms: int | None = None) -> RunReport:
    report = RunReport()
    for case in cases:
        digests = set()
        for mode in MODES:
            first = None
            for _ in range(max(1, repeat)):
                rec = run_case(net, case, mode, workers, timeout_ms)
                if first is None:
                    first = rec
                elif (rec.digest != first.digest or set(rec.visited) != set(first.visited)
                      or rec.metrics.request_count != first.metrics.request_count):
                    report.unstable.append(f"{case.query_id}/{mode.value}")
            report.records.append(first)
            digests.add(first.digest)
        if len(digests) != 1:
            report.mismatches.append(case.query_id)
    return report


def make_cases(queries: list[tuple[str, str]], default_seeds: list[str]) -> list[QueryCase]:
    return [QueryCase(qid, parse_select(text), seeds_from_query_text(text) or list(default_seeds))
            for qid, text in queries]
