"""Depth-wise retrieval over the exception tree.

Branch roots get development-scenario labels; a query activates branches by
keyword overlap (hints always activate); few-sample verification measures
pass rate and capture accuracy per branch, records failure patterns, and
refines underperforming labels by growing their keyword sets. Retrieval then
walks activated branches depth by depth and scores nodes by lexical overlap.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .cee import BranchLabel, CeeTree, node_terms
from .errors import BackendError, MalformedOutputError
from .javatext import content_terms
from .planner import FunctionSummary

DEFAULT_THETA = 0.7
DEFAULT_DELTA = 0.25
DEFAULT_MAX_DEPTH = 5


@dataclass(frozen=True)
class Query:
    unit_id: str
    text: str
    hinted_branches: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("query text must be non-empty")


@dataclass(frozen=True)
class VerificationSample:
    sample_id: str
    text: str
    expected_branch: str
    expected_types: frozenset[str]


@dataclass(frozen=True)
class FailureRecord:
    sample_id: str
    branch: str
    missing_keywords: tuple[str, ...]
    note: str


class EnvContext:
    """Append-only log of failure patterns, safe for concurrent writers."""

    def __init__(self):
        self._records: list[FailureRecord] = []
        self._lock = threading.Lock()

    def append(self, record: FailureRecord) -> None:
        with self._lock:
            self._records.append(record)

    @property
    def records(self) -> list[FailureRecord]:
        with self._lock:
            return list(self._records)

    def for_branch(self, branch: str) -> list[FailureRecord]:
        return [r for r in self.records if r.branch == branch]


@dataclass
class BranchReport:
    branch: str
    pass_rates: list[float] = field(default_factory=list)
    accuracies: list[float] = field(default_factory=list)
    mean_pass: float | None = None
    mean_accuracy: float | None = None
    refined: bool = False
    insufficient_data: bool = False

    def below(self, theta: float) -> bool:
        if self.insufficient_data:
            return False
        return self.mean_pass < theta or self.mean_accuracy < theta

    def as_dict(self) -> dict:
        return {
            "branch": self.branch,
            "pass_rates": self.pass_rates,
            "accuracies": self.accuracies,
            "mean_pass": self.mean_pass,
            "mean_accuracy": self.mean_accuracy,
            "refined": self.refined,
            "insufficient_data": self.insufficient_data,
        }


@dataclass(frozen=True)
class Retrieval:
    node: str
    branch: str
    depth: int
    relevance: float

    def as_dict(self) -> dict:
        return {
            "node": self.node,
            "branch": self.branch,
            "depth": self.depth,
            "relevance": round(self.relevance, 6),
        }


def _scenario_anchor(tree: CeeTree) -> str:
    if "IOException" in tree:
        anchor = tree.node("IOException").scenario
        if anchor:
            return anchor
    for node in tree.branch_roots:
        if node.scenario:
            return node.scenario
    return "attempt an operation that may fail"


def assign_labels(tree: CeeTree, backend) -> list[BranchLabel]:
    """One scenario label per branch root, in document order.

    Keywords are the content terms of the label text plus the branch node's
    own scenario terms; on backend failure the label degrades to exactly the
    scenario-term form.
    """
    anchor = _scenario_anchor(tree)
    labels: list[BranchLabel] = []
    for node in tree.branch_roots:
        base_terms = content_terms(node.scenario)
        try:
            payload = backend.call(
                "cee-genscenario",
                {"sample_desc": anchor, "ename": node.name},
                phase="label",
            )
            text = str(payload["scenario"])
            degraded = False
        except (BackendError, MalformedOutputError) as exc:
            backend.record_degraded(f"assign_labels({node.name}): {exc}")
            text = node.scenario
            degraded = True
        labels.append(
            BranchLabel(
                branch=node.name,
                text=text,
                keywords=content_terms(text) | base_terms,
                degraded=degraded,
            )
        )
    return labels


def activate(query: Query, labels: list[BranchLabel]) -> set[str]:
    """Branches activated by a query: its hints plus any label sharing a term."""
    terms = content_terms(query.text)
    activated = set(query.hinted_branches)
    for label in labels:
        if terms & label.keywords:
            activated.add(label.branch)
    return activated


def retrieve(
    summary: FunctionSummary | None,
    queries: list[Query],
    branches: set[str],
    tree: CeeTree,
    delta: float = DEFAULT_DELTA,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> list[Retrieval]:
    """Depth-wise node retrieval over the activated branches.

    Relevance of a node is the fraction of its own term set (scenario,
    property, dangerous operations) found among the query and summary terms.
    Nodes scoring at least `delta` are returned, best first.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    gathered: set[str] = set()
    for query in queries:
        gathered |= content_terms(query.text)
    if summary is not None:
        gathered |= content_terms(summary.text)
        gathered |= content_terms(" ".join(sorted(summary.identifiers)))

    out: list[Retrieval] = []
    for branch_name in sorted(branches):
        if branch_name not in tree:
            continue
        branch_node = tree.node(branch_name)
        if branch_node.depth != 2:
            continue
        for node in branch_node.walk():
            if node.depth > max_depth:
                continue
            terms = node_terms(node)
            if not terms:
                continue
            relevance = len(terms & gathered) / len(terms)
            if relevance >= delta:
                out.append(
                    Retrieval(
                        node=node.name,
                        branch=branch_name,
                        depth=node.depth,
                        relevance=relevance,
                    )
                )
    out.sort(key=lambda r: (-r.relevance, r.node))
    return out


def verify(
    branch: str,
    samples: list[VerificationSample],
    theta: float,
    labels: list[BranchLabel],
    env: EnvContext,
    tree: CeeTree,
    delta: float = DEFAULT_DELTA,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> BranchReport:
    """Few-sample verification of one branch's label.

    Per sample: pass rate is 1 when the sample text alone activates the
    branch; capture accuracy is the fraction of expected types retrieved at
    the current labels. Sub-threshold checks append a failure pattern.
    """
    report = BranchReport(branch=branch)
    if not samples:
        report.insufficient_data = True
        return report
    label = next((l for l in labels if l.branch == branch), None)
    known = label.keywords if label is not None else set()
    for sample in samples:
        query = Query(unit_id=f"sample:{sample.sample_id}", text=sample.text)
        passed = 1.0 if branch in activate(query, labels) else 0.0
        retrieved = {
            r.node
            for r in retrieve(None, [query], {branch}, tree, delta=delta, max_depth=max_depth)
        }
        if sample.expected_types:
            accuracy = len(retrieved & sample.expected_types) / len(sample.expected_types)
        else:
            accuracy = 0.0
        report.pass_rates.append(passed)
        report.accuracies.append(accuracy)
        if passed < theta or accuracy < theta:
            missing = tuple(sorted(content_terms(sample.text) - known))
            env.append(
                FailureRecord(
                    sample_id=sample.sample_id,
                    branch=branch,
                    missing_keywords=missing,
                    note=f"pass={passed:.2f} accuracy={accuracy:.2f} theta={theta:.2f}",
                )
            )
    report.mean_pass = sum(report.pass_rates) / len(report.pass_rates)
    report.mean_accuracy = sum(report.accuracies) / len(report.accuracies)
    return report


def refine_labels(
    branch: str, env: EnvContext, labels: list[BranchLabel], backend
) -> BranchLabel:
    """Grow a branch label from recorded failure patterns.

    Keywords only ever grow (union with the missing terms aggregated from
    the environment); the revision counter increments. The label text is
    regenerated through the backend in live mode and by deterministic
    appending under the mock; backend failure degrades to keyword-only
    refinement.
    """
    import logging

    logger = logging.getLogger(__name__)
    old = next((l for l in labels if l.branch == branch), None)
    if old is None:
        raise ValueError(f"no label assigned for branch {branch!r}")
    records = env.for_branch(branch)
    missing: set[str] = set()
    for record in records:
        missing.update(record.missing_keywords)
    if not missing:
        logger.warning("refinement of %s is a no-op: no failure patterns", branch)
    new_keywords = set(old.keywords) | missing
    added = sorted(missing - set(old.keywords))
    appended_text = old.text + (" | also covers: " + ", ".join(added) if added else "")
    degraded = False
    if getattr(backend, "is_mock", False) or not added:
        text = appended_text
    else:
        try:
            payload = backend.call(
                "cee-genscenario",
                {
                    "sample_desc": old.text + " | failure terms: " + ", ".join(added),
                    "ename": branch,
                },
                phase="label",
            )
            text = str(payload["scenario"])
        except (BackendError, MalformedOutputError) as exc:
            backend.record_degraded(f"refine_labels({branch}): {exc}")
            text = appended_text
            degraded = True
    refined = BranchLabel(
        branch=branch,
        text=text,
        keywords=new_keywords | content_terms(text),
        revision=old.revision + 1,
        degraded=degraded,
    )
    for i, label in enumerate(labels):
        if label.branch == branch:
            labels[i] = refined
    return refined


def verify_branches(
    samples: list[VerificationSample],
    theta: float,
    labels: list[BranchLabel],
    env: EnvContext,
    tree: CeeTree,
    delta: float = DEFAULT_DELTA,
    max_depth: int = DEFAULT_MAX_DEPTH,
    workers: int = 1,
) -> dict[str, BranchReport]:
    """Verification of every sampled branch, optionally in parallel.

    Branch order in the result is deterministic; the env append order may
    differ across schedules but its content set does not.
    """
    by_branch: dict[str, list[VerificationSample]] = {}
    for sample in samples:
        by_branch.setdefault(sample.expected_branch, []).append(sample)
    branches = sorted(by_branch)

    def one(branch: str) -> tuple[str, BranchReport]:
        return branch, verify(
            branch, by_branch[branch], theta, labels, env, tree,
            delta=delta, max_depth=max_depth,
        )

    if workers <= 1 or len(branches) <= 1:
        results = dict(one(b) for b in branches)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(one, branches))
    return {b: results[b] for b in branches}


def load_samples(path) -> list[VerificationSample]:
    """Verification samples from a JSON array of
    {id, text, expected_branch, expected_types}."""
    import json
    from pathlib import Path

    from .errors import ExguardError

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ExguardError(f"cannot read samples file {path}: {exc}") from exc
    if not isinstance(doc, list):
        raise ExguardError("samples file must hold a JSON array")
    out = []
    for i, entry in enumerate(doc):
        try:
            out.append(
                VerificationSample(
                    sample_id=str(entry["id"]),
                    text=str(entry["text"]),
                    expected_branch=str(entry["expected_branch"]),
                    expected_types=frozenset(map(str, entry["expected_types"])),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ExguardError(f"samples[{i}] malformed: {exc}") from exc
    return out
