"""Grading, ranking and selection of candidate exceptions.

The grade of an exception is the weighted sum of its likelihood and the
suitability of its handling strategy; only exceptions strictly above the
selection threshold are handled.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cee import CeeTree, HandlingStrategy, strategy_of
from .errors import BackendError, MalformedOutputError, NoStrategyError, UnknownNameError
from .javatext import content_terms


@dataclass(frozen=True)
class RankConfig:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.6

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.alpha + self.beta <= 0:
            raise ValueError("alpha + beta must be positive")


@dataclass(frozen=True)
class RankedException:
    type_name: str
    likelihood: float
    suitability: float
    grade: float
    strategy: HandlingStrategy | None
    segment_ref: str

    def as_dict(self) -> dict:
        return {
            "type": self.type_name,
            "likelihood": round(self.likelihood, 6),
            "suitability": round(self.suitability, 6),
            "grade": round(self.grade, 6),
        }


def _clamp(value: float) -> float:
    return max(0.0, min(1.0, float(value)))


def mock_scores(type_name: str, segment_text: str, tree: CeeTree) -> tuple[float, float]:
    """Deterministic fallback scoring, identical to the mock backend's rule.

    Likelihood is the fraction of the node's property terms present in the
    segment text; suitability is 1.0 when a handling strategy resolves,
    else 0.5.
    """
    node = tree.node(type_name)
    prop_terms = content_terms(node.property)
    seg_terms = content_terms(segment_text)
    likelihood = len(prop_terms & seg_terms) / len(prop_terms) if prop_terms else 0.0
    try:
        strategy_of(type_name, tree)
        suitability = 1.0
    except NoStrategyError:
        suitability = 0.5
    return round(likelihood, 6), suitability


def _exception_nodes_binding(type_name: str, segment_text: str, tree: CeeTree) -> str:
    node = tree.node(type_name)
    try:
        strategy_of(type_name, tree)
        has_strategy = "yes"
    except NoStrategyError:
        has_strategy = "no"
    segment_block = "\n".join(
        "    " + line for line in segment_text.splitlines()
    )
    prop = " ".join(node.property.split())
    return (
        "Code segment:\n"
        f"{segment_block}\n"
        "Candidates:\n"
        f"- type: {type_name} | property: {prop} | has_strategy: {has_strategy}"
    )


def score(
    type_name: str, segment_text: str, tree: CeeTree, backend
) -> tuple[float, float]:
    """Likelihood and suitability for one exception on one segment.

    Replies are clamped to [0, 1]. Backend failure falls back to the mock
    formula, flagged degraded.
    """
    if type_name not in tree:
        raise UnknownNameError(type_name)
    binding = _exception_nodes_binding(type_name, segment_text, tree)
    try:
        payload = backend.call("ranker", {"exception_nodes": binding}, phase="rank")
        for entry in payload["Exceptions"]:
            if entry["ExceptionType"] == type_name:
                return _clamp(entry["LikelihoodScore"]), _clamp(entry["SuitabilityScore"])
        raise MalformedOutputError(f"ranker reply missing {type_name}")
    except (BackendError, MalformedOutputError) as exc:
        backend.record_degraded(f"score({type_name}): {exc}")
        return mock_scores(type_name, segment_text, tree)


def grade(likelihood: float, suitability: float, config: RankConfig) -> float:
    """Weighted overall grade: alpha * likelihood + beta * suitability."""
    return config.alpha * likelihood + config.beta * suitability


def rank(candidates: list[RankedException]) -> list[RankedException]:
    """Descending by grade; ties by type name, then segment reference."""
    return sorted(
        candidates, key=lambda c: (-c.grade, c.type_name, c.segment_ref)
    )


def select(ranked: list[RankedException], gamma: float) -> list[RankedException]:
    """Exceptions strictly above the threshold, in ranked order."""
    return [c for c in ranked if c.grade > gamma]
