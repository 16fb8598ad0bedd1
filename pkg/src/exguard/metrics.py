"""The six evaluation metrics and corpus-level evaluation.

Span metrics use exact line-range matching (no partial credit); type
accuracy honors subclass relationships; edit similarity runs on
whitespace-normalized text unless raw mode is requested. Corpus scores are
micro-averages: items pool across files before each formula applies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .cee import CeeTree, is_subtype
from .errors import BackendError, ExguardError, MalformedOutputError
from .review import GENERIC_TYPES, review_block, scan_try_blocks
from .javatext import first_unbalanced_line, mask_code

Span = tuple[int, int]


@dataclass
class GroundTruth:
    sensitive_spans: list[Span]
    try_spans: list[Span]
    exception_types: set[str]
    reference_text: str


@dataclass
class GeneratedBlock:
    text: str
    hints: set[str] = field(default_factory=set)


@dataclass
class Detections:
    segments: list[Span]
    try_spans: list[Span]
    exception_types: set[str]
    generated_text: str
    blocks: list[GeneratedBlock] = field(default_factory=list)


@dataclass(frozen=True)
class AcrsRule:
    rule_id: str
    weight: float
    raw_score: float
    max_score: float

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("rule weight must be positive")
        if not 0 <= self.raw_score <= self.max_score:
            raise ValueError("raw score must lie in [0, max]")


@dataclass
class EvaluationReport:
    acrs: float | None
    cov: float | None
    cov_p: float | None
    acc: float | None
    es: float | None
    crs: float | None
    counts: dict[str, int]
    per_file: dict[str, dict]
    not_applicable: list[str] = field(default_factory=list)

    def as_dict(self, acrs_percent: bool = False) -> dict:
        acrs = self.acrs
        if acrs is not None and acrs_percent:
            acrs = round(acrs * 100.0, 4)
        return {
            "acrs": acrs if acrs is None else round(acrs, 6),
            "cov": _round(self.cov),
            "cov_p": _round(self.cov_p),
            "acc": _round(self.acc),
            "es": _round(self.es),
            "crs": _round(self.crs),
            "counts": dict(sorted(self.counts.items())),
            "per_file": {k: self.per_file[k] for k in sorted(self.per_file)},
            "not_applicable": sorted(self.not_applicable),
        }


def _round(value: float | None) -> float | None:
    return None if value is None else round(value, 6)


# --- span and type metrics ----------------------------------------------------


def cov(actual: list, detected: list) -> float | None:
    """Percent of actual sensitive segments with an exactly matching detection.

    Spans compare as sets; over-detection is not penalized. None when there
    is nothing to detect.
    """
    actual_set = set(actual)
    if not actual_set:
        return None
    detected_set = set(detected)
    hit = sum(1 for span in actual_set if span in detected_set)
    return hit / len(actual_set) * 100.0


def cov_p(actual_trys: list, detected_trys: list) -> float | None:
    """Try-block coverage with an over-detection penalty: TP / (P + FP) * 100.

    Spans compare as sets with exact line-range equality, so TP never
    exceeds P and the score never exceeds 100.
    """
    actual_set = set(actual_trys)
    detected_set = set(detected_trys)
    p = len(actual_set)
    if p == 0:
        return None
    tp = len(detected_set & actual_set)
    fp = len(detected_set) - tp
    return tp / (p + fp) * 100.0


def acc(actual_types: set, detected_types: set, tree: CeeTree) -> float | None:
    """Percent of detected types that equal an actual type or are a subclass
    of one. None when nothing was detected.

    Items may be bare type names or (file, type) pairs; pairs compare within
    their file, which is how corpus pooling stays a micro-average.
    """
    if not detected_types:
        return None

    def parts(item):
        return item if isinstance(item, tuple) else (None, item)

    actual_by_file: dict = {}
    for item in actual_types:
        file_key, name = parts(item)
        actual_by_file.setdefault(file_key, set()).add(name)

    correct = 0
    for item in detected_types:
        file_key, name = parts(item)
        targets = actual_by_file.get(file_key, set())
        if name in targets:
            correct += 1
        elif name in tree and any(
            t in tree and is_subtype(name, t, tree) for t in targets
        ):
            correct += 1
    return correct / len(detected_types) * 100.0


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over characters (insert, delete, substitute)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[len(b)]


def normalize_code(text: str) -> str:
    """Strip trailing whitespace per line and collapse runs of blank lines."""
    out: list[str] = []
    blank = False
    for line in text.splitlines():
        stripped = line.rstrip()
        if stripped:
            out.append(stripped)
            blank = False
        elif not blank:
            out.append("")
            blank = True
    while out and not out[-1]:
        out.pop()
    return "\n".join(out)


def edit_similarity(generated: str, actual: str, raw: bool = False) -> float:
    """1 - lev(G, A) / max(|G|, |A|) on normalized text (raw mode optional).

    Both empty compares as 1.0 by convention.
    """
    g = generated if raw else normalize_code(generated)
    a = actual if raw else normalize_code(actual)
    longest = max(len(g), len(a))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(g, a) / longest


def acrs(rules: list[AcrsRule]) -> float:
    """Weighted mean of per-rule normalized scores, on the 0-1 scale."""
    if not rules:
        raise ExguardError("acrs requires at least one rule")
    total_weight = sum(r.weight for r in rules)
    weighted = sum(r.weight * (r.raw_score / r.max_score) for r in rules)
    return weighted / total_weight


# --- code review (judge / CRS / ACRS rule table) ------------------------------

_LOG_MARKERS = ("println", "printStackTrace", "log", "Log", "logger")


def judge(block: GeneratedBlock, tree: CeeTree, backend) -> str:
    """Binary good/bad assessment of one generated try-catch block.

    Live backends answer the judge prompt; on failure the local rule
    checklist decides, flagged degraded.
    """
    hints = ", ".join(sorted(block.hints))
    try:
        payload = backend.call("judge", {"block": block.text, "hints": hints}, phase="judge")
        return str(payload["verdict"])
    except (BackendError, MalformedOutputError) as exc:
        backend.record_degraded(f"judge: {exc}")
        return "good" if review_block(block.text, block.hints, tree) else "bad"


def crs(judgments: list[str]) -> float | None:
    """Percent of blocks judged good. None when no blocks were judged."""
    if not judgments:
        return None
    good = sum(1 for j in judgments if j == "good")
    return good / len(judgments) * 100.0


DEFAULT_RULE_WEIGHTS = {
    "specific-catch": 3.0,
    "non-empty-catch": 2.0,
    "catch-order": 2.0,
    "logging-present": 1.0,
    "no-swallowed-rethrow": 1.0,
    "brace-balance": 1.0,
}


def default_acrs_rules(
    blocks: list[GeneratedBlock],
    texts: list[str],
    tree: CeeTree,
    weights: dict[str, float] | None = None,
) -> list[AcrsRule]:
    """The shipped six-rule table, scored mechanically from patched output.

    Rules whose measurement base is empty are omitted.
    """
    from .review import catch_order_violations

    weights = dict(DEFAULT_RULE_WEIGHTS, **(weights or {}))
    catches = []
    trys = []
    for block in blocks:
        for tb in scan_try_blocks(block.text):
            trys.append(tb)
            catches.extend(tb.catches)

    def body_real(clause) -> str:
        return mask_code(clause.body).replace("{", " ").replace("}", " ").strip()

    counts: dict[str, tuple[float, float]] = {}
    if catches:
        counts["specific-catch"] = (
            sum(1 for c in catches if c.type_name not in GENERIC_TYPES),
            len(catches),
        )
        counts["non-empty-catch"] = (
            sum(1 for c in catches if body_real(c)),
            len(catches),
        )
        counts["logging-present"] = (
            sum(1 for c in catches if any(m in c.body for m in _LOG_MARKERS)),
            len(catches),
        )
        counts["no-swallowed-rethrow"] = (
            sum(1 for c in catches if c.var_name in mask_code(c.body)),
            len(catches),
        )
    if trys:
        counts["catch-order"] = (
            sum(1 for tb in trys if not catch_order_violations(tb, tree)),
            len(trys),
        )
    if texts:
        counts["brace-balance"] = (
            sum(1 for t in texts if first_unbalanced_line(t.splitlines()) is None),
            len(texts),
        )
    return [
        AcrsRule(rule_id=rid, weight=weights[rid], raw_score=q, max_score=m)
        for rid, (q, m) in sorted(counts.items())
    ]


# --- corpus evaluation ---------------------------------------------------------


def load_ground_truth(java_path: Path) -> GroundTruth:
    """Sidecar `<name>.expect.json` next to a Java source file."""
    sidecar = java_path.with_suffix(".expect.json")
    if not sidecar.exists():
        raise ExguardError(f"missing sidecar: {sidecar}")
    try:
        doc = json.loads(sidecar.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ExguardError(f"malformed sidecar {sidecar}: {exc}") from exc
    reference = ""
    ref_path = doc.get("reference_path", "")
    if ref_path:
        ref_file = (sidecar.parent / ref_path).resolve()
        if not ref_file.exists():
            raise ExguardError(f"sidecar {sidecar} references missing file {ref_file}")
        reference = ref_file.read_text(encoding="utf-8")
    return GroundTruth(
        sensitive_spans=[tuple(s) for s in doc.get("sensitive_spans", [])],
        try_spans=[tuple(s) for s in doc.get("try_spans", [])],
        exception_types=set(map(str, doc.get("exception_types", []))),
        reference_text=reference,
    )


def evaluate(
    ground_truth: dict[str, GroundTruth],
    detections: dict[str, Detections],
    tree: CeeTree,
    backend,
    rules: list[AcrsRule] | None = None,
) -> EvaluationReport:
    """Micro-averaged corpus metrics plus a per-file breakdown."""
    missing = sorted(set(ground_truth) ^ set(detections))
    if missing:
        raise ExguardError(f"corpus/detections key mismatch: {missing}")
    files = sorted(ground_truth)
    not_applicable: list[str] = []

    pooled_s = [(f, span) for f in files for span in ground_truth[f].sensitive_spans]
    pooled_d = [(f, span) for f in files for span in detections[f].segments]
    pooled_t = [(f, span) for f in files for span in ground_truth[f].try_spans]
    pooled_th = [(f, span) for f in files for span in detections[f].try_spans]
    pooled_e = {(f, t) for f in files for t in ground_truth[f].exception_types}
    pooled_eh = {(f, t) for f in files for t in detections[f].exception_types}

    cov_value = cov(pooled_s, pooled_d)
    cov_p_value = cov_p(pooled_t, pooled_th)
    acc_value = acc(pooled_e, pooled_eh, tree)
    for name, value in (("cov", cov_value), ("cov_p", cov_p_value), ("acc", acc_value)):
        if value is None:
            not_applicable.append(name)

    generated_join = "\n".join(normalize_code(detections[f].generated_text) for f in files)
    reference_join = "\n".join(normalize_code(ground_truth[f].reference_text) for f in files)
    if not generated_join and not reference_join:
        es_value = 1.0
        not_applicable.append("es")
    else:
        es_value = edit_similarity(generated_join, reference_join, raw=True)

    all_blocks = [b for f in files for b in detections[f].blocks]
    judgments = [judge(b, tree, backend) for b in all_blocks]
    crs_value = crs(judgments)
    if crs_value is None:
        not_applicable.append("crs")

    if rules is None:
        rules = default_acrs_rules(
            all_blocks, [detections[f].generated_text for f in files], tree
        )
    if rules:
        acrs_value = acrs(rules)
    else:
        acrs_value = None
        not_applicable.append("acrs")

    actual_try_set = set(pooled_t)
    detected_try_set = set(pooled_th)
    tp = len(detected_try_set & actual_try_set)
    counts = {
        "tp": tp,
        "fp": len(detected_try_set) - tp,
        "fn": len(actual_try_set) - tp,
        "p": len(actual_try_set),
        "detected_try": len(detected_try_set),
        "n_good": sum(1 for j in judgments if j == "good"),
        "n_total": len(judgments),
        "sensitive_actual": len(pooled_s),
        "sensitive_detected": len(pooled_d),
    }

    per_file: dict[str, dict] = {}
    for f in files:
        gt = ground_truth[f]
        det = detections[f]
        per_file[f] = {
            "cov": _round(cov(gt.sensitive_spans, det.segments)),
            "cov_p": _round(cov_p(gt.try_spans, det.try_spans)),
            "acc": _round(acc(gt.exception_types, det.exception_types, tree)),
            "es": _round(
                edit_similarity(det.generated_text, gt.reference_text)
                if (det.generated_text or gt.reference_text)
                else 1.0
            ),
            "blocks": len(det.blocks),
        }

    return EvaluationReport(
        acrs=acrs_value,
        cov=cov_value,
        cov_p=cov_p_value,
        acc=acc_value,
        es=es_value,
        crs=crs_value,
        counts=counts,
        per_file=per_file,
        not_applicable=not_applicable,
    )
