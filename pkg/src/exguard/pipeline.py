"""End-to-end orchestration: plan, detect, retrieve, rank, handle, report.

Files are processed by a bounded worker pool; within a unit the two detector
arms run concurrently. All results are merged in unit order, so mock-mode
output is byte-identical regardless of worker count.
"""

from __future__ import annotations

import configparser
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import cee as cee_mod
from . import deep_rag, detector, handler, metrics, planner, ranker
from .errors import BackendError, ExguardError, MalformedOutputError
from .gateway import BackendConfig, Gateway, HttpBackend, MockBackend

logger = logging.getLogger(__name__)

# Retrieval cut-off used by the pipeline. Deliberately below the module-level
# default: pipeline queries are code tokens, whose overlap with prose-rich
# node term sets tops out far lower than the prose verification samples the
# default serves.
PIPELINE_DELTA = 0.05


@dataclass
class PipelineConfig:
    cee_path: str = ""
    input_path: str = ""
    output_dir: str = "exguard_out"
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.6
    theta: float = deep_rag.DEFAULT_THETA
    delta: float = PIPELINE_DELTA
    max_depth: int = deep_rag.DEFAULT_MAX_DEPTH
    segment_limit: int = planner.DEFAULT_LIMIT
    workers: int = 4
    mock: bool = True
    endpoint: str = ""
    model: str = ""
    timeout_s: float = 60.0
    retries: int = 3
    figures: bool = True

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        ranker.RankConfig(self.alpha, self.beta, self.gamma)  # range check

    @property
    def rank_config(self) -> ranker.RankConfig:
        return ranker.RankConfig(self.alpha, self.beta, self.gamma)

    def analytic_fingerprint(self) -> dict:
        """Parameters that shape analysis output (worker count excluded:
        results are merge-ordered and must not depend on it)."""
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "theta": self.theta,
            "delta": self.delta,
            "max_depth": self.max_depth,
            "segment_limit": self.segment_limit,
        }


_CONFIG_SECTIONS = {
    "paths": {"cee": ("cee_path", str), "output": ("output_dir", str)},
    "rank": {"alpha": ("alpha", float), "beta": ("beta", float), "gamma": ("gamma", float)},
    "rag": {
        "theta": ("theta", float),
        "delta": ("delta", float),
        "max_depth": ("max_depth", int),
    },
    "run": {
        "segment_limit": ("segment_limit", int),
        "workers": ("workers", int),
        "mock": ("mock", bool),
        "figures": ("figures", bool),
    },
    "backend": {
        "endpoint": ("endpoint", str),
        "model": ("model", str),
        "timeout": ("timeout_s", float),
        "retries": ("retries", int),
    },
}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, overridden by the config file, overridden by flags."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ExguardError(f"cannot read config file: {path}")
        for section, keys in _CONFIG_SECTIONS.items():
            if not parser.has_section(section):
                continue
            for key, (attr, kind) in keys.items():
                if not parser.has_option(section, key):
                    continue
                if kind is bool:
                    values[attr] = parser.getboolean(section, key)
                elif kind is int:
                    values[attr] = parser.getint(section, key)
                elif kind is float:
                    values[attr] = parser.getfloat(section, key)
                else:
                    values[attr] = parser.get(section, key)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return PipelineConfig(**values)


def build_gateway(config: PipelineConfig, tree=None, latency_s: float = 0.0) -> Gateway:
    backend_config = BackendConfig(
        endpoint=config.endpoint,
        model=config.model,
        timeout_s=config.timeout_s,
        max_retries=config.retries,
        max_concurrency=config.workers,
    )
    if config.mock:
        return Gateway(MockBackend(tree=tree, latency_s=latency_s), backend_config)
    return Gateway(HttpBackend(backend_config), backend_config)


@dataclass
class UnitResult:
    path: str
    unit: planner.CodeUnit
    trace: dict
    optimized: handler.OptimizedUnit
    patches: list[handler.Patch]
    segments: list[detector.SensitiveSegment]
    blocks: list[metrics.GeneratedBlock]
    violations: list[str]


@dataclass
class RunReport:
    mode: str
    config: dict
    files: list[dict]
    totals: dict
    phase_calls: dict
    degraded_calls: int
    timings: dict = field(default_factory=dict)

    def as_json(self) -> str:
        doc = {
            "mode": self.mode,
            "config": self.config,
            "files": self.files,
            "totals": self.totals,
            "phase_calls": dict(sorted(self.phase_calls.items())),
            "degraded_calls": self.degraded_calls,
        }
        if self.mode != "mock":
            doc["timings"] = self.timings
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _collect_inputs(input_path: Path) -> list[tuple[str, Path]]:
    """(relative posix path, absolute path) of every .java file under input."""
    if input_path.is_file():
        if input_path.suffix != ".java":
            raise ExguardError(f"not a .java file: {input_path}")
        return [(input_path.name, input_path)]
    pairs = [
        (p.relative_to(input_path).as_posix(), p)
        for p in sorted(input_path.rglob("*.java"))
    ]
    return pairs


def process_unit(
    unit: planner.CodeUnit,
    tree: cee_mod.CeeTree,
    table: list[dict],
    labels: list,
    gateway: Gateway,
    config: PipelineConfig,
    arms_concurrently: bool = True,
) -> UnitResult:
    """Run the detection, retrieval, ranking and handling phases on one unit."""
    summary = planner.summarize(unit, gateway)

    if arms_concurrently:
        with ThreadPoolExecutor(max_workers=2) as pool:
            static_future = pool.submit(detector.detect_static, unit, tree, table)
            match_future = pool.submit(detector.detect_match, unit, tree, gateway, table)
            static_segments = static_future.result()
            matched_segments = match_future.result()
    else:
        static_segments = detector.detect_static(unit, tree, table)
        matched_segments = detector.detect_match(unit, tree, gateway, table)
    segments = detector.merge(static_segments, matched_segments)

    queries = []
    for seg in segments:
        seg_text = "\n".join(
            unit.lines[seg.span[0] - unit.start: seg.span[1] - unit.start + 1]
        )
        text = seg_text + "\n" + " ".join(sorted(summary.identifiers))
        queries.append(
            deep_rag.Query(unit_id=unit.unit_id, text=text, hinted_branches=seg.hints)
        )

    activated: set[str] = set()
    for query in queries:
        activated |= deep_rag.activate(query, labels)

    retrievals = deep_rag.retrieve(
        summary, queries, activated, tree,
        delta=config.delta, max_depth=config.max_depth,
    )

    candidate_types = [r.node for r in retrievals]
    if retrievals:
        branch_lines = "\n".join(
            f"- {r.node} (branch {r.branch}, depth {r.depth}, relevance {r.relevance:.3f})"
            for r in retrievals
        )
        try:
            payload = gateway.call(
                "predator",
                {
                    "code_unit": unit.text,
                    "code_summary": summary.text,
                    "exception_branches": branch_lines,
                },
                phase="predate",
            )
            predicted = [str(e["ExceptionType"]) for e in payload["ExceptionNodes"]]
            candidate_types = [t for t in predicted if t in tree] or candidate_types
        except (BackendError, MalformedOutputError) as exc:
            gateway.record_degraded(f"predator({unit.unit_id}): {exc}")

    cfg = detector.build_cfg(unit)
    ranked_all: list[ranker.RankedException] = []
    selected_all: list[ranker.RankedException] = []
    span_hints: dict[tuple[int, int], set[str]] = {}
    rank_config = config.rank_config
    from .javatext import mask_code

    masked = mask_code(unit.text).splitlines()
    while len(masked) < len(unit.lines):
        masked.append("")
    for seg in segments:
        seg_text = "\n".join(
            unit.lines[seg.span[0] - unit.start: seg.span[1] - unit.start + 1]
        )
        ref = handler.segment_ref(seg)
        seg_candidates = sorted(
            {
                t for t in candidate_types
                if t in tree and detector._hint_of(t, tree) in seg.hints
            }
        )
        candidates = []
        for type_name in seg_candidates:
            likelihood, suitability = ranker.score(type_name, seg_text, tree, gateway)
            candidates.append(
                ranker.RankedException(
                    type_name=type_name,
                    likelihood=likelihood,
                    suitability=suitability,
                    grade=ranker.grade(likelihood, suitability, rank_config),
                    strategy=None,
                    segment_ref=ref,
                )
            )
        ranked = ranker.rank(candidates)
        picked = ranker.select(ranked, rank_config.gamma)
        for item in ranked:
            ranked_all.append(item)
        selected_all.extend(picked)
        if picked:
            try:
                span = handler.plan_tryspan(seg, cfg, masked_lines=masked)
                span_hints.setdefault(span, set()).update(seg.hints)
            except Exception:
                pass
        rejected = [c for c in ranked if c not in picked]
        for item in rejected:
            logger.info(
                "ranker rejected %s (grade %.3f <= %.3f) on %s",
                item.type_name, item.grade, rank_config.gamma, item.segment_ref,
            )

    patches: list[handler.Patch] = []
    violations: list[str] = []
    if selected_all:
        try:
            patches = handler.generate(
                unit, selected_all, tree, cfg,
                backend=None if config.mock else gateway,
            )
        except (handler.PatchError, ExguardError) as exc:
            violations.append(f"patch generation failed: {exc}")
    optimized = handler.apply_patches(unit, patches)
    violations.extend(handler.validate(optimized, tree))

    blocks = []
    for patch in patches:
        block_lines = list(patch.prefix_lines)
        for line in unit.lines[
            patch.target_span[0] - unit.start: patch.target_span[1] - unit.start + 1
        ]:
            block_lines.append(handler.INDENT_UNIT + line if line.strip() else line)
        block_lines.extend(patch.suffix_lines)
        blocks.append(
            metrics.GeneratedBlock(
                text="\n".join(block_lines),
                hints=set(span_hints.get(patch.target_span, set())),
            )
        )

    selected_refs = {(c.type_name, c.segment_ref) for c in selected_all}
    trace = {
        "unit": unit.unit_id,
        "span": list(unit.span),
        "kind": unit.kind,
        "oversize": unit.oversize,
        "summary": summary.text,
        "summary_degraded": summary.degraded,
        "segments": [s.as_dict() for s in segments],
        "activated_branches": sorted(activated),
        "retrievals": [r.as_dict() for r in retrievals],
        "ranked": [
            dict(c.as_dict(), selected=(c.type_name, c.segment_ref) in selected_refs)
            for c in ranked_all
        ],
        "patches": [p.as_dict() for p in patches],
        "violations": violations,
    }
    return UnitResult(
        path=unit.path,
        unit=unit,
        trace=trace,
        optimized=optimized,
        patches=patches,
        segments=segments,
        blocks=blocks,
        violations=violations,
    )


def run_analyze(
    config: PipelineConfig,
    gateway: Gateway | None = None,
) -> tuple[RunReport, dict[str, str], dict[str, metrics.Detections]]:
    """Analyze every .java file under the input path.

    Returns the run report, the patched text per relative path, and the
    detection summaries that feed evaluation.
    """
    input_path = Path(config.input_path)
    if not input_path.exists():
        raise ExguardError(f"input path does not exist: {input_path}")
    pairs = _collect_inputs(input_path)
    if not pairs:
        raise ExguardError(f"no .java files under {input_path}")

    tree = cee_mod.load_cee(config.cee_path) if config.cee_path else cee_mod.load_bundled()
    table = cee_mod.build_keyword_table(tree)
    if gateway is None:
        gateway = build_gateway(config, tree=tree)

    started = time.perf_counter()
    labels = deep_rag.assign_labels(tree, gateway)

    units_by_file: dict[str, list[planner.CodeUnit]] = {}
    for rel, abs_path in pairs:
        source = planner.SourceFile(
            path=rel,
            lines=tuple(abs_path.read_text(encoding="utf-8").splitlines()),
        )
        units_by_file[rel] = planner.segment(source, limit=config.segment_limit)

    jobs = [(rel, unit) for rel, units in units_by_file.items() for unit in units]

    def run_one(job):
        rel, unit = job
        return (rel, unit.start), process_unit(
            unit, tree, table, labels, gateway, config,
            arms_concurrently=config.workers > 1,
        )

    results: dict[tuple[str, int], UnitResult] = {}
    if config.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for key, result in pool.map(run_one, jobs):
                results[key] = result
    else:
        for job in jobs:
            key, result = run_one(job)
            results[key] = result

    files_out: list[dict] = []
    patched: dict[str, str] = {}
    detections: dict[str, metrics.Detections] = {}
    total_segments = total_patches = total_violations = 0
    for rel in sorted(units_by_file):
        unit_results = [
            results[(rel, unit.start)] for unit in units_by_file[rel]
        ]
        unit_results.sort(key=lambda r: r.unit.start)
        text = "\n".join(r.optimized.text for r in unit_results)
        if unit_results:
            text += "\n"
        patched[rel] = text
        spans: list = []
        try_spans: list = []
        types: set[str] = set()
        blocks: list[metrics.GeneratedBlock] = []
        for r in unit_results:
            spans.extend(tuple(s.span) for s in r.segments)
            try_spans.extend(tuple(p.target_span) for p in r.patches)
            for p in r.patches:
                types.update(p.caught_types)
            blocks.extend(r.blocks)
            total_segments += len(r.segments)
            total_patches += len(r.patches)
            total_violations += len(r.violations)
        detections[rel] = metrics.Detections(
            segments=spans,
            try_spans=try_spans,
            exception_types=types,
            generated_text=text,
            blocks=blocks,
        )
        files_out.append({"path": rel, "units": [r.trace for r in unit_results]})

    if not config.mock and gateway.calls > 0 and gateway.successes == 0:
        raise BackendError(
            f"unrecoverable: all {gateway.calls} live backend attempts failed"
        )

    elapsed = time.perf_counter() - started
    report = RunReport(
        mode="mock" if config.mock else "live",
        config=config.analytic_fingerprint(),
        files=files_out,
        totals={
            "files": len(files_out),
            "units": len(jobs),
            "segments": total_segments,
            "patches": total_patches,
            "violations": total_violations,
        },
        phase_calls=dict(gateway.phase_calls),
        degraded_calls=gateway.degraded_calls,
        timings={"wall_s": round(elapsed, 3)},
    )
    logger.info("analyze: %d files, %d units in %.2fs", len(files_out), len(jobs), elapsed)
    return report, patched, detections


def run_evaluate(
    config: PipelineConfig, gateway: Gateway | None = None
) -> tuple[metrics.EvaluationReport, RunReport, dict[str, str]]:
    """Analyze the corpus, then score it against the sidecar ground truth."""
    input_path = Path(config.input_path)
    pairs = _collect_inputs(input_path)
    if not pairs:
        raise ExguardError(f"no .java files under {input_path}")
    missing = [
        rel for rel, abs_path in pairs
        if not abs_path.with_suffix(".expect.json").exists()
    ]
    if missing:
        raise ExguardError("missing sidecars for: " + ", ".join(sorted(missing)))

    tree = cee_mod.load_cee(config.cee_path) if config.cee_path else cee_mod.load_bundled()
    if gateway is None:
        gateway = build_gateway(config, tree=tree)
    run_report, patched, detections = run_analyze(config, gateway=gateway)
    ground_truth = {
        rel: metrics.load_ground_truth(abs_path) for rel, abs_path in pairs
    }
    evaluation = metrics.evaluate(ground_truth, detections, tree, gateway)
    return evaluation, run_report, patched


def run_bench(
    latency_ms: float, branches: int, workers: int, config: PipelineConfig | None = None
) -> dict:
    """Per-branch retrieval calls with injected latency, timed sequentially
    and with a bounded worker pool."""
    config = config or PipelineConfig()
    tree = cee_mod.load_bundled()
    latency_s = latency_ms / 1000.0
    prompts = [
        ("cee-genscenario", {"sample_desc": "bench", "ename": f"Branch{i}"})
        for i in range(branches)
    ]

    def timed(n_workers: int) -> float:
        gw = Gateway(
            MockBackend(tree=tree, latency_s=latency_s),
            BackendConfig(max_concurrency=max(1, n_workers)),
        )
        start = time.perf_counter()
        if prompts:
            if n_workers <= 1:
                for name, bindings in prompts:
                    gw.call(name, bindings)
            else:
                with ThreadPoolExecutor(max_workers=n_workers) as pool:
                    list(pool.map(lambda p: gw.call(p[0], p[1]), prompts))
        return time.perf_counter() - start

    sequential_s = timed(1)
    parallel_s = timed(workers)
    return {
        "latency_ms": latency_ms,
        "branches": branches,
        "workers": workers,
        "sequential_s": round(sequential_s, 4),
        "parallel_s": round(parallel_s, 4),
        "speedup": round(sequential_s / parallel_s, 3) if parallel_s > 0 else float("inf"),
    }
