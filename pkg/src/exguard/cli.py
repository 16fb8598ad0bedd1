"""Command line interface.

Machine output is JSON on stdout; human logs go to stderr. Exit codes:
0 success, 1 usage, 2 input/parse, 3 backend, 4 validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cee as cee_mod
from . import deep_rag, pipeline, reporting
from .errors import BackendError, CeeParseError, CeeValidationError, ExguardError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_VALIDATION = 4

logger = logging.getLogger("exguard")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _config_from_args(args) -> pipeline.PipelineConfig:
    overrides = {
        "input_path": getattr(args, "path", None),
        "output_dir": getattr(args, "out", None),
        "cee_path": getattr(args, "cee", None),
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "gamma": getattr(args, "gamma", None),
        "theta": getattr(args, "theta", None),
        "delta": getattr(args, "delta", None),
        "max_depth": getattr(args, "max_depth", None),
        "segment_limit": getattr(args, "limit", None),
        "workers": getattr(args, "workers", None),
        "endpoint": getattr(args, "endpoint", None),
        "model": getattr(args, "model", None),
    }
    if getattr(args, "live", False):
        overrides["mock"] = False
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    return pipeline.load_config(getattr(args, "config", None), overrides)


def _write_outputs(out_dir: Path, patched: dict[str, str], report_json: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel, text in patched.items():
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
    (out_dir / "run_report.json").write_text(report_json, encoding="utf-8")


def cmd_analyze(args) -> int:
    config = _config_from_args(args)
    try:
        report, patched, _ = pipeline.run_analyze(config)
    except BackendError as exc:
        logger.error("backend failure: %s", exc)
        return EXIT_BACKEND
    except ExguardError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    report_json = report.as_json()
    _write_outputs(Path(config.output_dir), patched, report_json)
    sys.stdout.write(report_json)
    if report.totals["violations"]:
        logger.error("%d validation violation(s) in patched output", report.totals["violations"])
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    try:
        evaluation, run_report, patched = pipeline.run_evaluate(config)
    except BackendError as exc:
        logger.error("backend failure: %s", exc)
        return EXIT_BACKEND
    except ExguardError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    out_dir = Path(config.output_dir)
    _write_outputs(out_dir, patched, run_report.as_json())
    written = reporting.write_report_files(
        evaluation, out_dir, figures=config.figures, acrs_percent=args.acrs_percent
    )
    for path in written:
        logger.info("wrote %s", path)
    if args.format == "table":
        sys.stdout.write(reporting.render_table(evaluation, acrs_percent=args.acrs_percent) + "\n")
    else:
        _emit(evaluation.as_dict(acrs_percent=args.acrs_percent))
    return EXIT_OK


def cmd_cee(args) -> int:
    path = Path(args.file)
    if not path.exists():
        logger.error("no such file: %s", path)
        return EXIT_INPUT
    if args.subcommand == "stats":
        try:
            tree = cee_mod.load_cee(path, strict=args.strict)
        except CeeParseError as exc:
            logger.error("%s", exc)
            return EXIT_INPUT
        except CeeValidationError as exc:
            logger.error("%s", exc)
            return EXIT_VALIDATION
        _emit(cee_mod.stats(tree))
        return EXIT_OK
    # validate
    try:
        cee_mod.load_cee(path, strict=args.strict)
    except CeeParseError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except CeeValidationError as exc:
        _emit({"valid": False, "violations": [str(exc)]})
        return EXIT_VALIDATION
    _emit({"valid": True, "violations": []})
    return EXIT_OK


def cmd_rag_verify(args) -> int:
    config = _config_from_args(args)
    try:
        tree = cee_mod.load_cee(args.cee_file)
    except (CeeParseError, CeeValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    try:
        samples = deep_rag.load_samples(args.samples)
    except ExguardError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    unknown = sorted(
        {s.expected_branch for s in samples} - {b.name for b in tree.branch_roots}
    )
    if unknown:
        logger.error("samples reference unknown branches: %s", ", ".join(unknown))
        return EXIT_INPUT

    gateway = pipeline.build_gateway(config, tree=tree)
    labels = deep_rag.assign_labels(tree, gateway)
    env = deep_rag.EnvContext()
    if not samples:
        logger.warning("empty samples file: insufficient data, nothing verified")
    reports = deep_rag.verify_branches(
        samples, config.theta, labels, env, tree,
        delta=config.delta, max_depth=config.max_depth, workers=config.workers,
    )
    refined = []
    for branch in sorted(reports):
        if reports[branch].below(config.theta):
            deep_rag.refine_labels(branch, env, labels, gateway)
            reports[branch].refined = True
            refined.append(branch)
    doc = {
        "theta": config.theta,
        "branches": {b: reports[b].as_dict() for b in sorted(reports)},
        "refined": refined,
        "insufficient_data": not samples,
        "labels": [
            {
                "branch": l.branch,
                "text": l.text,
                "keywords": sorted(l.keywords),
                "revision": l.revision,
            }
            for l in labels
        ],
    }
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "rag_verify.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _emit(doc)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config_from_args(args)
    if not config.mock:
        logger.error("bench runs in mock mode only")
        return EXIT_USAGE
    result = pipeline.run_bench(args.latency, args.branches, args.workers or 8, config)
    _emit(result)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="exguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_path=True):
        if with_path:
            p.add_argument("path", help="input .java file or directory")
        p.add_argument("--config", help="config file (key = value sections)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--cee", help="exception tree JSON (default: bundled)")
        p.add_argument("--live", action="store_true", help="use the remote backend")
        p.add_argument("--workers", type=int, help="worker pool size")
        p.add_argument("--alpha", type=float, help="likelihood weight")
        p.add_argument("--beta", type=float, help="suitability weight")
        p.add_argument("--gamma", type=float, help="selection threshold (strict)")
        p.add_argument("--theta", type=float, help="verification threshold")
        p.add_argument("--delta", type=float, help="retrieval relevance threshold")
        p.add_argument("--max-depth", type=int, dest="max_depth", help="retrieval depth bound")
        p.add_argument("--limit", type=int, help="segmentation line limit")
        p.add_argument("--endpoint", help="chat-completion endpoint URL")
        p.add_argument("--model", help="model identifier for the live backend")

    p_analyze = sub.add_parser("analyze", help="detect fragile code and write patched sources")
    common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_eval = sub.add_parser("evaluate", help="analyze a corpus and score it against sidecars")
    common(p_eval)
    p_eval.add_argument("--format", choices=("json", "table"), default="json")
    p_eval.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_eval.add_argument(
        "--acrs-percent", action="store_true",
        help="report ACRS on the 0-100 scale instead of 0-1",
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_cee = sub.add_parser("cee", help="validate or inspect an exception tree document")
    p_cee.add_argument("subcommand", choices=("validate", "stats"))
    p_cee.add_argument("file")
    p_cee.add_argument("--strict", action="store_true", help="reject unknown fields")
    p_cee.set_defaults(func=cmd_cee)

    p_rag = sub.add_parser("rag-verify", help="verify branch labels on few samples and refine")
    p_rag.add_argument("cee_file", help="exception tree JSON")
    p_rag.add_argument("samples", help="verification samples JSON")
    common(p_rag, with_path=False)
    p_rag.set_defaults(func=cmd_rag_verify)

    p_bench = sub.add_parser("bench", help="measure sequential vs parallel retrieval wall time")
    p_bench.add_argument("--latency", type=float, required=True, help="injected latency (ms)")
    p_bench.add_argument("--branches", type=int, required=True, help="synthetic branch count")
    common(p_bench, with_path=False)
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,  # rebind to the current stderr on every invocation
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExguardError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
