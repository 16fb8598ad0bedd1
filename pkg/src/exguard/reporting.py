"""Evaluation report rendering: JSON, delimited per-file table, figures.

The report path always emits machine JSON; alongside it, a CSV with the
per-file breakdown and two PNG charts land in the output directory.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .metrics import EvaluationReport

_SUMMARY_METRICS = ("acrs", "cov", "cov_p", "acc", "es", "crs")
_PERCENT_SCALE = {"acrs": 100.0, "es": 100.0}  # 0-1 metrics drawn on the % axis


def write_report_files(
    evaluation: EvaluationReport,
    out_dir: str | Path,
    figures: bool = True,
    acrs_percent: bool = False,
) -> list[Path]:
    """Write report.json, report.csv and (optionally) the metric figures.

    Returns the paths written, in a fixed order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = evaluation.as_dict(acrs_percent=acrs_percent)
    written: list[Path] = []

    json_path = out / "report.json"
    json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(json_path)

    csv_path = out / "report.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "cov", "cov_p", "acc", "es", "blocks"])
        for name in sorted(evaluation.per_file):
            row = evaluation.per_file[name]
            writer.writerow(
                [name, row["cov"], row["cov_p"], row["acc"], row["es"], row["blocks"]]
            )
        writer.writerow(
            ["TOTAL", doc["cov"], doc["cov_p"], doc["acc"], doc["es"], doc["counts"]["n_total"]]
        )
    written.append(csv_path)

    if figures:
        written.extend(render_figures(evaluation, out))
    return written


def render_figures(evaluation: EvaluationReport, out_dir: Path) -> list[Path]:
    """Corpus summary bars and the per-file metric breakdown as PNGs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: list[Path] = []

    fig, ax = plt.subplots(figsize=(7, 4))
    labels, values = [], []
    raw = {
        "acrs": evaluation.acrs,
        "cov": evaluation.cov,
        "cov_p": evaluation.cov_p,
        "acc": evaluation.acc,
        "es": evaluation.es,
        "crs": evaluation.crs,
    }
    for name in _SUMMARY_METRICS:
        value = raw[name]
        if value is None:
            continue
        labels.append(name.upper().replace("_", "-"))
        values.append(value * _PERCENT_SCALE.get(name, 1.0))
    bars = ax.bar(labels, values, color="#4878a8")
    ax.set_ylim(0, 105)
    ax.set_ylabel("score (%)")
    ax.set_title("Corpus metrics")
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.1f}",
            (bar.get_x() + bar.get_width() / 2, value),
            ha="center", va="bottom", fontsize=8,
        )
    fig.tight_layout()
    summary_path = out_dir / "metrics_summary.png"
    fig.savefig(summary_path, dpi=120)
    plt.close(fig)
    written.append(summary_path)

    files = sorted(evaluation.per_file)
    if files:
        fig, ax = plt.subplots(figsize=(max(7, 1.1 * len(files)), 4.5))
        series = ("cov", "cov_p", "acc", "es")
        width = 0.8 / len(series)
        for k, metric in enumerate(series):
            xs = [i + k * width for i in range(len(files))]
            ys = [
                (evaluation.per_file[f][metric] or 0.0)
                * _PERCENT_SCALE.get(metric, 1.0)
                for f in files
            ]
            ax.bar(xs, ys, width=width, label=metric.upper().replace("_", "-"))
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(files))])
        ax.set_xticklabels(files, rotation=30, ha="right", fontsize=7)
        ax.set_ylim(0, 105)
        ax.set_ylabel("score (%)")
        ax.set_title("Per-file metrics")
        ax.legend(fontsize=8)
        fig.tight_layout()
        per_file_path = out_dir / "per_file_metrics.png"
        fig.savefig(per_file_path, dpi=120)
        plt.close(fig)
        written.append(per_file_path)
    return written


def render_table(evaluation: EvaluationReport, acrs_percent: bool = False) -> str:
    """Aligned text rendering of the evaluation report."""
    doc = evaluation.as_dict(acrs_percent=acrs_percent)

    def fmt(value):
        return "n/a" if value is None else f"{value:.2f}"

    lines = ["metric    value", "------    -----"]
    for name in _SUMMARY_METRICS:
        lines.append(f"{name.upper().replace('_', '-'):<9} {fmt(doc[name])}")
    lines.append("")
    header = f"{'file':<32} {'COV':>7} {'COV-P':>7} {'ACC':>7} {'ES':>7} {'blocks':>6}"
    lines.append(header)
    lines.append("-" * len(header))
    for name in sorted(evaluation.per_file):
        row = evaluation.per_file[name]
        lines.append(
            f"{name:<32} {fmt(row['cov']):>7} {fmt(row['cov_p']):>7} "
            f"{fmt(row['acc']):>7} {fmt(row['es']):>7} {row['blocks']:>6}"
        )
    return "\n".join(lines)
