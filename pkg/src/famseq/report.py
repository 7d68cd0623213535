"""Report emission: metrics JSON, confusion/attention CSV + SVG heatmaps.

All outputs are byte-deterministic functions of their inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .metrics import AttentionSummary, MetricsReport, RunAggregate
from .schema import CANONICAL_FAMILIES

CELL = 56
MARGIN_LEFT = 120
MARGIN_TOP = 40


class ReportError(ValueError):
    pass


def _heat_color(v: float) -> str:
    """White -> blue ramp for a value in [0, 1]."""
    v = min(max(float(v), 0.0), 1.0)
    r = round(255 * (1 - v) + 33 * v)
    g = round(255 * (1 - v) + 102 * v)
    b = round(255 * (1 - v) + 172 * v)
    return f"rgb({r},{g},{b})"


def _svg_heatmap(values, annotations, row_labels, col_labels, title) -> str:
    k_rows, k_cols = values.shape
    width = MARGIN_LEFT + CELL * k_cols + 20
    height = MARGIN_TOP + CELL * k_rows + 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{MARGIN_LEFT}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for i in range(k_rows):
        y = MARGIN_TOP + i * CELL
        parts.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{y + CELL // 2 + 4}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{row_labels[i]}</text>'
        )
        for j in range(k_cols):
            x = MARGIN_LEFT + j * CELL
            v = values[i, j]
            fill = _heat_color(0.0 if np.isnan(v) else v)
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{fill}" stroke="#888"/>'
            )
            label = annotations[i][j]
            color = "#fff" if (not np.isnan(v) and v > 0.6) else "#000"
            parts.append(
                f'<text x="{x + CELL // 2}" y="{y + CELL // 2 + 4}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10" fill="{color}">{label}</text>'
            )
    for j in range(k_cols):
        x = MARGIN_LEFT + j * CELL + CELL // 2
        y = MARGIN_TOP + k_rows * CELL + 12
        parts.append(
            f'<text x="{x}" y="{y}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="9" transform="rotate(45 {x} {y})">{col_labels[j]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def confusion_csv(report: MetricsReport, class_names) -> str:
    lines = ["true\\pred," + ",".join(class_names)]
    for i, name in enumerate(class_names):
        lines.append(name + "," + ",".join(str(int(v)) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"


def confusion_svg(report: MetricsReport, class_names) -> str:
    conf = report.confusion.astype(np.float64)
    row_sums = conf.sum(axis=1, keepdims=True)
    norm = np.divide(conf, row_sums, out=np.zeros_like(conf), where=row_sums > 0)
    ann = [[str(int(v)) for v in row] for row in report.confusion]
    return _svg_heatmap(norm, ann, class_names, class_names,
                        "Confusion matrix (rows = true, row-normalized colors)")


def attention_csv(summary: AttentionSummary) -> str:
    lines = ["class,count," + ",".join(CANONICAL_FAMILIES)]
    for c, name in enumerate(summary.class_names):
        if summary.present(c):
            vals = ",".join(repr(float(v)) for v in summary.mean_weights[c])
        else:
            vals = ",".join([""] * len(CANONICAL_FAMILIES))
        lines.append(f"{name},{summary.counts[c]},{vals}")
    return "\n".join(lines) + "\n"


def attention_svg(summary: AttentionSummary) -> str:
    vals = summary.mean_weights
    # scale colors to the max weight so structure is visible
    vmax = np.nanmax(vals) if np.isfinite(vals).any() else 1.0
    scaled = vals / vmax if vmax > 0 else vals
    ann = [
        ["" if np.isnan(v) else f"{v:.3f}" for v in row]
        for row in vals
    ]
    return _svg_heatmap(scaled, ann, summary.class_names, CANONICAL_FAMILIES,
                        "Mean attention weight per feature family and class")


def render_reports(aggregate: RunAggregate, class_names, out_dir,
                   attention_summary: AttentionSummary | None = None,
                   extra: dict | None = None) -> list[str]:
    """Emit metrics.json, confusion.csv/svg and (if given) attention.csv/svg."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    payload = aggregate.to_json()
    payload["class_names"] = list(class_names)
    if extra:
        payload.update(extra)
    (out / "metrics.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n")
    written.append("metrics.json")

    # confusion summed over runs
    conf = sum(r.confusion for r in aggregate.reports)
    pooled = MetricsReport(
        accuracy=aggregate.mean["accuracy"], macro_f1=aggregate.mean["macro_f1"],
        balanced_accuracy=aggregate.mean["balanced_accuracy"],
        precision=np.zeros(len(class_names)), recall=np.zeros(len(class_names)),
        f1=np.zeros(len(class_names)), support=conf.sum(axis=1), confusion=conf,
    )
    (out / "confusion.csv").write_text(confusion_csv(pooled, class_names))
    (out / "confusion.svg").write_text(confusion_svg(pooled, class_names))
    written += ["confusion.csv", "confusion.svg"]

    if attention_summary is not None:
        (out / "attention.csv").write_text(attention_csv(attention_summary))
        (out / "attention.svg").write_text(attention_svg(attention_summary))
        written += ["attention.csv", "attention.svg"]
    return written


def comparison_csv(rows) -> str:
    lines = ["model,macro_f1,accuracy"]
    for r in rows:
        lines.append(f"{r['model']},{r['macro_f1']},{r['accuracy']}")
    return "\n".join(lines) + "\n"
