"""Classification tables and SVG heatmaps from evaluation CSVs."""
from __future__ import annotations

import csv
import math
from html import escape
from pathlib import Path

from .evaluation import BIAS_ACCEPTABLE, RESOLUTION_ACCEPTABLE, read_evaluation_csv

BIAS_COLORS = {"underestimation": "#d7301f", "acceptable": "#d9d9d9", "overestimation": "#2b8cbe", "missing": "#ffffff"}
RES_COLORS = {"acceptable": "#fed976", "poor": "#41b6c4", "negative": "#6a51a3", "missing": "#ffffff"}

REPORT_COLUMNS = ("design_id", "measure", "level", "bias", "bias_class", "resolution", "resolution_class")


def classify_bias(value: float | None, threshold: float = BIAS_ACCEPTABLE) -> str:
    if value is None or math.isnan(value):
        return "missing"
    if value < -threshold:
        return "underestimation"
    if value > threshold:
        return "overestimation"
    return "acceptable"


def classify_resolution(value: float | None, threshold: float = RESOLUTION_ACCEPTABLE) -> str:
    if value is None or math.isnan(value):
        return "missing"
    if value >= threshold:
        return "acceptable"
    if value >= 0:
        return "poor"
    return "negative"


def _num(text: str) -> float:
    return float(text) if text not in ("", None) else math.nan


def report(
    evaluation_csv: str | Path,
    out_dir: str | Path,
    bias_threshold: float = BIAS_ACCEPTABLE,
    resolution_threshold: float = RESOLUTION_ACCEPTABLE,
) -> list[dict[str, str]]:
    """Write ``report.csv`` and ``heatmap.svg`` next to each other; returns the report rows."""
    rows = read_evaluation_csv(evaluation_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = []
    for r in rows:
        b, res = _num(r["bias"]), _num(r["resolution"])
        table.append(
            {
                "design_id": r["design_id"],
                "measure": r["measure"],
                "level": r["level"],
                "bias": r["bias"],
                "bias_class": classify_bias(b, bias_threshold) if r["bias"] != "" else "",
                "resolution": r["resolution"],
                "resolution_class": classify_resolution(res, resolution_threshold),
            }
        )
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(table)
    (out / "heatmap.svg").write_text(heatmap_svg(table), encoding="utf-8")
    return table


def heatmap_svg(table: list[dict[str, str]], cell: int = 22) -> str:
    """Two tile grids (bias, resolution): rows are design cells, columns measure@level."""
    designs = list(dict.fromkeys(r["design_id"] for r in table))
    bias_cols = list(dict.fromkeys(f"{r['measure']}@{r['level']}" for r in table if r["bias_class"]))
    res_cols = list(dict.fromkeys(f"{r['measure']}@{r['level']}" for r in table))
    lookup = {(r["design_id"], f"{r['measure']}@{r['level']}"): r for r in table}
    label_w, head_h = 170, 150
    panels = [("bias", bias_cols, "bias_class", BIAS_COLORS), ("resolution", res_cols, "resolution_class", RES_COLORS)]
    width = label_w + sum(len(c) * cell + 40 for _, c, _, _ in panels) + 20
    height = head_h + max(1, len(designs)) * cell + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">'
    ]
    for i, d in enumerate(designs):
        y = head_h + i * cell + cell * 0.7
        parts.append(f'<text x="{label_w - 6}" y="{y:.1f}" text-anchor="end">{escape(d)}</text>')
    x0 = label_w
    for title, cols, key, colors in panels:
        parts.append(f'<text x="{x0}" y="14" font-size="12" font-weight="bold">{title}</text>')
        for j, c in enumerate(cols):
            x = x0 + j * cell + cell / 2
            parts.append(
                f'<text x="{x:.1f}" y="{head_h - 6}" transform="rotate(-60 {x:.1f} {head_h - 6})">{escape(c)}</text>'
            )
            for i, d in enumerate(designs):
                r = lookup.get((d, c))
                cls = r[key] if r and r[key] else "missing"
                value = r[title] if r else ""
                parts.append(
                    f'<rect x="{x0 + j * cell}" y="{head_h + i * cell}" width="{cell - 1}" height="{cell - 1}" '
                    f'fill="{colors[cls]}" stroke="#999" stroke-width="0.5">'
                    f"<title>{escape(d)} {escape(c)}: {escape(value)} ({cls})</title></rect>"
                )
        x0 += len(cols) * cell + 40
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
