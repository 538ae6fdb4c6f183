"""Results tables (test performance, validation distributions) and SVG histograms."""
from __future__ import annotations

import csv
import io
import math

import numpy as np

TABLE_COLUMNS = ("HU", "Model", "Input Struct", "LL", "AUPRC", "AUROC")
DIST_METRICS = ("auroc", "auprc", "log_loss")
DIST_COLUMNS = ("HU", "Model", "Input Struct", "Metric", "n", "min", "q1", "median", "q3", "max")


def _f6(x):
    return "nan" if x is None or not math.isfinite(x) else f"{x:.6f}"


def table_rows(summary):
    """One row per configuration, in grid order; failed configs get empty metrics."""
    rows = []
    for entry in summary["configs"]:
        cfg = entry["config"]
        test = entry.get("test")
        struct = cfg["structure"] if cfg["aggregation"] is None else f"{cfg['structure']}-{cfg['aggregation']}"
        rows.append({
            "HU": cfg["hidden_units"],
            "Model": cfg["model"],
            "Input Struct": struct,
            "LL": _f6(test["log_loss"]) if test else "failed",
            "AUPRC": _f6(test["auprc"]) if test else "failed",
            "AUROC": _f6(test["auroc"]) if test else "failed",
        })
    return rows


def render_table_csv(summary):
    buf = io.StringIO()
    w = csv.DictWriter(buf, TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(table_rows(summary))
    return buf.getvalue()


def render_table_md(summary):
    rows = table_rows(summary)
    lines = ["| " + " | ".join(TABLE_COLUMNS) + " |",
             "|" + "|".join(["---:", ":---", ":---", "---:", "---:", "---:"]) + "|"]
    prev_hu = prev_model = None
    for r in rows:
        hu = str(r["HU"]) if r["HU"] != prev_hu else ""
        model = r["Model"] if (r["Model"], r["HU"]) != (prev_model, prev_hu) else ""
        prev_hu, prev_model = r["HU"], r["Model"]
        lines.append(f"| {hu} | {model} | {r['Input Struct']} | {r['LL']} | {r['AUPRC']} | {r['AUROC']} |")
    title = "Held-out test set performance (selected trial per configuration)"
    prev = summary.get("test_prevalence")
    foot = "HU = hidden units; LL = log loss; AUPRC = area under PR curve; AUROC = area under ROC curve"
    if prev is not None:
        foot += f". Test prevalence: {prev:.4f}"
    failed = summary.get("failed") or []
    if failed:
        foot += f". Failed (all trials diverged): {', '.join(failed)}"
    return f"## {title}\n\n" + "\n".join(lines) + f"\n\n{foot}\n"


def quantile_summary(values):
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return {"n": 0, "min": None, "q1": None, "median": None, "q3": None, "max": None}
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"n": int(v.size), "min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4])}


def distribution_rows(summary):
    rows = []
    for entry in summary["configs"]:
        cfg = entry["config"]
        struct = cfg["structure"] if cfg["aggregation"] is None else f"{cfg['structure']}-{cfg['aggregation']}"
        for metric in DIST_METRICS:
            q = entry["validation_distribution"][metric]
            row = {"HU": cfg["hidden_units"], "Model": cfg["model"], "Input Struct": struct,
                   "Metric": metric, "n": q["n"]}
            for k in ("min", "q1", "median", "q3", "max"):
                row[k] = _f6(q[k])
            rows.append(row)
    return rows


def render_distributions_csv(summary):
    buf = io.StringIO()
    w = csv.DictWriter(buf, DIST_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(distribution_rows(summary))
    return buf.getvalue()


def render_distributions_md(summary):
    lines = ["## Validation metric distributions over trials (final epoch)", "",
             "| " + " | ".join(DIST_COLUMNS) + " |",
             "|" + "|".join(["---"] * len(DIST_COLUMNS)) + "|"]
    for r in distribution_rows(summary):
        lines.append("| " + " | ".join(str(r[c]) for c in DIST_COLUMNS) + " |")
    return "\n".join(lines) + "\n"


def render_histogram_svg(values, title, bins=10, width=320, height=200):
    """Minimal standalone SVG histogram, no plotting library needed."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=np.float64)
    pad = 30
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width / 2:.1f}" y="16" font-size="12" text-anchor="middle">{title}</text>']
    if v.size:
        lo, hi = float(v.min()), float(v.max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
        bw = (width - 2 * pad) / bins
        top = max(int(counts.max()), 1)
        for i, cnt in enumerate(counts):
            h = (height - 2 * pad) * cnt / top
            parts.append(f'<rect x="{pad + i * bw:.2f}" y="{height - pad - h:.2f}" width="{bw - 1:.2f}" '
                         f'height="{h:.2f}" fill="#4a78b5"/>')
        parts.append(f'<text x="{pad}" y="{height - 10}" font-size="10">{lo:.4f}</text>')
        parts.append(f'<text x="{width - pad}" y="{height - 10}" font-size="10" text-anchor="end">{hi:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
