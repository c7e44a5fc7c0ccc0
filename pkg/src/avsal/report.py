"""Evaluation reports: JSON + CSV + aligned text table + figures.

Column order follows the usual leaderboard convention: AUC-J, SIM,
s-AUC, CC, NSS.  Rows are one per domain (sorted) plus a frame-weighted
"average" row.  Figures are rendered with the Agg backend so reporting
works on headless machines.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import COLUMNS, EvalResult  # noqa: E402

HEADERS = {"auc_judd": "AUC-J", "sim": "SIM", "s_auc": "s-AUC",
           "cc": "CC", "nss": "NSS"}


def report_rows(result: EvalResult) -> list:
    """[(label, {metric: value})]: sorted domains, then the average row."""
    rows = [(dom, result.per_domain[dom]) for dom in sorted(result.per_domain)]
    rows.append(("average", result.overall))
    return rows


def write_report_json(result: EvalResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(result: EvalResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row"] + [HEADERS[m] for m in COLUMNS])
        for label, vals in report_rows(result):
            writer.writerow([label] + [f"{vals[m]:.6f}" for m in COLUMNS])


def format_report_table(result: EvalResult) -> str:
    labels = [label for label, _ in report_rows(result)]
    name_w = max(len(s) for s in labels + ["row"])
    cols = [HEADERS[m] for m in COLUMNS]
    head = "row".ljust(name_w) + "".join(f"{c:>10}" for c in cols)
    lines = [head, "-" * len(head)]
    for label, vals in report_rows(result):
        lines.append(label.ljust(name_w) +
                     "".join(f"{vals[m]:>10.4f}" for m in COLUMNS))
    lines.append(f"frames scored: {result.frames_scored}"
                 f"  unfixated: {result.frames_unfixated}"
                 f"  missing: {len(result.frames_missing)}")
    return "\n".join(lines) + "\n"


def plot_metrics_by_domain(result: EvalResult, path) -> None:
    rows = report_rows(result)
    fig, ax = plt.subplots(figsize=(7, 4))
    n_rows = len(rows)
    width = 0.8 / n_rows
    xs = range(len(COLUMNS))
    for i, (label, vals) in enumerate(rows):
        offs = [x + (i - (n_rows - 1) / 2) * width for x in xs]
        ax.bar(offs, [vals[m] for m in COLUMNS], width=width, label=label)
    ax.set_xticks(list(xs))
    ax.set_xticklabels([HEADERS[m] for m in COLUMNS])
    ax.set_ylabel("score")
    ax.set_title("evaluation scores by domain")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_curve(losses, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(losses)), losses, lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("training loss")
    ax.set_title("loss curve")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_reports(result: EvalResult, out_dir) -> dict:
    """Write the full report set; returns {kind: path}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "csv": out_dir / "report.csv",
        "txt": out_dir / "report.txt",
        "figure": out_dir / "metrics_by_domain.png",
    }
    write_report_json(result, paths["json"])
    write_report_csv(result, paths["csv"])
    paths["txt"].write_text(format_report_table(result))
    plot_metrics_by_domain(result, paths["figure"])
    return paths
