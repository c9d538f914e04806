"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport


def plot_training_curve(metrics_path, out_png) -> None:
    """Loss and learning-rate trajectories from a metrics JSONL log."""
    steps, losses, lr_steps, lrs, dev_steps, dev_scores = [], [], [], [], [], []
    for line in Path(metrics_path).read_text().splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if "loss" in row:
            steps.append(row["step"])
            losses.append(row["loss"])
            lr_steps.append(row["step"])
            lrs.append(row["lr"])
        if "dev_rouge1" in row:
            dev_steps.append(row["step"])
            dev_scores.append(row["dev_rouge1"])

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, losses, color="tab:blue", label="train loss")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax2 = ax.twinx()
    ax2.plot(lr_steps, lrs, color="tab:orange", alpha=0.6, label="lr")
    ax2.set_ylabel("learning rate")
    if dev_steps:
        ax.plot(dev_steps, [s / 25 for s in dev_scores], color="tab:green",
                marker="o", linestyle="--", label="dev ROUGE-1 / 25")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def plot_sweep(csv_path, out_png, param_name: str) -> None:
    """Metric-vs-hyperparameter curves from a sweep CSV."""
    values, r1, r2, rl = [], [], [], []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            values.append(float(row["value"]))
            r1.append(float(row["rouge1"]))
            r2.append(float(row["rouge2"]))
            rl.append(float(row["rougeL"]))
    order = sorted(range(len(values)), key=lambda i: values[i])
    values = [values[i] for i in order]
    fig, ax = plt.subplots(figsize=(6, 4))
    for series, label, marker in ((r1, "ROUGE-1", "o"), (r2, "ROUGE-2", "s"), (rl, "ROUGE-L", "^")):
        ax.plot(values, [series[i] for i in order], marker=marker, label=label)
    ax.set_xlabel(param_name)
    ax.set_ylabel("F1 (%)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def plot_report(report: EvalReport, out_png) -> None:
    """Bar chart of the headline scores in an evaluation report."""
    labels = ["ROUGE-1", "ROUGE-2", "ROUGE-L"]
    values = [report.rouge1_f1, report.rouge2_f1, report.rougeL_f1]
    for k in sorted(report.f1_at_k):
        labels.append(f"F1@{k} x100")
        values.append(100.0 * report.f1_at_k[k])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, values, color="tab:blue")
    ax.set_ylabel("score")
    ax.set_ylim(0, 105)
    for i, v in enumerate(values):
        ax.text(i, v + 1, f"{v:.1f}", ha="center", fontsize=9)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
