"""Render an evaluation report to a directory of files.

The output is meant for both eyes and scripts: ``metrics.csv`` and
``per_mask_count.csv`` hold the numbers in delimited form, ``report.json``
the full structure, and the PNG figures next to them show the accuracy and
similarity curves plus the per-count breakdown.  A training history, when
given, adds a loss curve.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import EvalReport

__all__ = ["write_report"]


def _metrics_csv(path: Path, report: EvalReport):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "accuracy", "similarity"])
        for n in report.levels:
            writer.writerow([n, f"{report.accuracy[n]:.6f}", f"{report.similarity[n]:.6f}"])


def _per_mask_csv(path: Path, report: EvalReport):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["masked_slots", "events"]
                        + [f"accuracy@{n}" for n in report.levels]
                        + [f"similarity@{n}" for n in report.levels])
        for m, row in sorted(report.per_mask_count.items()):
            writer.writerow(
                [m, row["events"]]
                + [f"{row['accuracy'][n]:.6f}" for n in report.levels]
                + [f"{row['similarity'][n]:.6f}" for n in report.levels]
            )


def _curve(path: Path, report: EvalReport, table: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    levels = list(report.levels)
    ax.plot(levels, [getattr(report, table)[n] for n in levels], marker="o")
    for m, row in sorted(report.per_mask_count.items()):
        ax.plot(levels, [row[table][n] for n in levels], alpha=0.35, label=f"{m} hidden")
    ax.set_xlabel("candidates considered")
    ax.set_ylabel(ylabel)
    ax.set_xticks(levels)
    ax.legend(fontsize="x-small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _mask_bars(path: Path, report: EvalReport):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    counts = sorted(report.per_mask_count)
    ax.bar([str(m) for m in counts],
           [report.per_mask_count[m]["accuracy"][1] for m in counts])
    ax.set_xlabel("hidden slots per sequence")
    ax.set_ylabel("top-1 accuracy")
    ax.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _loss_curve(path: Path, history: list[dict]):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    epochs = [h["epoch"] for h in history]
    ax.plot(epochs, [h["train_loss"] for h in history], label="train")
    if any("val_loss" in h for h in history):
        ax.plot(epochs, [h.get("val_loss") for h in history], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross entropy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(directory, report: EvalReport, history: list[dict] | None = None) -> list[Path]:
    """Write CSVs, JSON, and figures; returns the created paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    created = []

    def out(name):
        created.append(directory / name)
        return created[-1]

    _metrics_csv(out("metrics.csv"), report)
    _per_mask_csv(out("per_mask_count.csv"), report)
    with out("report.json").open("w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    _curve(out("accuracy.png"), report, "accuracy", "accuracy in top N")
    _curve(out("similarity.png"), report, "similarity", "nearest candidate distance")
    _mask_bars(out("mask_counts.png"), report)
    if history:
        _loss_curve(out("loss.png"), history)
    return created
