"""Delimited outputs and the matplotlib figures rendered next to them.

History CSVs carry one row per communication round; the wall_time_ms
column is left empty so files from repeated runs are byte-identical (the
measured timing stays available on the in-memory round records). Floats
are written with repr so values round-trip exactly.
"""

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HISTORY_COLUMNS = (
    "round", "stage", "algorithm", "n_participants",
    "train_loss", "valid_loss", "train_acc", "valid_acc", "wall_time_ms",
)

REPORT_COLUMNS = ("algorithm", "n_clients", "precision", "recall", "f1", "accuracy")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def write_history_csv(path, history, stage: int, algorithm: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for rec in history:
            writer.writerow(
                [
                    rec.round, stage, algorithm, len(rec.participants),
                    _fmt(rec.global_train_loss), _fmt(rec.global_valid_loss),
                    _fmt(rec.train_acc), _fmt(rec.valid_acc), "",
                ]
            )


def write_report_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.algorithm, row.n_clients,
                    _fmt(row.precision), _fmt(row.recall),
                    _fmt(row.f1), _fmt(row.accuracy),
                ]
            )


def write_pca_csv(path, client_ids, projections) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("client_id", "pc1", "pc2"))
        for cid, row in zip(client_ids, projections):
            writer.writerow([int(cid), _fmt(float(row[0])), _fmt(float(row[1]))])


def render_history_figure(path, history, stage: int, algorithm: str) -> None:
    rounds = [rec.round for rec in history]
    has_acc = any(rec.train_acc is not None for rec in history)
    n_axes = 2 if has_acc else 1
    fig, axes = plt.subplots(1, n_axes, figsize=(6 * n_axes, 4))
    axes = np.atleast_1d(axes)

    ax = axes[0]
    ax.plot(rounds, [rec.global_train_loss for rec in history], marker="o", label="train")
    valid = [rec.global_valid_loss for rec in history]
    if not all(math.isnan(v) for v in valid):
        ax.plot(rounds, valid, marker="s", label="valid")
    ax.set_xlabel("communication round")
    ax.set_ylabel("loss")
    ax.set_title(f"stage {stage} ({algorithm}) loss")
    ax.grid(True, alpha=0.3)
    ax.legend()

    if has_acc:
        ax = axes[1]
        ax.plot(rounds, [rec.train_acc for rec in history], marker="o", label="train")
        if any(rec.valid_acc is not None for rec in history):
            ax.plot(rounds, [rec.valid_acc for rec in history], marker="s", label="valid")
        ax.set_xlabel("communication round")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0.0, 1.05)
        ax.set_title(f"stage {stage} ({algorithm}) accuracy")
        ax.grid(True, alpha=0.3)
        ax.legend()

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_pca_figure(path, client_ids, projections, ratios) -> None:
    fig, ax = plt.subplots(figsize=(6, 5))
    for cid in sorted(set(int(c) for c in client_ids)):
        mask = np.asarray(client_ids) == cid
        pts = np.asarray(projections)[mask]
        ax.scatter(pts[:, 0], pts[:, 1], s=8, alpha=0.6, label=f"client {cid}")
    ax.set_xlabel(f"PC1 ({100 * ratios[0]:.1f}% var)")
    ax.set_ylabel(f"PC2 ({100 * ratios[1]:.1f}% var)" if len(ratios) > 1 else "PC2")
    ax.set_title("client dataset heterogeneity")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, markerscale=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_report_figure(path, rows) -> None:
    labels = [f"{r.algorithm}\n(D={r.n_clients})" for r in rows]
    metrics = ("precision", "recall", "f1", "accuracy")
    x = np.arange(len(rows))
    width = 0.2
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(rows)), 4))
    for k, name in enumerate(metrics):
        vals = [getattr(r, name) for r in rows]
        ax.bar(x + (k - 1.5) * width, vals, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("detection metrics")
    ax.grid(True, axis="y", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
