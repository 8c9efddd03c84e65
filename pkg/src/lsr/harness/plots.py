"""Report figures written next to the JSON outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "figure.dpi": 110,
}

KIND_COLORS = {"mention": "tab:blue", "entity": "tab:red", "mdp": "tab:green", "token": "tab:gray"}


def figure_path(out, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(f"{p.stem}{suffix}.png")


def plot_structure(dump: dict, out) -> list[Path]:
    """One heatmap per refinement block; rows are parents, columns children."""
    paths = []
    with plt.rc_context(STYLE):
        for b, block in enumerate(dump["blocks"], start=1):
            A = np.asarray(block["A"])
            n = len(A)
            labels = [f"{nd['kind'][0].upper()}:{nd['text']}" for nd in block["nodes"]]
            size = max(4.0, 0.28 * n + 2)
            fig, ax = plt.subplots(figsize=(size, size))
            im = ax.imshow(A, cmap="viridis", vmin=0.0, vmax=max(float(A.max()), 1e-12))
            ax.set_xticks(range(n))
            ax.set_yticks(range(n))
            ax.set_xticklabels(labels, rotation=90)
            ax.set_yticklabels(labels)
            for tick, nd in zip(ax.get_xticklabels(), block["nodes"]):
                tick.set_color(KIND_COLORS.get(nd["kind"], "black"))
            for tick, nd in zip(ax.get_yticklabels(), block["nodes"]):
                tick.set_color(KIND_COLORS.get(nd["kind"], "black"))
            ax.set_xlabel("child")
            ax.set_ylabel("parent")
            ax.set_title(f"{dump.get('doc_id', '')} refinement {b}")
            fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
            fig.tight_layout()
            path = figure_path(out, f"_block{b}")
            fig.savefig(path)
            plt.close(fig)
            paths.append(path)
    return paths


def plot_history(history: list[dict], out) -> Path:
    epochs = [h["epoch"] for h in history]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
        for key, label in (("dev_f1", "F1"), ("dev_intra_f1", "Intra-F1"), ("dev_inter_f1", "Inter-F1"),
                           ("dev_ign_f1", "Ign F1")):
            if any(key in h for h in history):
                ax1.plot(epochs, [h.get(key, np.nan) for h in history], marker="o", ms=3, label=label)
        ax1.set_xlabel("epoch")
        ax1.set_ylabel("dev score")
        ax1.legend(frameon=False)
        losses = [(h["epoch"], h["loss"]) for h in history if h.get("loss") is not None]
        if losses:
            ax2.plot(*zip(*losses), color="k", marker="o", ms=3)
        ax2.set_xlabel("epoch")
        ax2.set_ylabel("train loss")
        fig.tight_layout()
        path = figure_path(out, "_history")
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_metrics(report: dict, out) -> Path:
    keys = [("f1", "F1"), ("ign_f1", "Ign F1"), ("intra_f1", "Intra-F1"), ("inter_f1", "Inter-F1")]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3))
        vals = [100 * report[k] for k, _ in keys]
        bars = ax.bar([lab for _, lab in keys], vals, color=["0.3", "0.55", "tab:blue", "tab:red"])
        for bar, v in zip(bars, vals):
            ax.text(bar.get_x() + bar.get_width() / 2, v + 1, f"{v:.1f}", ha="center", fontsize=7)
        ax.set_ylim(0, 105)
        ax.set_ylabel("score (%)")
        fig.tight_layout()
        path = figure_path(out, "")
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_comparison(rows: list[dict], out, key: str = "inter_f1") -> Path:
    """Bars per labelled run, e.g. induced vs frozen structure or N = 1, 2, 3."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        labels = [r["label"] for r in rows]
        vals = [100 * r[key] for r in rows]
        ax.bar(labels, vals, color="tab:blue")
        ax.set_ylabel(key.replace("_", "-"))
        fig.tight_layout()
        path = figure_path(out, f"_{key}")
        fig.savefig(path)
        plt.close(fig)
    return path
