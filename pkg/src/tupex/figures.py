"""Matplotlib renderings for the report paths."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .corpus import CorpusStats

_FIG_W = 6.4


def save_distribution_pie(stats: CorpusStats, path: str | Path) -> None:
    labels = [str(s.k) for s in stats.per_k]
    sizes = [s.sentences for s in stats.per_k]
    fig, ax = plt.subplots(figsize=(_FIG_W, _FIG_W * 0.75))
    ax.pie(sizes, labels=labels, autopct="%1.2f%%", startangle=90, counterclock=False)
    ax.set_title("Sentences by tuple count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_f1_bars(rows: list[dict], path: str | Path) -> None:
    """Grouped bars: tuple-level F1 per dataset, one group color per config."""
    datasets = list(dict.fromkeys(r["dataset"] for r in rows))
    configs = list(dict.fromkeys(r["config"] for r in rows))
    by_key = {(r["dataset"], r["config"]): r["tuple"]["f1"] for r in rows}
    width = 0.8 / max(1, len(configs))
    fig, ax = plt.subplots(figsize=(max(_FIG_W, 1.6 * len(datasets)), 4.2))
    for ci, config in enumerate(configs):
        xs = [di + ci * width for di in range(len(datasets))]
        ys = [by_key.get((d, config), 0.0) for d in datasets]
        ax.bar(xs, ys, width=width, label=config)
    ax.set_xticks([di + width * (len(configs) - 1) / 2 for di in range(len(datasets))])
    ax.set_xticklabels(datasets)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("tuple F1")
    if len(configs) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
