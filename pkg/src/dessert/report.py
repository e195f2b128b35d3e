"""CSV and figure output for the CLI report paths.

Figures are rendered next to the delimited output with the same stem, so a
run that writes ``bench.csv`` also leaves ``bench_times.png`` behind.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_csv(path, header: list[str], rows) -> None:
    """Write rows with a header line; values are stringified by csv."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def figure_path(csv_path, suffix: str) -> Path:
    p = Path(csv_path)
    return p.with_name(f"{p.stem}_{suffix}.png")


def render_bench_figure(csv_path, ms, dessert_ms, brute_ms) -> Path:
    """Log-log query time vs set size for the sketch engine and brute force."""
    out = figure_path(csv_path, "times")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ms, brute_ms, marker="o", label="brute force")
    ax.plot(ms, dessert_ms, marker="s", label="dessert")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("vectors per set (m)")
    ax.set_ylabel("mean query time (ms)")
    ax.set_title("Query time vs set size")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def render_eval_figure(csv_path, latencies_ms, recall_by_k: dict[int, float], mrr10: float) -> Path:
    """Latency distribution and recall@k summary for an evaluation run."""
    out = figure_path(csv_path, "report")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))

    ax1.hist(latencies_ms, bins=min(30, max(5, len(latencies_ms) // 5)), color="#4878d0")
    for q, style in ((50, "--"), (95, "-."), (99, ":")):
        v = float(np.percentile(latencies_ms, q))
        ax1.axvline(v, linestyle=style, color="k", label=f"p{q} = {v:.2f} ms")
    ax1.set_xlabel("query latency (ms)")
    ax1.set_ylabel("queries")
    ax1.set_title("Latency distribution")
    ax1.legend(fontsize=8)

    ks = sorted(recall_by_k)
    ax2.bar([f"R@{k}" for k in ks] + ["MRR@10"], [recall_by_k[k] for k in ks] + [mrr10],
            color="#6acc64")
    ax2.set_ylim(0, 1.05)
    ax2.set_title("Retrieval quality")
    for i, v in enumerate([recall_by_k[k] for k in ks] + [mrr10]):
        ax2.text(i, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)

    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
