"""Matplotlib renderings written next to the delimited report files."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["metrics_figure", "trace_figure", "grid_figure"]


def _save_atomic(fig, path):
    tmp = f"{path}.tmp.{os.getpid()}"
    fig.savefig(tmp, dpi=120, format="png")
    plt.close(fig)
    os.replace(tmp, path)


def metrics_figure(report, path):
    """Per-node bar panels for the four metrics, pooled value as a dashed line."""
    nodes = list(report.per_node.keys())
    x = np.arange(len(nodes))
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, key in zip(axes.ravel(), ("r2", "corr", "rmse", "mae")):
        vals = [report.per_node[n][key] for n in nodes]
        ax.bar(x, vals, color="#46789c")
        pooled = report.pooled[key]
        if np.isfinite(pooled):
            ax.axhline(pooled, color="#b24545", linestyle="--", linewidth=1, label="pooled")
            ax.legend(fontsize=8)
        ax.set_title(key.upper() if key != "corr" else "Corr")
        ax.set_xticks(x)
        ax.set_xticklabels(nodes, rotation=30, ha="right", fontsize=8)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle("One-step prediction metrics by node")
    fig.tight_layout()
    _save_atomic(fig, path)


def trace_figure(result, path, max_vars=6):
    """Actual vs. predicted traces for the first few output variables."""
    pairs = []
    for i, node in enumerate(result.node_names):
        for k in range(result.outputs_actual[i].shape[1]):
            pairs.append((i, k, f"{node}[{k + 1}]"))
    pairs = pairs[:max_vars]
    fig, axes = plt.subplots(len(pairs), 1, figsize=(9, 1.8 * len(pairs)), sharex=True, squeeze=False)
    for ax, (i, k, label) in zip(axes.ravel(), pairs):
        a = result.outputs_actual[i][:, k]
        p = result.outputs_predicted[i][:, k]
        ax.plot(a, color="#333333", linewidth=0.8, label="actual")
        ax.plot(p, color="#b24545", linewidth=0.8, label="predicted")
        ax.set_ylabel(label, fontsize=8)
        ax.tick_params(labelsize=8)
    axes.ravel()[0].legend(fontsize=8, ncol=2)
    axes.ravel()[-1].set_xlabel("evaluation sample")
    fig.suptitle("One-step predictions")
    fig.tight_layout()
    _save_atomic(fig, path)


def grid_figure(result, path):
    """Validation metric over the grid: heatmap for a shared 2-D grid, else bars."""
    cells = [c for c in result.cells if c.error is None]
    if not cells:
        return False
    metric = result.metric
    l_vals = sorted({c.n_dlvs for c in cells})
    s_vals = sorted({c.ar_orders for c in cells})
    shared = all(len(set(c.n_dlvs)) == 1 for c in cells) and all(len(set(c.ar_orders)) == 1 for c in cells)
    if shared and len(l_vals) > 1 and len(s_vals) > 1:
        grid = np.full((len(l_vals), len(s_vals)), np.nan)
        for c in cells:
            grid[l_vals.index(c.n_dlvs), s_vals.index(c.ar_orders)] = c.metrics[metric]
        fig, ax = plt.subplots(figsize=(1.2 * len(s_vals) + 2, 0.8 * len(l_vals) + 2))
        im = ax.imshow(grid, aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(s_vals)))
        ax.set_xticklabels([v[0] for v in s_vals])
        ax.set_yticks(range(len(l_vals)))
        ax.set_yticklabels([v[0] for v in l_vals])
        ax.set_xlabel("order s")
        ax.set_ylabel("latent count l")
        fig.colorbar(im, ax=ax, label=f"validation {metric}")
        ax.set_title("Grid search")
    else:
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot([c.index for c in cells], [c.metrics[metric] for c in cells], marker="o", linewidth=0.8)
        ax.axvline(result.best_index, color="#b24545", linestyle="--", linewidth=1, label="selected")
        ax.set_xlabel("cell index")
        ax.set_ylabel(f"validation {metric}")
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
        ax.set_title("Grid search")
    fig.tight_layout()
    _save_atomic(fig, path)
    return True
