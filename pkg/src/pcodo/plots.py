"""Figure rendering for odometry runs (headless, files only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import Trajectory

_DPI = 120


def trajectory_figure(
    predicted: Trajectory,
    path,
    ground_truth: Trajectory | None = None,
    title: str = "Trajectory (top-down)",
) -> Path:
    """Top-down X/Z path plot, optionally overlaid on ground truth."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    p = predicted.positions()
    ax.plot(p[:, 0], p[:, 2], "-", color="tab:blue", label="estimated")
    ax.plot(p[0, 0], p[0, 2], "o", color="tab:blue", markersize=5)
    if ground_truth is not None:
        g = ground_truth.positions()
        ax.plot(g[:, 0], g[:, 2], "--", color="tab:red", label="ground truth")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("z [m]")
    ax.set_title(title)
    ax.axis("equal")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    return _save(fig, path)


def error_curve_figure(
    translation_errors: np.ndarray,
    rotation_errors_deg: np.ndarray,
    path,
    title: str = "Frame-to-frame error",
) -> Path:
    """Per-frame relative translation/rotation error curves."""
    frames = np.arange(1, len(translation_errors) + 1)
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.0), sharex=True)
    axes[0].plot(frames, translation_errors, color="tab:blue")
    axes[0].set_ylabel("translation [m]")
    axes[0].grid(True, alpha=0.3)
    axes[0].set_title(title)
    axes[1].plot(frames, rotation_errors_deg, color="tab:orange")
    axes[1].set_ylabel("rotation [deg]")
    axes[1].set_xlabel("frame")
    axes[1].grid(True, alpha=0.3)
    return _save(fig, path)


def ablation_figure(labels, values, path, title: str = "Ablation: final drift") -> Path:
    """Bar chart comparing one scalar metric across run variants."""
    fig, ax = plt.subplots(figsize=(0.9 + 1.1 * len(labels), 4.2))
    x = np.arange(len(labels))
    ax.bar(x, values, color="tab:blue", width=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("final drift (fraction of path)")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path)


def _save(fig, path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=_DPI)
    plt.close(fig)
    return out
