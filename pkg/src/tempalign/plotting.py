"""Figures written next to the delimited audit/split outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_heatmap(matrix, path, title=None):
    """Grayscale density of (normalized start, normalized end) cells."""
    matrix = np.asarray(matrix)
    res = matrix.shape[0]
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(matrix.T, origin="lower", cmap="Greys", extent=(0, 1, 0, 1), aspect="equal")
    ax.set_xlabel("normalized start")
    ax.set_ylabel("normalized end")
    if title:
        ax.set_title(title, fontsize=10)
    ax.set_xticks(np.linspace(0, 1, 6))
    ax.set_yticks(np.linspace(0, 1, 6))
    fig.colorbar(im, ax=ax, label=f"density ({res}x{res} cells)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_boundary_curves(profiles, path):
    """Start/end time distributions, one line per named dataset.

    ``profiles`` maps a label to the output of
    :func:`tempalign.metrics.boundary_profiles`.
    """
    fig, axes = plt.subplots(1, 2, figsize=(8, 3), sharey=True)
    for label, prof in profiles.items():
        centers = (prof["edges"][:-1] + prof["edges"][1:]) / 2
        axes[0].plot(centers, prof["start"], marker="o", ms=3, label=label)
        axes[1].plot(centers, prof["end"], marker="o", ms=3, label=label)
    axes[0].set_title("start time")
    axes[1].set_title("end time")
    for ax in axes:
        ax.set_xlabel("normalized time")
        ax.set_xlim(0, 1)
    axes[0].set_ylabel("fraction of moments")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
