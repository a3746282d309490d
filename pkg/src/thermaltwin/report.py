"""Figure rendering for CLI reports: every delimited output gets a
matplotlib figure written next to it."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def figure_bench(rows, path) -> None:
    """RPCA wall time versus window size; one line per pixel count."""
    by_n: dict = {}
    for n, w, _rep, seconds in rows:
        by_n.setdefault(int(n), {}).setdefault(int(w), []).append(float(seconds))
    fig, ax = plt.subplots(figsize=(6, 4))
    for n, per_w in sorted(by_n.items()):
        ws = sorted(per_w)
        means = [np.mean(per_w[w]) for w in ws]
        ax.plot(ws, means, marker="o", label=f"n={n}")
    ax.set_xlabel("window size (frames)")
    ax.set_ylabel("wall time (s)")
    ax.set_title("Robust PCA timing")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_rmse(rows, path) -> None:
    """Forecast error versus horizon: RMSE and worst-pixel absolute error."""
    horizons = [r["horizon_s"] for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(horizons, [r["rmse"] for r in rows], marker="o")
    ax1.set_xlabel("horizon (s)")
    ax1.set_ylabel("RMSE (degC)")
    ax1.set_title("Frame RMSE vs horizon")
    ax2.plot(horizons, [r["worst_pixel_abs"] for r in rows], marker="o",
             color="tab:red")
    ax2.set_xlabel("horizon (s)")
    ax2.set_ylabel("worst |error| (degC)")
    ax2.set_title("Worst pixel vs horizon")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_rpca(L: np.ndarray, S: np.ndarray, width: int, height: int,
                path, column: int = -1) -> None:
    """Low-rank and sparse components of one frame, side by side."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    im1 = ax1.imshow(L[:, column].reshape(height, width), cmap="viridis")
    ax1.set_title("low-rank component")
    fig.colorbar(im1, ax=ax1, shrink=0.8)
    im2 = ax2.imshow(S[:, column].reshape(height, width), cmap="magma")
    ax2.set_title("sparse component")
    fig.colorbar(im2, ax=ax2, shrink=0.8)
    for ax in (ax1, ax2):
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def figure_error_map(e_abs: np.ndarray, width: int, height: int, path,
                     title: str = "reconstruction |error| (degC)") -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(np.asarray(e_abs).reshape(height, width), cmap="magma")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
