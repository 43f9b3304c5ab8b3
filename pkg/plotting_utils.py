# cosserat_dem/plotting_utils.py
import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)


def _save(fig, save_path: str | None):
    if save_path:
        os.makedirs(os.path.dirname(save_path) or ".", exist_ok=True)
        fig.savefig(save_path)
        logger.info(f"Plot saved to {save_path}")
    plt.close(fig)


def plot_profiles(y_cells: np.ndarray, computed: dict, y_ref: np.ndarray, reference: dict,
                  title: str = "Profiles", save_path: str | None = None):
    """
    Computed cell values against a reference curve, one panel per field.

    Args:
        computed / reference: field name -> values at y_cells / y_ref.
    """
    names = list(computed)
    fig, axes = plt.subplots(1, len(names), figsize=(6 * len(names), 5), squeeze=False)
    for ax, name in zip(axes[0], names):
        ax.plot(y_ref, reference[name], color="black", linewidth=1.5, label="reference")
        ax.scatter(y_cells, computed[name], s=12, color="tab:red", label="cells", zorder=5)
        ax.set_xlabel("x2")
        ax.set_ylabel(name)
        ax.grid(True, linestyle="--", alpha=0.7)
        ax.legend()
    fig.suptitle(title)
    fig.tight_layout()
    _save(fig, save_path)


def plot_timeseries(frame: pd.DataFrame, columns: list, title: str = "Time series",
                    ylabel: str = "value", save_path: str | None = None):
    fig, ax = plt.subplots(figsize=(12, 6))
    for col in columns:
        ax.plot(frame["t"], frame[col], label=col)
    ax.set_title(title)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.grid(True, linestyle="--", alpha=0.7)
    ax.legend()
    fig.tight_layout()
    _save(fig, save_path)


def plot_hoop_stress(angles: np.ndarray, hoop: np.ndarray, expected_max: float | None = None,
                     title: str = "Hoop stress along the hole", save_path: str | None = None):
    order = np.argsort(angles)
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(np.degrees(angles[order]), hoop[order], marker="o", markersize=3, label="hole cells")
    if expected_max is not None:
        ax.axhline(expected_max, color="black", linestyle="--", label="analytical max")
    ax.set_xlabel("angle from x1 [deg]")
    ax.set_ylabel("hoop stress / Sigma")
    ax.set_title(title)
    ax.grid(True, linestyle="--", alpha=0.7)
    ax.legend()
    fig.tight_layout()
    _save(fig, save_path)


def plot_sweep(table: pd.DataFrame, x: str, columns: list, title: str = "Sweep",
               logx: bool = False, save_path: str | None = None):
    fig, ax = plt.subplots(figsize=(8, 5))
    for col in columns:
        ax.plot(table[x], table[col], marker="o", label=col)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.grid(True, linestyle="--", alpha=0.7)
    ax.legend()
    fig.tight_layout()
    _save(fig, save_path)
