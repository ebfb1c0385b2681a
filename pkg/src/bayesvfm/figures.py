"""Render report curves to PNG files alongside the CSV output.

All figures are written through the Agg backend with fixed DPI and
stripped metadata so that identical inputs produce byte-identical files.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KWARGS = {"dpi": 120, "metadata": {"Software": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_cumulative_figure(path, thresholds, curves: dict) -> None:
    """Cumulative performance: fraction of test points within each
    percent-deviation threshold, one line per labeled group."""
    fig, ax = plt.subplots(figsize=(6, 4.2))
    for label, fractions in curves.items():
        ax.plot(thresholds, 100.0 * np.asarray(fractions), label=label)
    ax.set_xlabel("Deviation threshold (%)")
    ax.set_ylabel("Test points within threshold (%)")
    ax.set_ylim(0, 102)
    ax.grid(alpha=0.3)
    if len(curves) > 1:
        ax.legend()
    _finish(fig, path)


def save_calibration_figure(path, levels, median, p25=None, p75=None,
                            title: str | None = None) -> None:
    """Calibration curve with the cross-well quartile band and the
    perfect-calibration diagonal."""
    levels = 100.0 * np.asarray(levels, dtype=float)
    fig, ax = plt.subplots(figsize=(4.8, 4.5))
    ax.plot([0, 100], [0, 100], color="gray", linewidth=1, label="perfect")
    if p25 is not None and p75 is not None:
        ax.fill_between(levels, 100.0 * np.asarray(p25), 100.0 * np.asarray(p75),
                        alpha=0.25, label="P25-P75 across wells")
    ax.plot(levels, 100.0 * np.asarray(median), linestyle="--", marker="o",
            markersize=3, label="median")
    ax.set_xlabel("Nominal interval (%)")
    ax.set_ylabel("Observed frequency (%)")
    ax.set_xlim(0, 100)
    ax.set_ylim(0, 102)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left")
    _finish(fig, path)


def save_size_study_figure(path, sizes, median, p25, p75) -> None:
    """Relative test error against training-set size: median and 50%
    interval across trials."""
    sizes = np.asarray(sizes)
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.fill_between(sizes, p25, p75, alpha=0.25, label="50% interval")
    ax.plot(sizes, median, marker="o", markersize=4, label="median")
    ax.axhline(1.0, color="gray", linewidth=1)
    ax.set_xlabel("Training set size")
    ax.set_ylabel("Relative test error")
    ax.grid(alpha=0.3)
    ax.legend()
    _finish(fig, path)
