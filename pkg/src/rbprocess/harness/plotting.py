"""Static line charts for the harness outputs (matplotlib, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# keep SVG output stable between reruns
matplotlib.rcParams["svg.hashsalt"] = "rbprocess"


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def line_chart(path, series: dict, xlabel: str, ylabel: str, title: str = "",
               logx: bool = False, logy: bool = False) -> None:
    """One line per ``label -> (x, y)`` entry."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (x, y) in series.items():
        ax.plot(x, y, label=label, linewidth=1.0)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if series:
        ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    _save(fig, path)


def lag_chart(path, lags, empirical: dict, predicted: dict, title: str = "") -> None:
    """Empirical lag series with error bars against predicted curves."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (values, se) in empirical.items():
        ax.errorbar(lags, values, yerr=2 * np.asarray(se), fmt="o", markersize=3, capsize=2, label=label)
    for label, values in predicted.items():
        ax.plot(lags, values, "-", linewidth=1.2, label=label)
    ax.set_xlabel("lag")
    ax.set_ylabel("autocovariance")
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    ax.grid(alpha=0.3)
    _save(fig, path)
