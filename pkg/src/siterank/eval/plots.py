"""Figures for sweep results and NMF training, written straight to files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from siterank.eval.sweep import SweepRow  # noqa: E402

_STYLE = {"figure.figsize": (6.0, 3.8), "axes.grid": True, "grid.alpha": 0.3,
          "axes.spines.top": False, "axes.spines.right": False, "font.size": 10}


def plot_sweep(series: Mapping[str, Sequence[SweepRow]], path: str | Path, xlabel: str,
               title: str = "", baseline: float | None = 0.5) -> Path:
    """Mean NDPM against the swept parameter, one line per series label.

    ``baseline`` draws the expected score of a random ordering.
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, rows in series.items():
            xs = [r.param for r in rows]
            ys = [r.mean_ndpm for r in rows]
            ax.plot(xs, ys, marker="o", label=label)
        if baseline is not None:
            ax.axhline(baseline, color="grey", linestyle="--", linewidth=1, label="random")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("mean NDPM (lower is better)")
        ax.set_ylim(bottom=0)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return Path(path)


def plot_objective(trace: Sequence[float], path: str | Path, title: str = "NMF training") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(range(len(trace)), trace)
        ax.set_xlabel("iteration")
        ax.set_ylabel(r"$\|A - WH\|_F$")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
    return Path(path)
