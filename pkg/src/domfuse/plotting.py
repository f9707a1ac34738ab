"""Report figures.

Figures are built on :class:`matplotlib.figure.Figure` directly so that no
GUI backend or pyplot global state is involved; callers get files on disk.
"""

from __future__ import annotations

import functools
from pathlib import Path
from typing import Sequence

import matplotlib
from matplotlib.figure import Figure

from .fusion import FusedPrediction
from .metrics import ReportRow, coverage_curve

STYLE = {
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

# metadata without a timestamp keeps PNG bytes stable between runs
PNG_METADATA = {"Software": None}


def styled(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with matplotlib.rc_context(STYLE):
            return func(*args, **kwargs)

    return wrapper


def _new(width: float = 4.8, height: float = 3.2) -> Figure:
    fig = Figure(figsize=(width, height), dpi=120, layout="constrained")
    fig.add_subplot()
    return fig


def _save(fig: Figure, path: Path) -> Path:
    fig.savefig(path, format="png", metadata=PNG_METADATA)
    return path


@styled
def coverage_figure(
    runs: dict[str, tuple[Sequence[FusedPrediction], Sequence[FusedPrediction]]],
    path: Path,
    threshold: float,
    steps: int = 51,
) -> Path:
    """Coverage against the abstention threshold, vanilla dashed and fused solid."""
    fig = _new()
    ax = fig.axes[0]
    thresholds = [0.5 + 0.5 * i / (steps - 1) for i in range(steps)]
    for i, (name, (vanilla, fused)) in enumerate(runs.items()):
        color = f"C{i % 10}"
        ax.plot(thresholds, coverage_curve(vanilla, thresholds), "--", color=color, lw=1.2, label=f"{name} vanilla")
        ax.plot(thresholds, coverage_curve(fused, thresholds), "-", color=color, lw=1.5, label=f"{name} fused")
    ax.axvline(threshold, color="0.5", lw=0.8, ls=":")
    ax.set_xlabel("abstention threshold on max(pos, neg)")
    ax.set_ylabel("coverage")
    ax.set_xlim(0.5, 1.0)
    ax.set_ylim(0.0, 1.02)
    ax.legend(frameon=False)
    return _save(fig, path)


@styled
def score_shift_figure(vanilla: Sequence[FusedPrediction], fused: Sequence[FusedPrediction], path: Path) -> Path:
    """Raw against fused displaced-people probability; person-free images in grey."""
    fig = _new(3.6, 3.4)
    ax = fig.axes[0]
    adjusted = [(v.pos, f.pos) for v, f in zip(vanilla, fused) if not f.fallback]
    plain = [(v.pos, f.pos) for v, f in zip(vanilla, fused) if f.fallback]
    if plain:
        ax.scatter(*zip(*plain), s=6, color="0.6", label="no eligible person")
    if adjusted:
        ax.scatter(*zip(*adjusted), s=6, color="C3", label="dominance adjusted")
    ax.plot([0, 1], [0, 1], color="0.3", lw=0.8)
    ax.axhline(0.5, color="0.8", lw=0.6)
    ax.axvline(0.5, color="0.8", lw=0.6)
    ax.set_xlabel("raw pos")
    ax.set_ylabel("fused pos")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_aspect("equal")
    ax.legend(frameon=False, loc="upper left")
    return _save(fig, path)


@styled
def summary_figure(rows: Sequence[ReportRow], path: Path) -> Path:
    """Grouped bars of accuracy and coverage per backbone."""
    fig = _new(max(3.6, 1.4 * len(rows) + 1.6), 3.2)
    ax = fig.axes[0]
    series = [
        ("vanilla acc.", [r.vanilla_accuracy for r in rows], "C0", None),
        ("fused acc.", [r.fused_accuracy for r in rows], "C0", "//"),
        ("vanilla cov.", [r.vanilla_coverage for r in rows], "C1", None),
        ("fused cov.", [r.fused_coverage for r in rows], "C1", "//"),
    ]
    width = 0.2
    for j, (label, values, color, hatch) in enumerate(series):
        xs = [i + (j - 1.5) * width for i in range(len(rows))]
        ax.bar(xs, [v * 100 for v in values], width, color=color, hatch=hatch,
               edgecolor="white" if hatch else color, label=label)
    ax.set_xticks(range(len(rows)), [r.backbone for r in rows])
    ax.set_ylabel("%")
    ax.set_ylim(0, 100)
    ax.legend(frameon=False, ncols=2)
    return _save(fig, path)
