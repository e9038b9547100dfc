"""F1-versus-shots figures for the report command.

Uses the object-oriented Figure API with the Agg canvas, so nothing touches
pyplot's global state and it works headless.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from pathlib import Path

from matplotlib.axes import Axes
from matplotlib.figure import Figure

from hatefl.evaluation.deltas import Series

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
}


def _line_style(setting: str) -> dict:
    if setting.startswith("fl"):
        return {"linestyle": "-", "marker": "o"}
    if setting.startswith("api"):
        return {"linestyle": ":"}
    return {"linestyle": "--", "marker": "s"}


def draw_series(ax: Axes, series: Series) -> None:
    for setting in series.settings:
        cells = series.values[setting]
        style = _line_style(setting)
        if setting.startswith("api"):
            mean = next(iter(cells.values()))[0]
            ax.axhline(mean, label=setting, color="grey", **style)
            continue
        xs = [n for n in series.shots if n in cells]
        means = [cells[n][0] for n in xs]
        stds = [cells[n][1] for n in xs]
        (line,) = ax.plot(xs, means, label=setting, **style)
        ax.fill_between(xs, [m - s for m, s in zip(means, stds)], [m + s for m, s in zip(means, stds)],
                        color=line.get_color(), alpha=0.15, linewidth=0)
    ax.set_title(series.target)
    ax.set_xticks(series.shots)
    ax.set_xlabel("training samples")
    ax.set_ylabel("macro-F1")
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)


def save_series_figure(series: Series, path: str | Path) -> Path:
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(4.0, 3.0), layout="constrained")
        ax = fig.subplots()
        draw_series(ax, series)
        ax.legend(loc="lower right")
        fig.savefig(path, dpi=150)
    return Path(path)


def save_overview_figure(all_series: Mapping[str, Series], path: str | Path) -> Path:
    """All targets side by side, one shared legend."""
    import matplotlib

    targets = list(all_series)
    cols = min(3, len(targets))
    rows = math.ceil(len(targets) / cols)
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(3.4 * cols, 2.8 * rows), layout="constrained")
        axes = fig.subplots(rows, cols, squeeze=False)
        for ax, target in zip(axes.flat, targets):
            draw_series(ax, all_series[target])
        for ax in list(axes.flat)[len(targets):]:
            ax.set_visible(False)
        handles, labels = axes.flat[0].get_legend_handles_labels()
        fig.legend(handles, labels, loc="outside lower center", ncols=max(1, len(labels)))
        fig.savefig(path, dpi=150)
    return Path(path)
