"""Deterministic SVG figures for rates, trajectories and scaling sweeps."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import InvalidInputError

matplotlib.use("Agg")

FIGSIZE = (6.4, 4.0)
_RC = {
    "svg.hashsalt": "qubitbath",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
}
PLOT_KINDS = ("rates", "trajectory", "scaling")


def _rates(fig: Figure, data: Mapping[str, Any]):
    e = np.asarray(data.get("e", []), dtype=float)
    gamma = np.asarray(data.get("gamma", []), dtype=float)
    if e.size == 0 or e.size != gamma.size:
        raise InvalidInputError("rates plot needs equal-length, non-empty e and gamma")
    order = np.lexsort((e, np.abs(e)))
    ax = fig.add_subplot()
    x = np.arange(e.size)
    ax.bar(x, gamma[order], color="tab:blue")
    step = max(1, e.size // 12)
    ax.set_xticks(x[::step])
    ax.set_xticklabels([f"{v:.3g}" for v in e[order][::step]], rotation=45, ha="right")
    ax.set_xlabel("energy difference e (sorted by |e|)")
    ax.set_ylabel(r"decay rate $\gamma_e$")


def _trajectory(fig: Figure, data: Mapping[str, Any]):
    t = np.asarray(data.get("times", []), dtype=float)
    series = data.get("series", {})
    if t.size == 0 or not series:
        raise InvalidInputError("trajectory plot needs times and at least one series")
    ax = fig.add_subplot()
    for label, values in series.items():
        ax.plot(t, np.asarray(values, dtype=float), label=label, linewidth=1.2)
    positive = t[t > 0]
    if positive.size and positive.max() / positive.min() > 100:
        ax.set_xscale("symlog", linthresh=float(positive.min()))
    ax.set_xlabel("time t")
    ax.set_ylabel(r"$|\rho_{\sigma\tau}(t)|$")
    ax.legend(fontsize=7, loc="best")


def _scaling(fig: Figure, data: Mapping[str, Any]):
    n = np.asarray(data.get("n", []), dtype=float)
    series = data.get("series", {})
    if n.size == 0 or not series:
        raise InvalidInputError("scaling plot needs register sizes and at least one series")
    slopes = data.get("slopes", {})
    ax = fig.add_subplot()
    for label, values in series.items():
        y = np.asarray(values, dtype=float)
        mask = y > 0
        if not mask.any():
            continue
        slope = slopes.get(label)
        tag = f"{label} (slope {slope:.3f})" if slope is not None else label
        ax.plot(n[mask], y[mask], marker="o", label=tag)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("register size N")
    ax.set_ylabel("rate")
    ax.legend(fontsize=7, loc="best")


def emit_plot(kind: str, data: Mapping[str, Any], path: str | Path, description: str | None = None) -> Path:
    """Render ``data`` as an SVG at ``path``.

    The output is byte-stable for identical inputs: fixed size, fixed hash
    salt and no date in the metadata. ``description`` is embedded verbatim.
    """
    builders = {"rates": _rates, "trajectory": _trajectory, "scaling": _scaling}
    if kind not in builders:
        raise InvalidInputError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=FIGSIZE)
        builders[kind](fig, data)
        fig.tight_layout()
        metadata = {"Date": None, "Title": f"qubitbath {kind}"}
        if description is not None:
            metadata["Description"] = description
        fig.savefig(path, format="svg", metadata=metadata)
    return path
