"""
Heatmap Renderer
Draws A_M(n) of one trace as an SVG heatmap (coherence order M vertical,
cycle n horizontal, logarithmic colour scale).
"""

import json
import logging
import os
from dataclasses import asdict, dataclass
from typing import List

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.colors import LogNorm
from matplotlib.figure import Figure

from src.logic.cluster import ClusterTrace
from src.logic.mqc import spectra_matrix
from src.utils.errors import InsufficientDataError, OutputError

SUPPORT_THRESHOLD = 1e-6
SVG_HASH_SALT = "mqc-heatmap"


@dataclass(frozen=True)
class HeatmapSummary:
    """Shape of the heatmap and, per cycle, the largest |M| with visible weight."""
    width: int
    height: int
    p: float
    n_prep_cycles: int
    support_widths: List[int]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def support_widths(orders: np.ndarray, grid: np.ndarray,
                   threshold: float = SUPPORT_THRESHOLD) -> List[int]:
    """max |M| with A_M >= threshold * max A, column by column."""
    widths = []
    for col in grid.T:
        peak = float(np.max(col)) if col.size else 0.0
        if peak <= 0.0:
            widths.append(0)
            continue
        visible = np.abs(orders[col >= threshold * peak])
        widths.append(int(visible.max()) if visible.size else 0)
    return widths


def render_heatmap(trace: ClusterTrace, path: str) -> HeatmapSummary:
    """
    Write the SVG for `trace` and return its summary.

    The output is byte-stable across reruns: fixed hash salt, no date.

    Raises:
        InsufficientDataError: the trace kept no spectra
        OutputError: the file could not be written
    """
    if not trace.spectra:
        raise InsufficientDataError(f"trace p={trace.p:g} has no retained spectra to draw")
    orders, grid = spectra_matrix(trace.spectra)
    summary = HeatmapSummary(
        width=grid.shape[1],
        height=grid.shape[0],
        p=trace.p,
        n_prep_cycles=trace.n_prep_cycles,
        support_widths=support_widths(orders, grid),
    )

    peak = float(np.max(grid))
    floor = SUPPORT_THRESHOLD * peak if peak > 0.0 else SUPPORT_THRESHOLD
    shown = np.clip(grid, floor, None)
    cycles = [pt.n_cycles for pt in trace.points[: grid.shape[1]]]

    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "none"}):
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        mesh = ax.imshow(
            shown,
            origin="lower",
            aspect="auto",
            interpolation="nearest",
            norm=LogNorm(vmin=floor, vmax=max(peak, floor * 10.0)),
            extent=(cycles[0] - 0.5, cycles[-1] + 0.5, orders[0] - 0.5, orders[-1] + 0.5),
            cmap="viridis",
        )
        fig.colorbar(mesh, ax=ax, label="A_M")
        ax.set_xlabel("cycle n")
        ax.set_ylabel("coherence order M")
        ax.set_title(f"p = {trace.p:g}, N0 = {trace.n_prep_cycles}")
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            fig.savefig(path, format="svg",
                        metadata={"Date": None, "Description": summary.to_json()})
        except OSError as e:
            raise OutputError(f"failed to write heatmap: {e}", path) from e

    logging.info(f"[HEATMAP] Wrote {path} ({summary.width} cycles x {summary.height} orders)")
    return summary
