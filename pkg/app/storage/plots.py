"""Static SVG plots (Riesz heatmaps, cuts, position fields, report summaries)."""
import logging
import threading
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import numpy as np  # noqa: E402
from matplotlib import pyplot as plt  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from app.models.domain import NetGraph, PointCloudSpace  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so reruns give identical files
plt.rcParams["svg.hashsalt"] = "pi-lab"
_SVG_METADATA = {"Date": None}

# pyplot keeps global state
_lock = threading.Lock()


def _xy(space: PointCloudSpace) -> np.ndarray:
    if space.dim == 1:
        return np.column_stack([space.coords[:, 0], np.zeros(space.n)])
    return space.coords[:, :2]


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata=_SVG_METADATA, bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"wrote plot {path}")


def _mark_poles(ax, space: PointCloudSpace, poles: Sequence[int]):
    xy = _xy(space)
    for name, p in zip(("x", "y"), poles):
        ax.plot(*xy[p], "k*", ms=10)
        ax.annotate(name, xy[p], textcoords="offset points", xytext=(4, 4))


def scalar_field(space: PointCloudSpace, values, path: Path, title: str = "",
                 poles: Sequence[int] = ()):
    """Vertex scatter colored by ``values`` (non-finite values in grey)."""
    values = np.asarray(values, dtype=float)
    xy = _xy(space)
    finite = np.isfinite(values)
    with _lock:
        fig, ax = plt.subplots(figsize=(6, 5))
        if space.dim == 1:
            ax.plot(xy[finite, 0], values[finite], lw=1.5)
            ax.set_xlabel("$t$")
        else:
            ax.scatter(xy[~finite, 0], xy[~finite, 1], c="0.8", s=4, lw=0)
            sc = ax.scatter(xy[finite, 0], xy[finite, 1], c=values[finite], s=4, lw=0, cmap="viridis")
            fig.colorbar(sc, ax=ax)
            ax.set_aspect("equal")
            _mark_poles(ax, space, poles)
        ax.set_title(title)
        _save(fig, path)


def cut_plot(space: PointCloudSpace, net: NetGraph, side: Iterable[int], path: Path, title: str = ""):
    """Net vertices colored by cut side; crossing net edges drawn in red."""
    side = set(side)
    xy = _xy(space)
    vertices = np.asarray(net.vertices)
    inside = np.array([v in side for v in vertices.tolist()], dtype=bool)
    crossing = [(xy[a], xy[b]) for a, b in net.edges.tolist() if (a in side) != (b in side)]
    with _lock:
        fig, ax = plt.subplots(figsize=(6, 5))
        ax.scatter(xy[:, 0], xy[:, 1], c="0.9", s=2, lw=0)
        ax.add_collection(LineCollection(crossing, colors="tab:red", linewidths=0.6))
        ax.scatter(xy[vertices[inside], 0], xy[vertices[inside], 1], c="tab:blue", s=10, label="source side")
        ax.scatter(xy[vertices[~inside], 0], xy[vertices[~inside], 1], c="tab:orange", s=10, label="sink side")
        _mark_poles(ax, space, (net.source, net.sink))
        ax.set_aspect("equal")
        ax.legend(loc="upper right", fontsize=8)
        ax.set_title(title)
        _save(fig, path)


def position_contours(space: PointCloudSpace, values, path: Path, title: str = "",
                      levels: int = 12, poles: Sequence[int] = ()):
    """Contour lines of a position field over the planar layout."""
    values = np.asarray(values, dtype=float)
    if space.dim != 2:
        scalar_field(space, values, path, title, poles)
        return
    finite = np.isfinite(values)
    with _lock:
        fig, ax = plt.subplots(figsize=(6, 5))
        cs = ax.tricontourf(space.coords[finite, 0], space.coords[finite, 1], values[finite],
                            levels=levels, cmap="viridis")
        fig.colorbar(cs, ax=ax)
        _mark_poles(ax, space, poles)
        ax.set_aspect("equal")
        ax.set_title(title)
        _save(fig, path)


def record_summary(labels: Sequence[str], values: Sequence[float], passed: Sequence[Optional[bool]],
                   path: Path, title: str = ""):
    """One marker per record: headline value, colored by pass/fail."""
    colors = {True: "tab:green", False: "tab:red", None: "tab:gray"}
    with _lock:
        fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(labels)), 4))
        ys = np.asarray(values, dtype=float)
        ax.scatter(range(len(ys)), ys, c=[colors[p] for p in passed], s=25)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=90, fontsize=7)
        ax.grid(True)
        ax.set_title(title)
        _save(fig, path)
