"""Point-cloud text format.

One record per line, ``#`` starts a comment::

    metric graph-path
    resolution 0.05
    v <id> <x1> ... <xd> <weight>
    e <id_i> <id_j> [length]

Edge lengths default to the Euclidean distance of the endpoints.
"""
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from app.models.domain import MetricKind, NetGraph, PointCloudSpace
from app.services.errors import InputError

logger = logging.getLogger(__name__)


def read_pointcloud(path: Union[str, Path]) -> PointCloudSpace:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read point cloud '{path}': {exc}") from None

    metric = MetricKind.AMBIENT_EUCLIDEAN
    h = None
    ids: List[int] = []
    coords: List[List[float]] = []
    weights: List[float] = []
    raw_edges: List[tuple] = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split("#", 1)[0].split()
        if not fields:
            continue
        tag, rest = fields[0], fields[1:]
        try:
            if tag == "v":
                if len(rest) < 3:
                    raise ValueError("vertex needs an id, coordinates and a weight")
                ids.append(int(rest[0]))
                coords.append([float(c) for c in rest[1:-1]])
                weights.append(float(rest[-1]))
            elif tag == "e":
                if len(rest) not in (2, 3):
                    raise ValueError("edge needs two ids and an optional length")
                raw_edges.append((int(rest[0]), int(rest[1]), float(rest[2]) if len(rest) == 3 else None))
            elif tag == "metric":
                metric = MetricKind(rest[0])
            elif tag == "resolution":
                h = float(rest[0])
            else:
                raise ValueError(f"unknown record '{tag}'")
        except (ValueError, IndexError) as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None

    if not ids:
        raise InputError(f"{path}: no vertices")
    if len({len(c) for c in coords}) != 1:
        raise InputError(f"{path}: vertices have different dimensions")
    row: Dict[int, int] = {}
    for k, vid in enumerate(ids):
        if vid in row:
            raise InputError(f"{path}: duplicate vertex id {vid}")
        row[vid] = k

    coords_arr = np.asarray(coords, dtype=float)
    edges, lengths = [], []
    for a, b, ell in raw_edges:
        if a not in row or b not in row:
            raise InputError(f"{path}: edge ({a}, {b}) refers to an unknown vertex")
        i, j = row[a], row[b]
        edges.append((i, j))
        lengths.append(ell if ell is not None else float(np.linalg.norm(coords_arr[i] - coords_arr[j])))
    if h is None:
        h = min(lengths) if lengths else 1.0

    logger.info(f"read {len(ids)} vertices and {len(edges)} edges from {path}")
    return PointCloudSpace(
        coords=coords_arr,
        weights=np.asarray(weights),
        edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        lengths=np.asarray(lengths, dtype=float),
        metric_kind=metric,
        h=h,
        ids=np.asarray(ids, dtype=np.int64),
        name=path.stem,
    )


def write_pointcloud(space: PointCloudSpace, path: Union[str, Path]) -> Path:
    path = Path(path)
    ids = space.ids if space.ids is not None else np.arange(space.n)
    out = [f"# {space.name or 'point cloud'}", f"metric {space.metric_kind.value}", f"resolution {space.h!r}"]
    for vid, c, w in zip(ids.tolist(), space.coords.tolist(), space.weights.tolist()):
        out.append("v " + " ".join([str(vid)] + [repr(x) for x in c] + [repr(w)]))
    for (i, j), ell in zip(space.edges.tolist(), space.lengths.tolist()):
        out.append(f"e {ids[i]} {ids[j]} {ell!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path


def write_net_graph(space: PointCloudSpace, net: NetGraph, path: Union[str, Path]) -> Path:
    """Net dump: ``v <vertex> <coords>`` lines then ``e <i> <j> <c(i->j)> <c(j->i)>`` lines."""
    path = Path(path)
    out = [f"# delta={net.delta!r} source={net.source} sink={net.sink}"]
    for v in net.vertices.tolist():
        out.append("v " + " ".join([str(v)] + [repr(x) for x in space.coords[v].tolist()]))
    for (i, j), forward, backward in zip(net.edges.tolist(), net.capacities.tolist(), net.backward.tolist()):
        out.append(f"e {i} {j} {forward!r} {backward!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
