"""Domain models shared by the numerical services.

These are plain frozen dataclasses: they hold data and a few derived views,
the operations live in ``app.services``.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from app.services.errors import InputError

# Number of full distance rows kept per space.
_ROW_CACHE_SIZE = 64


class MetricKind(str, Enum):
    """How d(i, j) is evaluated on a point cloud."""
    AMBIENT_EUCLIDEAN = "ambient-euclidean"
    GRAPH_PATH = "graph-path"


@dataclass(frozen=True, eq=False)
class PointCloudSpace:
    """Weighted point cloud with a metric and a neighbor graph.

    Vertices are addressed by their row index ``0..n-1``. ``ids`` keeps the
    labels read from a point-cloud file, if any. Edges are stored once with
    ``i < j``; the neighbor graph is symmetric by construction.
    """
    coords: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    metric_kind: MetricKind = MetricKind.AMBIENT_EUCLIDEAN
    h: float = 1.0
    ids: Optional[np.ndarray] = None
    name: str = ""
    _rows: "OrderedDict[int, np.ndarray]" = field(
        default_factory=OrderedDict, init=False, repr=False
    )
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        weights = np.asarray(self.weights, dtype=float)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(self.lengths, dtype=float).reshape(-1)
        n = coords.shape[0]

        if weights.shape != (n,):
            raise InputError(f"expected {n} weights, got {weights.shape}")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise InputError("weights must be finite and strictly positive")
        if lengths.shape[0] != edges.shape[0]:
            raise InputError("one length per edge is required")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InputError("edge endpoint outside the vertex range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise InputError("self-loops are not allowed")
        if not np.all(np.isfinite(lengths)) or np.any(lengths <= 0):
            raise InputError("edge lengths must be finite and strictly positive")
        if self.h <= 0:
            raise InputError("resolution h must be positive")

        # canonical orientation i < j
        swap = edges[:, 0] > edges[:, 1]
        edges = edges.copy()
        edges[swap] = edges[swap][:, ::-1]

        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "metric_kind", MetricKind(self.metric_kind))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def check_vertex(self, i: int) -> int:
        """Validate a vertex index and return it as int."""
        if not isinstance(i, (int, np.integer)) or i < 0 or i >= self.n:
            raise InputError(f"vertex {i!r} is not in the space (n={self.n})")
        return int(i)

    @cached_property
    def adjacency(self) -> csr_matrix:
        """Symmetric sparse adjacency with edge lengths."""
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.concatenate([self.lengths, self.lengths])
        return csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def neighbor_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR-style (indptr, neighbors, edge index) for Python-level searches."""
        m = self.edges.shape[0]
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        src, dst, eid = src[order], dst[order], eid[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return np.cumsum(indptr), dst, eid

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def distances_from(self, i: int, limit: Optional[float] = None) -> np.ndarray:
        """Row d(i, .) of the metric; entries beyond ``limit`` are +inf."""
        i = self.check_vertex(i)
        if limit is None:
            with self._lock:
                row = self._rows.get(i)
                if row is not None:
                    self._rows.move_to_end(i)
                    return row
            row = self._compute_row(i, None)
            row.setflags(write=False)
            with self._lock:
                self._rows[i] = row
                if len(self._rows) > _ROW_CACHE_SIZE:
                    self._rows.popitem(last=False)
            return row
        return self._compute_row(i, limit)

    def graph_distances_from(self, sources, limit: Optional[float] = None) -> np.ndarray:
        """Shortest-path length in the neighbor graph from a vertex or a set."""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        kwargs = {"limit": limit} if limit is not None else {}
        if sources.size == 1:
            return dijkstra(self.adjacency, directed=False, indices=int(sources[0]), **kwargs)
        return dijkstra(self.adjacency, directed=False, indices=sources, min_only=True, **kwargs)

    def _compute_row(self, i: int, limit: Optional[float]) -> np.ndarray:
        if self.metric_kind == MetricKind.GRAPH_PATH:
            return self.graph_distances_from(i, limit)
        row = np.linalg.norm(self.coords - self.coords[i], axis=1)
        if limit is not None:
            row[row > limit] = np.inf
        return row

    def distance(self, i: int, j: int) -> float:
        return float(self.distances_from(i)[self.check_vertex(j)])


@dataclass(frozen=True)
class SpaceStats:
    """Empirical doubling and quasiconvexity constants of a space."""
    doubling_estimate: Optional[float] = None
    doubling_argmax: Optional[Tuple[int, float]] = None
    quasiconvexity_estimate: Optional[float] = None
    quasiconvexity_argmax: Optional[Tuple[int, int]] = None
    centers: Tuple[int, ...] = ()
    radii: Tuple[float, ...] = ()
    pairs: Tuple[Tuple[int, int], ...] = ()


@dataclass(frozen=True, eq=False)
class RieszMeasure:
    """Truncated Riesz weights R^L_{x,y}(z) m(z) stored for every vertex."""
    x: int
    y: int
    L: float
    radius: float
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def mass_of(self, mask: np.ndarray) -> float:
        return float(self.weights[mask].sum())


@dataclass(frozen=True, eq=False)
class NetGraph:
    """δ-net capacity graph between a source x and a sink y.

    Edge k = (a, b) carries ``capacities[k]`` on the arc a -> b and
    ``reverse_capacities[k]`` on b -> a. A graph built without reverse
    capacities is symmetric.
    """
    vertices: np.ndarray
    edges: np.ndarray
    capacities: np.ndarray
    lengths: np.ndarray
    delta: float
    source: int
    sink: int
    scale_flagged: bool = False
    reverse_capacities: Optional[np.ndarray] = None

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def backward(self) -> np.ndarray:
        """Capacities of the arcs b -> a."""
        return self.capacities if self.reverse_capacities is None else self.reverse_capacities

    @property
    def max_capacity(self) -> float:
        if not self.n_edges:
            return 0.0
        return float(max(self.capacities.max(), self.backward.max()))


@dataclass(frozen=True)
class Cut:
    """Vertex cut with x in ``side`` and y outside it."""
    side: frozenset
    value: float


@dataclass(frozen=True)
class Flow:
    """Nonnegative flow on directed arcs."""
    arcs: Dict[Tuple[int, int], float]
    value: float
    source: int
    sink: int


@dataclass(frozen=True, eq=False)
class DiscretePencil:
    """Finite probability measure on x-y paths."""
    paths: Tuple[Tuple[int, ...], ...]
    weights: np.ndarray
    raw_total: float

    @classmethod
    def from_family(cls, family: "CurveFamily", weights=None) -> "DiscretePencil":
        """Probability pencil supported on a curve family (uniform by default)."""
        k = len(family.paths)
        if k == 0:
            raise InputError("cannot build a pencil on an empty family")
        w = np.full(k, 1.0 / k) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (k,) or np.any(w < 0) or w.sum() <= 0:
            raise InputError("pencil weights must be nonnegative, one per path")
        return cls(paths=family.paths, weights=w / w.sum(), raw_total=float(w.sum()))


@dataclass(frozen=True, eq=False)
class CurveFamily:
    """Finite family of x-y paths in the neighbor graph."""
    x: int
    y: int
    L: float
    distance: float
    paths: Tuple[Tuple[int, ...], ...]
    lengths: np.ndarray
    edge_lengths: Dict[Tuple[int, int], float] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return len(self.paths) == 0


@dataclass(frozen=True, eq=False)
class AdmissibleDensity:
    """Per-edge density; ``edges`` are (i, j) with i < j."""
    edges: Tuple[Tuple[int, int], ...]
    values: np.ndarray

    def as_dict(self) -> Dict[Tuple[int, int], float]:
        return {e: float(v) for e, v in zip(self.edges, self.values)}


@dataclass(frozen=True, eq=False)
class RegionSet:
    """Vertex subset with the averaged edge-inside-length model."""
    mask: np.ndarray
    label: str = ""

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())

    def inside_lengths(self, space: PointCloudSpace) -> np.ndarray:
        """In-A length of every edge: l(u,v) (chi_A(u) + chi_A(v)) / 2."""
        chi = self.mask.astype(float)
        return space.lengths * (chi[space.edges[:, 0]] + chi[space.edges[:, 1]]) / 2.0


@dataclass(frozen=True, eq=False)
class SeparatingSet:
    """Candidate separating set Omega between x and y."""
    mask: np.ndarray
    margin: float
    x: int
    y: int
    valid: bool
    label: str = ""


@dataclass(frozen=True, eq=False)
class PositionField:
    """Values of pos_A with source x, target y and region A."""
    values: np.ndarray
    x: int
    y: int
    region: RegionSet

    @property
    def width(self) -> float:
        return float(self.values[self.y])


@dataclass(frozen=True)
class EuclideanConfig:
    """Pole configuration in (R^d, |.|, L^d)."""
    d: int
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    L: float = 1.0
    rtol: float = 1e-6

    def __post_init__(self):
        if self.d < 1:
            raise InputError("dimension must be at least 1")
        if len(self.x) != self.d or len(self.y) != self.d:
            raise InputError("pole coordinates must have d entries")
        if np.allclose(self.x, self.y):
            raise InputError("poles must be distinct")
        if self.L < 1:
            raise InputError("truncation L must be at least 1")
