"""Generators for example and counterexample spaces."""
import itertools
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models.domain import MetricKind, PointCloudSpace
from app.models.schemas import GalleryKind, GallerySpec
from app.services.errors import BudgetExceededError, InputError, PreconditionError

logger = logging.getLogger(__name__)


def _check_budget(count: int, budget: Optional[int] = None):
    budget = budget or settings.VERTEX_BUDGET
    if count > budget:
        raise BudgetExceededError(f"{count} vertices exceed the budget of {budget}")


def _lattice_edges(shape: Tuple[int, ...], diagonal: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Neighbor pairs of a regular lattice and their lengths in units of h."""
    index = np.arange(int(np.prod(shape))).reshape(shape)
    d = len(shape)
    if diagonal:
        offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if o > (0,) * d]
    else:
        offsets = [tuple(int(k == axis) for k in range(d)) for axis in range(d)]
    pairs, lengths = [], []
    for o in offsets:
        src = tuple(slice(max(0, -s), n - max(0, s)) for s, n in zip(o, shape))
        dst = tuple(slice(max(0, s), n - max(0, -s)) for s, n in zip(o, shape))
        a, b = index[src].reshape(-1), index[dst].reshape(-1)
        pairs.append(np.column_stack([a, b]))
        lengths.append(np.full(a.size, np.sqrt(sum(s * s for s in o))))
    return np.concatenate(pairs), np.concatenate(lengths)


def _drop_vertices(coords, weights, edges, lengths, keep: np.ndarray):
    """Remove vertices (and incident edges) and renumber the rest."""
    new_id = np.full(len(keep), -1)
    new_id[keep] = np.arange(int(keep.sum()))
    alive = keep[edges[:, 0]] & keep[edges[:, 1]]
    return coords[keep], weights[keep], new_id[edges[alive]], lengths[alive]


class GalleryService:
    """Service for building the example spaces."""

    @staticmethod
    def euclidean_grid(
        d: int,
        extent: float,
        h: float,
        diagonal: bool = False,
        origin: Optional[Sequence[float]] = None,
        metric_kind: MetricKind = MetricKind.AMBIENT_EUCLIDEAN,
    ) -> PointCloudSpace:
        """Regular grid on [0, extent]^d (shifted by ``origin``) with weights h^d.

        Args:
            d: Dimension, 1 to 3.
            extent: Side length.
            h: Resolution.
            diagonal: Also connect diagonal neighbors.
            origin: Lower corner; defaults to the origin.
            metric_kind: Ambient Euclidean or graph path metric.
        """
        if d not in (1, 2, 3):
            raise PreconditionError("grid dimension must be 1, 2 or 3")
        if h <= 0 or extent <= 0:
            raise InputError("grid extent and spacing must be positive")
        per_axis = int(round(extent / h)) + 1
        _check_budget(per_axis ** d)

        shape = (per_axis,) * d
        axes = np.meshgrid(*[np.arange(per_axis) * h] * d, indexing="ij")
        coords = np.stack([a.reshape(-1) for a in axes], axis=1)
        if origin is not None:
            coords = coords + np.asarray(origin, dtype=float)
        edges, units = _lattice_edges(shape, diagonal)
        logger.debug(f"grid d={d} extent={extent:g} h={h:g}: {coords.shape[0]} vertices")
        return PointCloudSpace(
            coords=coords,
            weights=np.full(coords.shape[0], h ** d),
            edges=edges,
            lengths=units * h,
            metric_kind=metric_kind,
            h=h,
            name=f"grid-{d}d",
        )

    @staticmethod
    def glued_planes(k: int, extent: float, h: float) -> PointCloudSpace:
        """Two square sheets [-extent/2, extent/2]^2 glued at the origin (k=0) or the line v=0 (k=1).

        Coordinates are (u, v, sheet); the gluing vertices carry sheet 0 and
        a single cell weight h^2.
        """
        if k not in (0, 1):
            raise PreconditionError("gluing dimension k must be 0 or 1")
        half = int(round(extent / (2 * h)))
        side = 2 * half + 1
        _check_budget(2 * side * side)

        sheet = GalleryService.euclidean_grid(2, 2 * half * h, h, origin=(-half * h, -half * h))
        n = sheet.n
        u, v = sheet.coords[:, 0], sheet.coords[:, 1]
        if k == 0:
            glued = (np.abs(u) < h / 2) & (np.abs(v) < h / 2)
        else:
            glued = np.abs(v) < h / 2

        # copy B reuses the glued vertices of copy A
        second = np.where(glued, np.arange(n), n + np.cumsum(~glued) - 1)
        extra = ~glued
        coords = np.vstack([
            np.column_stack([sheet.coords, np.zeros(n)]),
            np.column_stack([sheet.coords[extra], np.ones(int(extra.sum()))]),
        ])
        weights = np.full(coords.shape[0], h * h)
        edges = np.vstack([sheet.edges, second[sheet.edges]])
        lengths = np.concatenate([sheet.lengths, sheet.lengths])
        # edges inside the gluing set appear twice
        both = glued[sheet.edges[:, 0]] & glued[sheet.edges[:, 1]]
        keep = np.concatenate([np.ones(len(sheet.edges), dtype=bool), ~both])
        logger.debug(f"glued planes k={k}: {coords.shape[0]} vertices, {int(glued.sum())} glued")
        return PointCloudSpace(
            coords=coords,
            weights=weights,
            edges=edges[keep],
            lengths=lengths[keep],
            metric_kind=MetricKind.GRAPH_PATH,
            h=h,
            name=f"glued-planes-k{k}",
        )

    @staticmethod
    def segment(n: int) -> PointCloudSpace:
        """n equispaced vertices on [0, 1] with weights 1/n."""
        if n < 2:
            raise PreconditionError("a segment needs at least two vertices")
        h = 1.0 / (n - 1)
        idx = np.arange(n - 1)
        return PointCloudSpace(
            coords=np.linspace(0.0, 1.0, n)[:, None],
            weights=np.full(n, 1.0 / n),
            edges=np.column_stack([idx, idx + 1]),
            lengths=np.full(n - 1, h),
            metric_kind=MetricKind.AMBIENT_EUCLIDEAN,
            h=h,
            name="segment",
        )

    @staticmethod
    def carpet_like(level: int, fattening: Sequence[float], h: float) -> PointCloudSpace:
        """Unit square grid with centered square holes removed stage by stage.

        At stage i the square is split into 3^(i-1) x 3^(i-1) cells of side s
        and the open centered square of side fattening[i-1] * s is removed
        from each cell.

        Args:
            level: Number of stages, 0 to 5.
            fattening: Hole fraction per stage, each in [0, 1).
            h: Resolution.
        """
        if not 0 <= level <= 5:
            raise PreconditionError("carpet level must be between 0 and 5")
        if len(fattening) < level or any(not 0 <= a < 1 for a in fattening[:level]):
            raise InputError("fattening needs one fraction in [0, 1) per level")
        grid = GalleryService.euclidean_grid(2, 1.0, h, metric_kind=MetricKind.GRAPH_PATH)
        keep = np.ones(grid.n, dtype=bool)
        u, v = grid.coords[:, 0], grid.coords[:, 1]
        for stage in range(1, level + 1):
            a = fattening[stage - 1]
            if a == 0:
                continue
            cells = 3 ** (stage - 1)
            s = 1.0 / cells
            # distance to the center of the containing cell
            cu = (np.minimum(np.floor(u / s), cells - 1) + 0.5) * s
            cv = (np.minimum(np.floor(v / s), cells - 1) + 0.5) * s
            hole = (np.abs(u - cu) < a * s / 2) & (np.abs(v - cv) < a * s / 2)
            keep &= ~hole
        coords, weights, edges, lengths = _drop_vertices(
            grid.coords, grid.weights, grid.edges, grid.lengths, keep
        )
        logger.debug(f"carpet level={level}: removed {int((~keep).sum())} of {grid.n} vertices")
        return PointCloudSpace(
            coords=coords,
            weights=weights,
            edges=edges,
            lengths=lengths,
            metric_kind=MetricKind.GRAPH_PATH,
            h=h,
            name=f"carpet-{level}",
        )

    @staticmethod
    def build(spec: GallerySpec) -> PointCloudSpace:
        """Dispatch on ``spec.kind``."""
        if spec.kind == GalleryKind.GRID_EUCLIDEAN:
            return GalleryService.euclidean_grid(
                spec.dimension, spec.extent, spec.h, diagonal=spec.diagonal,
                origin=spec.origin, metric_kind=spec.metric,
            )
        if spec.kind == GalleryKind.SEGMENT:
            return GalleryService.segment(spec.n or int(round(1.0 / spec.h)) + 1)
        if spec.kind == GalleryKind.GLUED_PLANES:
            return GalleryService.glued_planes(spec.gluing_dimension, spec.extent, spec.h)
        return GalleryService.carpet_like(spec.level, spec.fattening, spec.h)
