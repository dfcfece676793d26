"""Metric measure space queries: balls, masses, nets and empirical constants."""
import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from app.models.domain import MetricKind, PointCloudSpace, SpaceStats
from app.services.errors import InputError, PreconditionError

logger = logging.getLogger(__name__)


def as_mask(space: PointCloudSpace, vertices) -> np.ndarray:
    """Normalize a vertex set (ids or boolean mask) to a boolean mask."""
    arr = np.asarray(vertices)
    if arr.dtype == bool:
        if arr.shape != (space.n,):
            raise InputError(f"mask must have length {space.n}")
        return arr
    mask = np.zeros(space.n, dtype=bool)
    if arr.size:
        ids = arr.astype(np.int64).reshape(-1)
        if ids.min() < 0 or ids.max() >= space.n:
            raise InputError("vertex set contains ids outside the space")
        mask[ids] = True
    return mask


class MetricSpaceService:
    """Service for ball, measure and net queries on a point cloud."""

    @staticmethod
    def nearest_vertex(space: PointCloudSpace, point: Sequence[float]) -> int:
        """Vertex whose coordinates are closest to ``point``."""
        point = np.asarray(point, dtype=float).reshape(-1)
        if point.shape != (space.dim,):
            raise InputError(f"point needs {space.dim} coordinates, got {point.size}")
        _, index = cKDTree(space.coords).query(point)
        return int(index)

    @staticmethod
    def ball(space: PointCloudSpace, center: int, r: float) -> np.ndarray:
        """Open ball {i : d(center, i) < r} as sorted vertex ids."""
        center = space.check_vertex(center)
        if r <= 0:
            raise PreconditionError(f"ball radius must be positive, got {r}")
        return np.flatnonzero(space.distances_from(center) < r)

    @staticmethod
    def measure(space: PointCloudSpace, vertices) -> float:
        """Total weight of a vertex set."""
        return float(space.weights[as_mask(space, vertices)].sum())

    @staticmethod
    def ball_mass_profile(space: PointCloudSpace, center: int) -> Tuple[np.ndarray, np.ndarray]:
        """Sorted distances from ``center`` and the mass strictly inside each.

        ``masses[k]`` is m({d < dists[k]}), i.e. the open-ball mass at radius
        ``dists[k]``; equal distances share the same value.
        """
        dist = space.distances_from(center)
        order = np.argsort(dist, kind="stable")
        dists = dist[order]
        cum = np.concatenate([[0.0], np.cumsum(space.weights[order])])
        first = np.searchsorted(dists, dists, side="left")
        return dists, cum[first]

    @staticmethod
    def ball_masses(space: PointCloudSpace, center: int, radii) -> np.ndarray:
        """m(B_r(center)) for many radii at once.

        Args:
            space: The metric measure space.
            center: Ball center.
            radii: Radii to evaluate; balls are open.

        Returns:
            One mass per radius.
        """
        dist = space.distances_from(center)
        order = np.argsort(dist, kind="stable")
        cum = np.concatenate([[0.0], np.cumsum(space.weights[order])])
        return cum[np.searchsorted(dist[order], np.asarray(radii, dtype=float), side="left")]

    @staticmethod
    def riesz_kernel_row(space: PointCloudSpace, x: int) -> np.ndarray:
        """Single-pole term R_x(z) = d(x,z) / m(B_{d(x,z)}(x)) for every z; 0 at x.

        Args:
            space: The metric measure space.
            x: The pole.

        Returns:
            Kernel values indexed by vertex; infinite distances give 0.
        """
        x = space.check_vertex(x)
        dist = space.distances_from(x)
        order = np.argsort(dist, kind="stable")
        sorted_d = dist[order]
        cum = np.concatenate([[0.0], np.cumsum(space.weights[order])])
        inner = cum[np.searchsorted(sorted_d, dist, side="left")]
        out = np.zeros(space.n)
        ok = (dist > 0) & np.isfinite(dist)
        out[ok] = dist[ok] / inner[ok]
        return out

    @staticmethod
    def riesz_kernel(space: PointCloudSpace, x: int, z: int) -> float:
        """R_x(z) with the open-ball convention."""
        z = space.check_vertex(z)
        return float(MetricSpaceService.riesz_kernel_row(space, x)[z])

    @staticmethod
    def doubling_estimate(
        space: PointCloudSpace,
        centers: Sequence[int],
        radii: Sequence[float],
    ) -> SpaceStats:
        """Max of m(B_2r(x)) / m(B_r(x)) over the sampled centers and radii.

        Args:
            space: The metric measure space.
            centers: Sampled ball centers.
            radii: Radii r; each is compared with 2r.

        Returns:
            SpaceStats with the estimate and the (center, radius) attaining it.
        """
        best, argmax = 1.0, None
        radii = [float(r) for r in radii]
        if any(r <= 0 for r in radii):
            raise PreconditionError("doubling radii must be positive")
        small = [r for r in radii if r < 2 * space.h]
        if small:
            logger.warning(f"doubling radii below 2h={2 * space.h:g} are dominated by discreteness: {small}")

        r_arr = np.asarray(radii)
        for c in centers:
            c = space.check_vertex(c)
            inner = MetricSpaceService.ball_masses(space, c, r_arr)
            outer = MetricSpaceService.ball_masses(space, c, 2 * r_arr)
            # the center is always inside, so inner > 0
            ratios = outer / np.maximum(inner, space.weights[c])
            k = int(np.argmax(ratios)) if len(ratios) else 0
            if len(ratios) and ratios[k] > best:
                best, argmax = float(ratios[k]), (c, radii[k])

        logger.debug(f"doubling estimate {best:.4f} at {argmax}")
        return SpaceStats(
            doubling_estimate=best,
            doubling_argmax=argmax,
            centers=tuple(int(c) for c in centers),
            radii=tuple(radii),
        )

    @staticmethod
    def delta_net(space: PointCloudSpace, delta: float, x: int, y: int) -> np.ndarray:
        """Greedy farthest-point δ-net seeded with x and y.

        The returned ids are in insertion order (x, y first). Points are
        pairwise at distance >= δ and every vertex is within δ of the net.

        Args:
            space: The metric measure space.
            delta: Separation scale, 0 < δ < d(x, y).
            x: First seed.
            y: Second seed.
        """
        x, y = space.check_vertex(x), space.check_vertex(y)
        if x == y:
            raise InputError("poles must be distinct")
        dxy = space.distance(x, y)
        if not 0 < delta < dxy:
            raise PreconditionError(f"net scale δ={delta:g} must lie in (0, d(x,y)={dxy:g})")

        nearest = np.minimum(space.distances_from(x), space.distances_from(y))
        net = [x, y]
        while True:
            far = int(np.argmax(nearest))
            reach = float(nearest[far])
            if reach < delta:
                break
            net.append(far)
            # only vertices closer than the current covering radius can improve
            row = space.distances_from(far, limit=reach if np.isfinite(reach) else None)
            np.minimum(nearest, row, out=nearest)

        logger.debug(f"δ-net with δ={delta:g}: {len(net)} of {space.n} vertices")
        return np.asarray(net, dtype=np.int64)

    @staticmethod
    def local_lip(space: PointCloudSpace, u) -> np.ndarray:
        """lip_h u(i) = max over neighbors j of |u(j) - u(i)| / l_ij; 0 when isolated.

        Args:
            space: The metric measure space.
            u: Finite per-vertex field.
        """
        u = np.asarray(u, dtype=float)
        if u.shape != (space.n,):
            raise InputError(f"field must have one value per vertex ({space.n})")
        if not np.all(np.isfinite(u)):
            raise PreconditionError("local_lip needs a finite field")
        i, j = space.edges[:, 0], space.edges[:, 1]
        slope = np.abs(u[i] - u[j]) / space.lengths
        out = np.zeros(space.n)
        np.maximum.at(out, i, slope)
        np.maximum.at(out, j, slope)
        return out

    @staticmethod
    def quasiconvexity_estimate(
        space: PointCloudSpace,
        pairs: Iterable[Tuple[int, int]],
    ) -> SpaceStats:
        """Max over pairs of graph path length / ambient distance.

        Args:
            space: The metric measure space.
            pairs: Vertex pairs to compare.

        Returns:
            SpaceStats with the estimate; inf when a pair is disconnected.
        """
        pairs = [(space.check_vertex(a), space.check_vertex(b)) for a, b in pairs]
        if space.metric_kind == MetricKind.GRAPH_PATH:
            return SpaceStats(quasiconvexity_estimate=1.0, pairs=tuple(pairs))

        best, argmax = 1.0, None
        for a, b in pairs:
            if a == b:
                continue
            ambient = space.distance(a, b)
            path = float(space.graph_distances_from(a)[b])
            if not np.isfinite(path):
                logger.warning(f"pair ({a}, {b}) is disconnected in the neighbor graph")
                return SpaceStats(
                    quasiconvexity_estimate=float("inf"),
                    quasiconvexity_argmax=(a, b),
                    pairs=tuple(pairs),
                )
            ratio = path / ambient
            if ratio > best:
                best, argmax = ratio, (a, b)
        return SpaceStats(quasiconvexity_estimate=best, quasiconvexity_argmax=argmax, pairs=tuple(pairs))

    @staticmethod
    def boundary_vertices(space: PointCloudSpace) -> np.ndarray:
        """Vertices whose degree is below the maximum degree of the cloud."""
        deg = space.degrees
        if deg.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(deg < deg.max())

    @staticmethod
    def distance_to_boundary(space: PointCloudSpace, center: int) -> float:
        """Metric distance from ``center`` to the nearest cloud-boundary vertex."""
        boundary = MetricSpaceService.boundary_vertices(space)
        if boundary.size == 0:
            return float("inf")
        return float(space.distances_from(center)[boundary].min())

    @staticmethod
    def sample_vertices(space: PointCloudSpace, count: int, seed: int,
                        margin: Optional[float] = None) -> np.ndarray:
        """Deterministic random vertex sample, optionally away from the boundary."""
        rng = np.random.default_rng(seed)
        pool = np.arange(space.n)
        if margin is not None:
            boundary = MetricSpaceService.boundary_vertices(space)
            if boundary.size:
                if space.metric_kind == MetricKind.GRAPH_PATH:
                    dist = space.graph_distances_from(boundary)
                else:
                    dist, _ = cKDTree(space.coords[boundary]).query(space.coords)
                pool = np.flatnonzero(dist > margin)
        if pool.size == 0:
            raise PreconditionError("no vertex satisfies the sampling margin")
        return np.sort(rng.choice(pool, size=min(count, pool.size), replace=False))
