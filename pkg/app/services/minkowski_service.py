"""Minkowski contents of vertex sets and the relative isoperimetric check."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from app.models.domain import MetricKind, PointCloudSpace, RieszMeasure
from app.services.errors import PreconditionError
from app.services.riesz_service import safe_ratio
from app.services.space_service import MetricSpaceService, as_mask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinkowskiResult:
    """Discrete liminf proxy: minimum of the content profile over a radius schedule."""
    estimate: float
    profile: Tuple[Tuple[float, float], ...] = ()
    argmin_radius: Optional[float] = None
    diagnostic: str = ""


@dataclass(frozen=True)
class IsoResult:
    ratio: float
    lhs: float
    surface: float
    surface_term: float
    boundary_contaminated: bool


def radius_schedule(h: float, top: float) -> Tuple[float, ...]:
    """Doubling schedule 2h, 4h, ... up to ``top``; at least the first radius."""
    radii = [2.0 * h]
    while radii[-1] * 2 <= top * (1 + 1e-12):
        radii.append(radii[-1] * 2)
    return tuple(radii)


class MinkowskiService:
    """Service for neighborhood-mass surface proxies."""

    @staticmethod
    def distance_to_set(space: PointCloudSpace, mask: np.ndarray) -> np.ndarray:
        """Metric distance from every vertex to the nearest vertex of the set."""
        members = np.flatnonzero(mask)
        if members.size == 0:
            return np.full(space.n, np.inf)
        if space.metric_kind == MetricKind.GRAPH_PATH:
            return space.graph_distances_from(members)
        dist, _ = cKDTree(space.coords[members]).query(space.coords)
        return dist

    @staticmethod
    def minkowski_content(
        space: PointCloudSpace,
        omega,
        riesz: RieszMeasure,
        radii: Optional[Sequence[float]] = None,
    ) -> MinkowskiResult:
        """Profile r -> m^L(B_r(Omega) minus Omega) / r and its minimum.

        A vertex at distance s from Omega counts with the fraction
        clamp((r - s)/h + 1, 0, 1) of its cell inside the r-neighborhood.

        Args:
            space: The metric measure space.
            omega: Vertex ids or mask of the set.
            riesz: Riesz measure used as the mass.
            radii: Radius schedule, each >= 2h; defaults to 2h, 4h, ... up to d(x,y)/4.

        Returns:
            The minimum over the schedule, its radius and the whole profile.
        """
        mask = as_mask(space, omega)
        if not mask.any() or mask.all():
            return MinkowskiResult(estimate=0.0, diagnostic="empty boundary")
        if radii is None:
            dxy = space.distance(riesz.x, riesz.y)
            radii = radius_schedule(space.h, dxy / 4)
        radii = tuple(float(r) for r in radii)
        if min(radii) < 2 * space.h * (1 - 1e-12):
            raise PreconditionError(f"Minkowski radii must be >= 2h={2 * space.h:g}")

        dist = MinkowskiService.distance_to_set(space, mask)
        outside = ~mask & np.isfinite(dist)
        d_out = dist[outside]
        w_out = riesz.weights[outside]
        profile = []
        for r in radii:
            frac = np.clip((r - d_out) / space.h + 1.0, 0.0, 1.0)
            profile.append((r, float(np.dot(frac, w_out)) / r))
        values = [v for _, v in profile]
        k = int(np.argmin(values))
        return MinkowskiResult(estimate=values[k], profile=tuple(profile), argmin_radius=radii[k])

    @staticmethod
    def thin_set_content(space: PointCloudSpace, thin: np.ndarray, radii: Sequence[float],
                         weights: Optional[np.ndarray] = None) -> MinkowskiResult:
        """min over s of m(B_s(A)) / (2s) for a one-layer set A.

        Cells at distance s' from A count with clamp((s - s')/h + 1/2, 0, 1).
        """
        weights = space.weights if weights is None else weights
        if not thin.any():
            return MinkowskiResult(estimate=0.0, diagnostic="empty boundary")
        dist = MinkowskiService.distance_to_set(space, thin)
        ok = np.isfinite(dist)
        profile = []
        for s in radii:
            frac = np.clip((s - dist[ok]) / space.h + 0.5, 0.0, 1.0)
            profile.append((float(s), float(np.dot(frac, weights[ok])) / (2.0 * s)))
        values = [v for _, v in profile]
        k = int(np.argmin(values))
        return MinkowskiResult(estimate=values[k], profile=tuple(profile), argmin_radius=float(radii[k]))

    @staticmethod
    def boundary_layer(space: PointCloudSpace, mask: np.ndarray) -> np.ndarray:
        """Vertices of E with at least one neighbor outside E."""
        i, j = space.edges[:, 0], space.edges[:, 1]
        crossing = mask[i] != mask[j]
        layer = np.zeros(space.n, dtype=bool)
        layer[i[crossing & mask[i]]] = True
        layer[j[crossing & mask[j]]] = True
        return layer

    @staticmethod
    def relative_isoperimetric_check(
        space: PointCloudSpace,
        E,
        center: int,
        r: float,
        lam: float,
        radii: Optional[Sequence[float]] = None,
    ) -> IsoResult:
        """min(m(B∩E), m(B minus E)) / m(B) over r times the normalized surface term.

        The surface term is the thin-set content of the boundary layer of E
        inside B_{lam r}(center), divided by m(B_{lam r}(center)).

        Args:
            space: The metric measure space.
            E: Vertex ids or mask of the set.
            center: Ball center.
            r: Inner radius.
            lam: Dilation of the outer ball, lam >= 1.
            radii: Thin-set radius schedule.
        """
        if r <= 0 or lam < 1:
            raise PreconditionError("relative isoperimetric check needs r > 0 and lambda >= 1")
        mask = as_mask(space, E)
        center = space.check_vertex(center)
        ball = np.zeros(space.n, dtype=bool)
        ball[MetricSpaceService.ball(space, center, r)] = True
        big = np.zeros(space.n, dtype=bool)
        big[MetricSpaceService.ball(space, center, lam * r)] = True

        m_ball = float(space.weights[ball].sum())
        inside = float(space.weights[ball & mask].sum())
        lhs = min(inside, m_ball - inside) / m_ball

        if radii is None:
            radii = radius_schedule(space.h, lam * r / 4)
        thin = MinkowskiService.boundary_layer(space, mask) & big
        surface = MinkowskiService.thin_set_content(space, thin, radii).estimate
        surface_term = surface / float(space.weights[big].sum())

        contaminated = MetricSpaceService.distance_to_boundary(space, center) <= lam * r
        if contaminated:
            logger.warning(f"isoperimetric ball B_{lam * r:g}({center}) touches the cloud boundary")
        return IsoResult(
            ratio=safe_ratio(lhs, r * surface_term),
            lhs=lhs,
            surface=surface,
            surface_term=surface_term,
            boundary_contaminated=contaminated,
        )
