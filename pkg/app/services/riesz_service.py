"""Riesz potentials, Riesz measures, maximal functions and PI checks."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.models.domain import PointCloudSpace, RieszMeasure, SpaceStats
from app.services.errors import InputError, PreconditionError
from app.services.space_service import MetricSpaceService

logger = logging.getLogger(__name__)

# Relative size below which a mean oscillation counts as zero.
_FLAT_EPS = 1e-12


def safe_ratio(num: float, den: float) -> float:
    """num / den with 0/0 -> 0 and x/0 -> inf."""
    if den > 0:
        return num / den
    return 0.0 if num == 0 else float("inf")


@dataclass(frozen=True)
class PiCheckResult:
    """Outcome of a ball Poincaré ratio evaluation."""
    ratio: float
    lhs: float
    rhs: float
    boundary_contaminated: bool


@dataclass(frozen=True)
class MassBoundResult:
    mass: float
    bound: float
    passed: bool


class RieszService:
    """Service for Riesz weights and the pointwise/ball inequality checks."""

    @staticmethod
    def _check_poles(space: PointCloudSpace, x: int, y: int):
        x, y = space.check_vertex(x), space.check_vertex(y)
        if x == y:
            raise InputError("poles x and y must be distinct")
        return x, y

    @staticmethod
    def riesz_row(space: PointCloudSpace, x: int, y: int) -> np.ndarray:
        """R_{x,y}(z) for every vertex z, zero at both poles."""
        x, y = RieszService._check_poles(space, x, y)
        row = MetricSpaceService.riesz_kernel_row(space, x) + MetricSpaceService.riesz_kernel_row(space, y)
        row[[x, y]] = 0.0
        return row

    @staticmethod
    def riesz_potential(space: PointCloudSpace, x: int, y: int, z: int) -> float:
        """Two-pole Riesz kernel R_{x,y}(z)."""
        x, y = RieszService._check_poles(space, x, y)
        z = space.check_vertex(z)
        if z in (x, y):
            return 0.0
        return MetricSpaceService.riesz_kernel(space, x, z) + MetricSpaceService.riesz_kernel(space, y, z)

    @staticmethod
    def riesz_measure(space: PointCloudSpace, x: int, y: int, L: float) -> RieszMeasure:
        """Truncated Riesz measure chi_{B^L} R_{x,y} m on B_{2L d(x,y)}(x).

        Args:
            space: The metric measure space.
            x: First pole.
            y: Second pole.
            L: Truncation, L >= 1.
        """
        x, y = RieszService._check_poles(space, x, y)
        if L < 1:
            raise PreconditionError(f"truncation L must be >= 1, got {L}")
        radius = 2.0 * L * space.distance(x, y)
        support = space.distances_from(x) < radius
        weights = np.where(support, RieszService.riesz_row(space, x, y) * space.weights, 0.0)
        logger.debug(f"riesz measure x={x} y={y} L={L:g}: mass {weights.sum():.6g}")
        return RieszMeasure(x=x, y=y, L=float(L), radius=radius, weights=weights)

    @staticmethod
    def maximal_function(space: PointCloudSpace, f, s: float, z: int) -> float:
        """M_s f(z): largest ball average of |f| over radii in (0, s).

        Open balls of radius r in (t_k, t_{k+1}] are the closed sets
        {d <= t_k}, so the candidates are the distinct distances t_k < s.

        Args:
            space: The metric measure space.
            f: Per-vertex field; its absolute value is averaged.
            s: Upper bound on the radii.
            z: Ball center.
        """
        if s <= 0:
            raise PreconditionError(f"maximal function scale must be positive, got {s}")
        z = space.check_vertex(z)
        f = np.abs(np.asarray(f, dtype=float))
        dist = space.distances_from(z)
        order = np.argsort(dist, kind="stable")
        d_sorted = dist[order]
        keep = d_sorted < s
        d_sorted = d_sorted[keep]
        w = space.weights[order][keep]
        mass = np.cumsum(w)
        integral = np.cumsum(f[order][keep] * w)
        # last index of each group of equal distances
        ends = np.flatnonzero(np.append(np.diff(d_sorted) > 0, True))
        return float(np.max(integral[ends] / mass[ends]))

    @staticmethod
    def ptpi_check(space: PointCloudSpace, u, x: int, y: int, L: float,
                   riesz: Optional[RieszMeasure] = None) -> float:
        """|u(x) - u(y)| / sum_z lip_h u(z) m^L_{x,y}(z).

        Args:
            space: The metric measure space.
            u: Finite per-vertex field.
            x: First pole.
            y: Second pole.
            L: Truncation, L >= 1.
            riesz: Precomputed Riesz measure for (x, y, L).
        """
        u = np.asarray(u, dtype=float)
        riesz = riesz or RieszService.riesz_measure(space, x, y, L)
        lip = MetricSpaceService.local_lip(space, u)
        num = abs(float(u[riesz.x] - u[riesz.y]))
        den = float(np.dot(lip, riesz.weights))
        return safe_ratio(num, den)

    @staticmethod
    def pi_check(space: PointCloudSpace, u, center: int, r: float, lam: float) -> PiCheckResult:
        """Ball Poincaré ratio mean|u - u_B| over B_r divided by r * mean lip_h u over B_{lam r}.

        Args:
            space: The metric measure space.
            u: Per-vertex field.
            center: Ball center.
            r: Inner radius.
            lam: Dilation of the outer ball, lam >= 1.

        Returns:
            The ratio with both sides; a constant field gives 0.
        """
        if r <= 0 or lam < 1:
            raise PreconditionError("pi_check needs r > 0 and lambda >= 1")
        u = np.asarray(u, dtype=float)
        center = space.check_vertex(center)
        inner = MetricSpaceService.ball(space, center, r)
        outer = MetricSpaceService.ball(space, center, lam * r)
        w_in = space.weights[inner]
        u_in = u[inner]
        mean = np.dot(w_in, u_in) / w_in.sum()
        lhs = float(np.dot(w_in, np.abs(u_in - mean)) / w_in.sum())
        # rounding noise of the weighted mean on a constant field
        if lhs <= _FLAT_EPS * float(np.max(np.abs(u_in), initial=0.0)):
            lhs = 0.0

        lip = MetricSpaceService.local_lip(space, u)[outer]
        w_out = space.weights[outer]
        rhs = float(np.dot(w_out, lip) / w_out.sum())

        contaminated = MetricSpaceService.distance_to_boundary(space, center) <= lam * r
        if contaminated:
            logger.warning(f"ball B_{lam * r:g}({center}) touches the cloud boundary")
        return PiCheckResult(
            ratio=safe_ratio(lhs, r * rhs),
            lhs=lhs,
            rhs=rhs,
            boundary_contaminated=contaminated,
        )

    @staticmethod
    def riesz_mass_bound_check(space: PointCloudSpace, x: int, y: int, L: float,
                               stats: SpaceStats) -> MassBoundResult:
        """Check m^L_{x,y}(X) <= 8 C_D L d(x,y) with the empirical C_D.

        Args:
            space: The metric measure space.
            x: First pole.
            y: Second pole.
            L: Truncation, L >= 1.
            stats: Space statistics carrying the doubling estimate.
        """
        if stats.doubling_estimate is None:
            raise PreconditionError("mass bound needs a doubling estimate")
        riesz = RieszService.riesz_measure(space, x, y, L)
        bound = 8.0 * stats.doubling_estimate * L * space.distance(x, y)
        return MassBoundResult(mass=riesz.mass, bound=bound, passed=riesz.mass <= bound)
