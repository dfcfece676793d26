"""Widths, separating ratios, position functions and the separating-set checks."""
import heapq
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.models.domain import (
    PointCloudSpace,
    PositionField,
    RegionSet,
    RieszMeasure,
    SeparatingSet,
)
from app.services.errors import BudgetExceededError, DisconnectedError, InputError, PreconditionError
from app.services.minkowski_service import MinkowskiResult, MinkowskiService, radius_schedule
from app.services.riesz_service import RieszService, safe_ratio
from app.services.space_service import as_mask

logger = logging.getLogger(__name__)

WIDTH_OVER = ("all-paths", "L-quasigeodesics")


@dataclass(frozen=True)
class ScanResult:
    """Infimum of the separating ratio over a candidate list."""
    inf_ratio: float
    argmin: int
    label: str
    ratios: Tuple[float, ...]


@dataclass(frozen=True)
class LipBound:
    max_lip: float
    max_lip_outside: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class SandwichResult:
    lhs: float
    mid: float
    rhs: float
    passed: bool
    mid_label: str = ""
    rhs_label: str = ""
    separators_evaluated: int = 0
    invalid_separators: int = 0

    @property
    def gap(self) -> float:
        """|inf content - inf SR| relative to inf content."""
        return safe_ratio(abs(self.rhs - self.mid), self.rhs)


@dataclass(frozen=True)
class CoareaResult:
    lhs: float
    rhs: float
    margin: float
    passed: bool
    levels: int = 0


@dataclass(frozen=True)
class ObstacleResult:
    lhs: float
    rhs: float
    ratio: float
    maximal_x: float
    maximal_y: float


@dataclass(frozen=True)
class ChopResult:
    region_ratio: float
    band_ratios: Tuple[float, ...] = ()

    @property
    def min_band_ratio(self) -> float:
        return min(self.band_ratios) if self.band_ratios else float("inf")


class SeparatingService:
    """Separating-set computations for a fixed space, pole pair and truncation L."""

    def __init__(self, space: PointCloudSpace, x: int, y: int, L: float = 1.0,
                 label_budget: Optional[int] = None):
        """
        Initialize SeparatingService with a space and poles.

        Args:
            space: Point cloud with its neighbor graph
            x: Source pole
            y: Target pole
            L: Riesz truncation and quasigeodesic constant
            label_budget: Cap on bi-criteria search labels
        """
        self.space = space
        self.x = space.check_vertex(x)
        self.y = space.check_vertex(y)
        if self.x == self.y:
            raise InputError("poles x and y must be distinct")
        if L < 1:
            raise PreconditionError(f"L must be >= 1, got {L}")
        self.L = float(L)
        self.label_budget = label_budget or settings.LABEL_BUDGET
        self.distance = space.distance(self.x, self.y)
        if not np.isfinite(space.graph_distances_from(self.x)[self.y]):
            raise DisconnectedError(f"vertices {self.x} and {self.y} are not connected")

    @cached_property
    def riesz(self) -> RieszMeasure:
        return RieszService.riesz_measure(self.space, self.x, self.y, self.L)

    @cached_property
    def _adjacency(self) -> Tuple[list, list, list]:
        indptr, nbr, eid = self.space.neighbor_table
        return indptr.tolist(), nbr.tolist(), eid.tolist()

    def region(self, vertices, label: str = "") -> RegionSet:
        """Wrap ids or a mask as a RegionSet on this space."""
        return RegionSet(mask=as_mask(self.space, vertices), label=label)

    def _edge_weights(self, A: RegionSet) -> np.ndarray:
        if A.mask.shape != (self.space.n,):
            raise InputError("region mask does not match the space")
        return A.inside_lengths(self.space)

    def _dijkstra(self, weights: np.ndarray) -> np.ndarray:
        """Single-source distances from x with nonnegative (possibly zero) edge weights."""
        indptr, nbr, eid = self._adjacency
        w = weights.tolist()
        dist = [float("inf")] * self.space.n
        dist[self.x] = 0.0
        heap = [(0.0, self.x)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                nd = d + w[eid[k]]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return np.asarray(dist)

    def _quasigeodesic_min(self, weights: np.ndarray) -> float:
        """Least weight of an x-y path of length <= L d(x,y); inf if none.

        Labels (weight, length) are popped in lexicographic order, so the
        first label settled at y is optimal. A label is dropped when a label
        with no larger weight and smaller length already settled its node.
        """
        budget = self.L * self.distance * (1 + 1e-9)
        to_target = self.space.graph_distances_from(self.y)
        if to_target[self.x] > budget:
            return float("inf")
        indptr, nbr, eid = self._adjacency
        w = weights.tolist()
        ell = self.space.lengths.tolist()
        lower = to_target.tolist()
        settled = [float("inf")] * self.space.n
        heap = [(0.0, 0.0, self.x)]
        pushed = 1
        while heap:
            cost, length, u = heapq.heappop(heap)
            if length >= settled[u]:
                continue
            settled[u] = length
            if u == self.y:
                logger.debug(f"bi-criteria search settled after {pushed} labels")
                return cost
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                nl = length + ell[eid[k]]
                if nl + lower[v] > budget or nl >= settled[v]:
                    continue
                heapq.heappush(heap, (cost + w[eid[k]], nl, v))
                pushed += 1
                if pushed > self.label_budget:
                    raise BudgetExceededError(
                        f"bi-criteria search exceeded {self.label_budget} labels"
                    )
        return float("inf")

    def width(self, A: RegionSet, over: str = "all-paths") -> float:
        """Least in-A length of an x-y path (optionally an L-quasigeodesic).

        Args:
            A: Region whose in-A length is measured.
            over: ``all-paths`` or ``L-quasigeodesics``.
        """
        if over not in WIDTH_OVER:
            raise InputError(f"width-over must be one of {WIDTH_OVER}, got '{over}'")
        weights = self._edge_weights(A)
        if over == "L-quasigeodesics":
            return self._quasigeodesic_min(weights)
        return float(self._dijkstra(weights)[self.y])

    def separating_ratio(self, A: RegionSet, over: str = "all-paths") -> float:
        """m^L_{x,y}(A) / width(A), +inf when A is avoidable."""
        w = self.width(A, over)
        if w <= 0 or not np.isfinite(w):
            return float("inf")
        return self.riesz.mass_of(A.mask) / w

    def set_connectedness_scan(self, candidates: Sequence[RegionSet], over: str = "all-paths") -> ScanResult:
        """Minimum separating ratio over candidate regions.

        Args:
            candidates: Regions to scan.
            over: Width mode passed to ``width``.
        """
        if not candidates:
            raise PreconditionError("candidate list is empty")
        ratios = tuple(self.separating_ratio(A, over) for A in candidates)
        best = int(np.argmin(ratios))
        logger.info(f"sr-scan over {len(candidates)} candidates: inf {ratios[best]:.6g} at '{candidates[best].label}'")
        return ScanResult(inf_ratio=float(ratios[best]), argmin=best,
                          label=candidates[best].label, ratios=ratios)

    def position_function(self, A: RegionSet) -> PositionField:
        """pos_A: in-A distance from x; +inf off the component of x."""
        values = self._dijkstra(self._edge_weights(A))
        return PositionField(values=values, x=self.x, y=self.y, region=A)

    def _finite_lip(self, values: np.ndarray) -> np.ndarray:
        """lip_h over edges whose endpoints both have finite values."""
        space = self.space
        i, j = space.edges[:, 0], space.edges[:, 1]
        finite = np.isfinite(values[i]) & np.isfinite(values[j])
        slope = np.zeros(len(i))
        slope[finite] = np.abs(values[i][finite] - values[j][finite]) / space.lengths[finite]
        lip = np.zeros(space.n)
        np.maximum.at(lip, i, slope)
        np.maximum.at(lip, j, slope)
        return lip

    def lip_bound_check(self, field: PositionField, lam_hat: float, tol: Optional[float] = None) -> LipBound:
        """Max lip_h pos overall and on vertices with no neighbor in A."""
        space = self.space
        i, j = space.edges[:, 0], space.edges[:, 1]
        lip = self._finite_lip(field.values)

        near = field.region.mask.copy()
        near[i[field.region.mask[j]]] = True
        near[j[field.region.mask[i]]] = True
        outside = ~near
        max_lip = float(lip.max(initial=0.0))
        max_out = float(lip[outside].max(initial=0.0))
        if tol is None:
            tol = 2 * space.h / float(space.lengths.min(initial=space.h))
        bound = lam_hat * (1 + tol)
        return LipBound(max_lip=max_lip, max_lip_outside=max_out, bound=bound,
                        passed=max_lip <= bound and max_out <= 1e-12)

    def level_set_separator(self, field: PositionField, t: float) -> SeparatingSet:
        """Omega_t = {pos <= t} with its a-posteriori margin."""
        width = field.width
        if not 0 < t < width:
            raise PreconditionError(f"level t={t:g} must lie in (0, width={width:g})")
        return self.separator(field.values <= t, label=f"levelset({field.region.label},{t:.6g})")

    def separator(self, mask: np.ndarray, label: str = "") -> SeparatingSet:
        """SeparatingSet with margin min(d(x, Omega^c), d(y, Omega)), valid iff >= 2h."""
        mask = np.asarray(mask, dtype=bool)
        dx = self.space.distances_from(self.x)
        dy = self.space.distances_from(self.y)
        to_out = float(dx[~mask].min(initial=np.inf)) if mask[self.x] else 0.0
        to_in = float(dy[mask].min(initial=np.inf)) if not mask[self.y] else 0.0
        margin = min(to_out, to_in)
        return SeparatingSet(mask=mask, margin=margin, x=self.x, y=self.y,
                             valid=margin >= 2 * self.space.h, label=label)

    def level_sets(self, field: PositionField, levels: int, inset: float = 0.0) -> List[SeparatingSet]:
        """Level-set separators at evenly spaced t in (inset, width - inset).

        Args:
            field: Position field of a region.
            levels: Number of levels.
            inset: Distance kept from both ends of the range of t.

        Returns:
            One separator per level; empty when the range is empty.
        """
        width = field.width
        if not np.isfinite(width) or width <= 2 * inset:
            return []
        ts = inset + (width - 2 * inset) * np.arange(1, levels + 1) / (levels + 1)
        return [self.level_set_separator(field, float(t)) for t in ts]

    def separator_content(self, omega: SeparatingSet, radii: Optional[Sequence[float]] = None) -> MinkowskiResult:
        """Minkowski content of a separator over the radii not exceeding its margin.

        Beyond the margin B_r(Omega) reaches a pole and the shell stops
        separating, so those radii are dropped.
        """
        if radii is None:
            radii = radius_schedule(self.space.h, self.distance / 4)
        kept = [r for r in radii if r <= omega.margin * (1 + 1e-12)]
        if not kept:
            return MinkowskiResult(estimate=float("inf"), diagnostic="margin below the smallest radius")
        return MinkowskiService.minkowski_content(self.space, omega.mask, self.riesz, kept)

    def sandwich_check(
        self,
        lam_hat: float,
        regions: Sequence[RegionSet],
        separators: Sequence[SeparatingSet] = (),
        levels: int = 16,
        radii: Optional[Sequence[float]] = None,
        tol: float = 0.2,
    ) -> SandwichResult:
        """Evaluate lam^-1 inf content <= inf SR <= inf content over candidates.

        Separator candidates are the given ones plus ``levels`` level sets of
        the position field of every region, kept 2h away from both poles. The
        content of a separator only uses radii up to its margin. The SR
        infimum also ranges over the shells B_r(Omega) minus Omega of the
        valid separators at their minimizing radius.

        Args:
            lam_hat: Quasiconvexity constant of the space.
            regions: Candidate regions for the SR infimum.
            separators: Extra separator candidates.
            levels: Level sets per region.
            radii: Minkowski radius schedule; defaults to 2h, 4h, ... up to d(x,y)/4.
            tol: Relative slack on both sides of the sandwich.

        Returns:
            The three sides, the minimizers and the separator bookkeeping.
        """
        if not regions:
            raise PreconditionError("sandwich check needs region candidates")
        candidates = list(separators)
        for A in regions:
            candidates.extend(self.level_sets(self.position_function(A), levels, inset=2 * self.space.h))
        if not candidates:
            raise PreconditionError("sandwich check needs separator candidates")

        rhs, rhs_label, invalid, shells = float("inf"), "", 0, []
        for omega in candidates:
            if not omega.valid:
                invalid += 1
                continue
            result = self.separator_content(omega, radii)
            if result.estimate < rhs:
                rhs, rhs_label = result.estimate, omega.label
            if result.argmin_radius is not None:
                dist = MinkowskiService.distance_to_set(self.space, omega.mask)
                shell = (dist > 0) & (dist < result.argmin_radius)
                shells.append(RegionSet(mask=shell, label=f"shell({omega.label},{result.argmin_radius:.6g})"))
        if invalid:
            logger.warning(f"{invalid} of {len(candidates)} separator candidates have margin below 2h")

        pool = list(regions) + shells
        scan = self.set_connectedness_scan(pool)
        mid = scan.inf_ratio
        lhs = rhs / lam_hat
        passed = bool(lhs <= mid * (1 + tol) and mid <= rhs * (1 + tol))
        logger.info(f"sandwich lhs={lhs:.6g} mid={mid:.6g} rhs={rhs:.6g} passed={passed}")
        return SandwichResult(
            lhs=lhs, mid=mid, rhs=rhs, passed=passed, mid_label=scan.label, rhs_label=rhs_label,
            separators_evaluated=len(candidates) - invalid, invalid_separators=invalid,
        )

    def coarea_check(self, field: PositionField, radii: Optional[Sequence[float]] = None,
                     tol: float = 0.15) -> CoareaResult:
        """Compare sum_t content({pos <= t}) dt with sum_z lip pos(z) m^L_{x,y}(z).

        Args:
            field: Position field whose level sets are measured.
            radii: Minkowski radius schedule.
            tol: Allowed negative margin relative to the right side.
        """
        width = field.width
        lip = self._finite_lip(field.values)
        rhs = float(np.dot(lip, self.riesz.weights))
        if width <= 0:
            return CoareaResult(lhs=0.0, rhs=rhs, margin=rhs, passed=True, levels=0)

        steps = max(1, int(np.ceil(width / self.space.h)))
        dt = width / steps
        lhs = 0.0
        for k in range(steps):
            # midpoint rule
            t = (k + 0.5) * dt
            content = MinkowskiService.minkowski_content(self.space, field.values <= t, self.riesz, radii)
            lhs += content.estimate * dt
        margin = rhs - lhs
        passed = margin >= -tol * rhs
        logger.info(f"coarea lhs={lhs:.6g} rhs={rhs:.6g} over {steps} levels")
        return CoareaResult(lhs=lhs, rhs=rhs, margin=margin, passed=passed, levels=steps)

    def _maximal_bound(self, g: np.ndarray, C: float) -> Tuple[float, float, float]:
        scale = C * self.distance
        mx = RieszService.maximal_function(self.space, g, scale, self.x)
        my = RieszService.maximal_function(self.space, g, scale, self.y)
        return scale * (mx + my), mx, my

    def obstacle_avoidance_check(self, E: RegionSet, C: float) -> ObstacleResult:
        """Least in-E length over L-quasigeodesics against C d (M chi_E(x) + M chi_E(y)).

        Args:
            E: Obstacle region.
            C: Maximal function scale factor.
        """
        if C <= 0:
            raise PreconditionError("C must be positive")
        lhs = self._quasigeodesic_min(self._edge_weights(E))
        rhs, mx, my = self._maximal_bound(E.mask.astype(float), C)
        return ObstacleResult(lhs=lhs, rhs=rhs, ratio=safe_ratio(lhs, rhs), maximal_x=mx, maximal_y=my)

    def a1_connectedness_check(self, g, C: float) -> ObstacleResult:
        """Least g-length over L-quasigeodesics against C d (M g(x) + M g(y))."""
        g = np.asarray(g, dtype=float)
        if g.shape != (self.space.n,) or np.any(g < 0) or not np.all(np.isfinite(g)):
            raise InputError("g must be a finite nonnegative per-vertex field")
        if C <= 0:
            raise PreconditionError("C must be positive")
        e = self.space.edges
        weights = self.space.lengths * (g[e[:, 0]] + g[e[:, 1]]) / 2.0
        lhs = self._quasigeodesic_min(weights)
        rhs, mx, my = self._maximal_bound(g, C)
        return ObstacleResult(lhs=lhs, rhs=rhs, ratio=safe_ratio(lhs, rhs), maximal_x=mx, maximal_y=my)

    def chop_region(self, A: RegionSet, n: int) -> ChopResult:
        """Separating ratios of n bands of A with equal position thickness.

        Args:
            A: Region to slice.
            n: Number of bands.
        """
        if n < 1:
            raise PreconditionError("number of bands must be positive")
        field = self.position_function(A)
        sr = self.separating_ratio(A)
        width = field.width
        if width <= 0:
            return ChopResult(region_ratio=sr)
        pos = np.where(np.isfinite(field.values), field.values, -1.0)
        # vertices of A past the last level join the last band
        band = np.minimum(np.floor(pos * n / width), n - 1)
        bands = []
        for k in range(n):
            mask = A.mask & (band == k)
            bands.append(self.separating_ratio(RegionSet(mask=mask, label=f"band{k}")))
        return ChopResult(region_ratio=sr, band_ratios=tuple(bands))
