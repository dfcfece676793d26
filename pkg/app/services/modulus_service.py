"""Curve-family modulus via linear programming."""
import logging
from dataclasses import dataclass
from itertools import islice
from typing import Dict, Iterable, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from app.models.domain import (
    AdmissibleDensity,
    CurveFamily,
    DiscretePencil,
    PointCloudSpace,
    RieszMeasure,
)
from app.services.errors import DegeneratePathError, DisconnectedError, InputError, PreconditionError
from app.services.riesz_service import RieszService
from app.services.simplex import solve_covering_lp

logger = logging.getLogger(__name__)

# Slack on the length bound so exact geodesics survive rounding.
_LENGTH_RTOL = 1e-9


@dataclass(frozen=True)
class KeithBound:
    """Modulus of an enumerated subfamily; a lower trend for the full family."""
    value: float
    family_size: int
    k: int
    L: float
    subfamily_estimate: bool = True


@dataclass(frozen=True)
class DualityCheck:
    modulus: float
    pencil_constant: float
    margin: float
    passed: bool
    skipped: bool = False
    diagnostic: str = ""


def _edge(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


def neighbor_graph(space: PointCloudSpace) -> nx.Graph:
    """networkx view of the neighbor graph with ``weight`` = edge length."""
    graph = nx.Graph()
    graph.add_nodes_from(range(space.n))
    graph.add_weighted_edges_from(
        (int(a), int(b), float(w)) for (a, b), w in zip(space.edges, space.lengths)
    )
    return graph


def make_family(x: int, y: int, L: float, distance: float,
                paths: Iterable[Sequence[int]],
                edge_lengths: Dict[Tuple[int, int], float]) -> CurveFamily:
    """CurveFamily from explicit vertex paths; lengths use ``edge_lengths``."""
    paths = tuple(tuple(int(v) for v in p) for p in paths)
    lengths = []
    for path in paths:
        if path[0] != x or path[-1] != y:
            raise InputError(f"path {path} does not join {x} to {y}")
        try:
            lengths.append(sum(edge_lengths[_edge(a, b)] for a, b in zip(path[:-1], path[1:])))
        except KeyError as exc:
            raise InputError(f"path {path} uses a non-edge {exc.args[0]}") from None
    return CurveFamily(
        x=x, y=y, L=float(L), distance=float(distance), paths=paths,
        lengths=np.asarray(lengths, dtype=float), edge_lengths=dict(edge_lengths),
    )


class ModulusService:
    """Service for quasigeodesic families and their modulus."""

    @staticmethod
    def enumerate_quasigeodesics(space: PointCloudSpace, x: int, y: int, L: float, k: int) -> CurveFamily:
        """Up to k loop-free x-y paths by increasing length, each <= L d(x,y).

        Args:
            space: The metric measure space.
            x: Path source.
            y: Path target.
            L: Length factor, L >= 1.
            k: Maximum number of paths.
        """
        x, y = space.check_vertex(x), space.check_vertex(y)
        if x == y:
            raise InputError("poles x and y must be distinct")
        if k < 1:
            raise PreconditionError("k must be at least 1")
        graph = neighbor_graph(space)
        if not nx.has_path(graph, x, y):
            raise DisconnectedError(f"vertices {x} and {y} are not connected")

        distance = space.distance(x, y)
        budget = L * distance * (1 + _LENGTH_RTOL)
        paths = []
        for path in islice(nx.shortest_simple_paths(graph, x, y, weight="weight"), k):
            length = nx.path_weight(graph, path, weight="weight")
            if length > budget:
                break
            paths.append(path)
        edge_lengths = {_edge(int(a), int(b)): float(w) for (a, b), w in zip(space.edges, space.lengths)}
        family = make_family(x, y, L, distance, paths, edge_lengths)
        logger.debug(f"enumerated {len(paths)} quasigeodesics (L={L:g}, k={k})")
        return family

    @staticmethod
    def edge_masses(riesz: RieszMeasure, edges: Sequence[Tuple[int, int]]) -> np.ndarray:
        """mu(e): mean of the Riesz weights at the two endpoints."""
        if len(edges) == 0:
            return np.zeros(0)
        e = np.asarray(edges, dtype=np.int64)
        return (riesz.weights[e[:, 0]] + riesz.weights[e[:, 1]]) / 2.0

    @staticmethod
    def path_incidence(family: CurveFamily) -> Tuple[list, np.ndarray]:
        """Edges used by the family and the path-by-edge length matrix."""
        edges = sorted({_edge(a, b) for p in family.paths for a, b in zip(p[:-1], p[1:])})
        index = {e: i for i, e in enumerate(edges)}
        A = np.zeros((len(family.paths), len(edges)))
        for r, path in enumerate(family.paths):
            for a, b in zip(path[:-1], path[1:]):
                e = _edge(a, b)
                A[r, index[e]] += family.edge_lengths[e]
        return edges, A

    @staticmethod
    def modulus(family: CurveFamily, riesz: RieszMeasure) -> Tuple[float, AdmissibleDensity]:
        """Mod(family, mu): min sum rho(e) mu(e) with every path rho-length >= 1.

        Args:
            family: Finite path family.
            riesz: Riesz measure supplying the edge masses.

        Returns:
            The modulus and an optimal density; an empty family gives 0.
        """
        if family.is_empty:
            return 0.0, AdmissibleDensity(edges=(), values=np.zeros(0))
        if np.any(family.lengths <= 0):
            raise DegeneratePathError("degenerate path: a family path has zero length")

        edges, A = ModulusService.path_incidence(family)
        cost = ModulusService.edge_masses(riesz, edges)
        result = solve_covering_lp(A, cost)
        logger.debug(f"modulus LP: {len(family.paths)} paths, {len(edges)} edges, value {result.value:.12g}")
        return result.value, AdmissibleDensity(edges=tuple(edges), values=result.dual)

    @staticmethod
    def admissibility_residual(family: CurveFamily, density: AdmissibleDensity) -> float:
        """min over paths of the rho-length minus 1 (>= 0 when admissible)."""
        if family.is_empty:
            return 0.0
        rho = density.as_dict()
        worst = float("inf")
        for path in family.paths:
            total = sum(
                rho.get(_edge(a, b), 0.0) * family.edge_lengths[_edge(a, b)]
                for a, b in zip(path[:-1], path[1:])
            )
            worst = min(worst, total - 1.0)
        return worst

    @staticmethod
    def keith_bound(space: PointCloudSpace, x: int, y: int, L: float, k: int,
                    riesz: Optional[RieszMeasure] = None) -> KeithBound:
        """Modulus of the first k quasigeodesics with respect to m^L_{x,y}.

        Args:
            space: The metric measure space.
            x: First pole.
            y: Second pole.
            L: Truncation and length factor.
            k: Number of quasigeodesics.
            riesz: Precomputed Riesz measure for (x, y, L).
        """
        family = ModulusService.enumerate_quasigeodesics(space, x, y, L, k)
        riesz = riesz or RieszService.riesz_measure(space, x, y, L)
        value, _ = ModulusService.modulus(family, riesz)
        if family.is_empty:
            logger.warning(f"no {L:g}-quasigeodesic between {x} and {y}: no lower bound witnessed")
        return KeithBound(value=value, family_size=len(family.paths), k=k, L=float(L))

    @staticmethod
    def pencil_density_integral(pencil: DiscretePencil, density: AdmissibleDensity,
                                edge_lengths: Dict[Tuple[int, int], float]) -> float:
        """Expected rho-length of a pencil path."""
        rho = density.as_dict()
        total = 0.0
        for path, w in zip(pencil.paths, pencil.weights.tolist()):
            total += w * sum(
                rho.get(_edge(a, b), 0.0) * edge_lengths[_edge(a, b)]
                for a, b in zip(path[:-1], path[1:])
            )
        return total

    @staticmethod
    def pencil_modulus_duality_check(
        pencil: DiscretePencil,
        family: CurveFamily,
        riesz: RieszMeasure,
        test_densities: Sequence[np.ndarray] = (),
        tol: float = 1e-9,
    ) -> DualityCheck:
        """Check Mod(family) >= 1 / C1 with C1 the pencil's edge-density constant.

        C1 is the sup over the test densities and the optimal density of
        (expected rho-length of the pencil) / (sum rho(e) mu(e)). Each test
        density is indexed like the family's edge list.

        Args:
            pencil: Pencil supported on the family.
            family: Path family of the modulus problem.
            riesz: Riesz measure supplying the edge masses.
            test_densities: Extra densities over the family's edges.
            tol: Absolute slack on Mod * C1 >= 1.
        """
        members = set(family.paths)
        outside = [p for p in pencil.paths if p not in members]
        if outside:
            msg = f"{len(outside)} pencil paths are not in the family; duality check skipped"
            logger.warning(msg)
            return DualityCheck(
                modulus=float("nan"), pencil_constant=float("nan"), margin=float("nan"),
                passed=True, skipped=True, diagnostic=msg,
            )

        mod, optimal = ModulusService.modulus(family, riesz)
        edges = list(optimal.edges)
        masses = ModulusService.edge_masses(riesz, edges)
        suite = [np.asarray(t, dtype=float) for t in test_densities] + [optimal.values]

        constant = 0.0
        for values in suite:
            if values.shape != (len(edges),) or np.any(values < 0):
                raise InputError("test densities must be nonnegative, one value per family edge")
            density = AdmissibleDensity(edges=tuple(edges), values=values)
            numerator = ModulusService.pencil_density_integral(pencil, density, family.edge_lengths)
            denominator = float(np.dot(values, masses))
            if denominator > 0:
                constant = max(constant, numerator / denominator)
            elif numerator > 0:
                constant = float("inf")

        if constant == float("inf"):
            margin = mod
        elif constant > 0:
            margin = mod - 1.0 / constant
        else:
            # all suite densities vanish: Mod is 0 and nothing is certified
            margin = 0.0
        passed = margin >= -tol * max(1.0, mod)
        return DualityCheck(modulus=mod, pencil_constant=constant, margin=margin, passed=passed)
