"""δ-net capacity graphs, max-flow/min-cut and flow decomposition into pencils."""
import logging
from collections import deque
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp, preflow_push
from scipy.spatial import cKDTree

from app.models.domain import (
    Cut,
    DiscretePencil,
    Flow,
    MetricKind,
    NetGraph,
    PointCloudSpace,
    RieszMeasure,
)
from app.services.errors import DisconnectedError, InputError, NoPencilError, PreconditionError
from app.services.riesz_service import safe_ratio
from app.services.space_service import MetricSpaceService

logger = logging.getLogger(__name__)

FLOW_ALGORITHMS = {
    "edmonds-karp": edmonds_karp,
    "preflow-push": preflow_push,
}

# Relative threshold below which residual capacities count as saturated.
_RESIDUAL_EPS = 1e-12


class FlowService:
    """Service for the discrete capacity graph pipeline."""

    @staticmethod
    def build_net_graph(space: PointCloudSpace, x: int, y: int, delta: float, L: float = 1.0) -> NetGraph:
        """Directed capacity graph on a δ-net of the whole space.

        Net points i, j are adjacent iff d(i, j) < 4δ. The arc i -> j has
        capacity m(B_δ(i)) R_x(i) / δ + m(B_δ(j)) R_y(j) / δ, so arcs leaving
        x carry only the y-term and arcs entering y only the x-term.

        Args:
            space: The metric measure space.
            x: Source pole.
            y: Sink pole.
            delta: Net scale, 0 < δ < d(x, y). Scales δ >= d(x, y)/4 are flagged.
            L: Truncation parameter, only validated here; the net is not truncated.

        Returns:
            The capacity graph with per-arc capacities.
        """
        x, y = space.check_vertex(x), space.check_vertex(y)
        if x == y:
            raise InputError("poles x and y must be distinct")
        if L < 1:
            raise PreconditionError(f"truncation L must be >= 1, got {L}")
        dxy = space.distance(x, y)
        if not 0 < delta < dxy:
            raise PreconditionError(f"net scale must satisfy 0 < δ < d(x,y)={dxy:g}, got {delta:g}")
        flagged = delta >= dxy / 4
        if flagged:
            logger.warning(f"δ={delta:g} >= d(x,y)/4={dxy / 4:g}: poles may be adjacent at this scale")

        net = MetricSpaceService.delta_net(space, delta, x, y)
        pairs, lengths = FlowService._close_pairs(space, net, 4.0 * delta)
        local_mass = np.zeros(space.n)
        for p in net:
            local_mass[p] = MetricSpaceService.ball_masses(space, int(p), [delta])[0]
        # R_x(x) = R_y(y) = 0 is built into the kernel rows
        out_term = local_mass * MetricSpaceService.riesz_kernel_row(space, x) / delta
        in_term = local_mass * MetricSpaceService.riesz_kernel_row(space, y) / delta
        edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        a, b = edges[:, 0], edges[:, 1]

        graph = NetGraph(
            vertices=np.sort(net),
            edges=edges,
            capacities=out_term[a] + in_term[b],
            lengths=np.asarray(lengths, dtype=float),
            delta=float(delta),
            source=x,
            sink=y,
            scale_flagged=flagged,
            reverse_capacities=out_term[b] + in_term[a],
        )
        if y not in FlowService._reachable(graph, x):
            raise DisconnectedError(f"no discrete path at scale δ={delta:g}")
        logger.info(f"net graph δ={delta:g}: {len(net)} vertices, {graph.n_edges} edges")
        return graph

    @staticmethod
    def _close_pairs(space: PointCloudSpace, net: np.ndarray, reach: float) -> Tuple[List[Tuple[int, int]], List[float]]:
        """Net pairs (i < j) at metric distance strictly below ``reach``."""
        pairs, lengths = [], []
        if space.metric_kind == MetricKind.AMBIENT_EUCLIDEAN:
            pts = space.coords[net]
            found = cKDTree(pts).query_pairs(reach, output_type="ndarray")
            if len(found):
                d = np.linalg.norm(pts[found[:, 0]] - pts[found[:, 1]], axis=1)
                keep = d < reach
                for (a, b), dist in zip(net[found[keep]], d[keep]):
                    pairs.append((min(a, b), max(a, b)))
                    lengths.append(float(dist))
        else:
            position = {int(p): k for k, p in enumerate(net)}
            for a in net:
                row = space.distances_from(int(a), limit=reach)
                close = np.flatnonzero(row < reach)
                for b in close:
                    if b > a and int(b) in position:
                        pairs.append((int(a), int(b)))
                        lengths.append(float(row[b]))
        order = sorted(range(len(pairs)), key=pairs.__getitem__)
        return [pairs[k] for k in order], [lengths[k] for k in order]

    @staticmethod
    def _reachable(net: NetGraph, source: int) -> set:
        adj: Dict[int, List[int]] = {}
        for a, b in net.edges.tolist():
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        seen, queue = {source}, deque([source])
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return seen

    @staticmethod
    def to_digraph(net: NetGraph) -> nx.DiGraph:
        """Two antiparallel arcs per edge with their own capacities."""
        graph = nx.DiGraph()
        graph.add_nodes_from(int(v) for v in net.vertices)
        for (a, b), forward, backward in zip(net.edges.tolist(), net.capacities.tolist(), net.backward.tolist()):
            graph.add_edge(a, b, capacity=forward)
            graph.add_edge(b, a, capacity=backward)
        return graph

    @staticmethod
    def _residual(net: NetGraph, algorithm: str) -> nx.DiGraph:
        try:
            flow_func = FLOW_ALGORITHMS[algorithm]
        except KeyError:
            raise InputError(f"unknown max-flow algorithm '{algorithm}'") from None
        graph = FlowService.to_digraph(net)
        if net.source not in graph or net.sink not in graph:
            raise InputError("source and sink must be net vertices")
        return flow_func(graph, net.source, net.sink, capacity="capacity")

    @staticmethod
    def max_flow(net: NetGraph, algorithm: str = "edmonds-karp") -> Flow:
        """Maximum x-y flow with flow cycles cancelled.

        Args:
            net: The capacity graph.
            algorithm: ``edmonds-karp`` or ``preflow-push``.

        Returns:
            Flow on the directed arcs with positive value.
        """
        residual = FlowService._residual(net, algorithm)
        arcs: Dict[Tuple[int, int], float] = {}
        for u, v, attr in residual.edges(data=True):
            if attr["flow"] > 0 and attr["capacity"] > 0:
                arcs[(u, v)] = float(min(attr["flow"], attr["capacity"]))
        arcs = FlowService._cancel_cycles(arcs)
        value = float(residual.graph["flow_value"])
        logger.debug(f"max flow ({algorithm}) value {value:.12g} on {len(arcs)} arcs")
        return Flow(arcs=arcs, value=value, source=net.source, sink=net.sink)

    @staticmethod
    def _cancel_cycles(arcs: Dict[Tuple[int, int], float]) -> Dict[Tuple[int, int], float]:
        arcs = dict(arcs)
        if not arcs:
            return arcs
        eps = _RESIDUAL_EPS * max(arcs.values())
        support = nx.DiGraph(list(arcs))
        cancelled = 0
        while True:
            try:
                cycle = nx.find_cycle(support)
            except nx.NetworkXNoCycle:
                break
            bottleneck = min(arcs[arc] for arc in cycle)
            for arc in cycle:
                # the bottleneck arc drops to exactly 0
                arcs[arc] -= bottleneck
                if arcs[arc] <= eps:
                    del arcs[arc]
                    support.remove_edge(*arc)
            cancelled += 1
        if cancelled:
            logger.debug(f"cancelled {cancelled} flow cycles")
        return arcs

    @staticmethod
    def min_cut(net: NetGraph, algorithm: str = "edmonds-karp") -> Cut:
        """Minimum cut: vertices reachable from x in the final residual graph.

        Args:
            net: The capacity graph.
            algorithm: ``edmonds-karp`` or ``preflow-push``.

        Returns:
            The source side and its directed cut value.
        """
        residual = FlowService._residual(net, algorithm)
        eps = _RESIDUAL_EPS * (net.max_capacity or 1.0)
        side, queue = {net.source}, deque([net.source])
        while queue:
            u = queue.popleft()
            for v, attr in residual[u].items():
                if v not in side and attr["capacity"] - attr["flow"] > eps:
                    side.add(v)
                    queue.append(v)
        if net.sink in side:
            raise PreconditionError("residual graph still connects source and sink")
        value = FlowService.cut_value(net, side)
        if value == 0:
            logger.warning(f"source component of size {len(side)} is disconnected from the sink")
        return Cut(side=frozenset(side), value=value)

    @staticmethod
    def cut_value(net: NetGraph, side: Iterable[int]) -> float:
        """C(S): total capacity of the arcs leaving S.

        Args:
            net: The capacity graph.
            side: Vertex set containing the source and not the sink.
        """
        side = set(int(v) for v in side)
        if net.source not in side or net.sink in side:
            raise InputError("a cut must contain x and not y")
        crossing = [
            forward if a in side else backward
            for (a, b), forward, backward in zip(net.edges.tolist(), net.capacities.tolist(), net.backward.tolist())
            if (a in side) != (b in side)
        ]
        return float(sum(crossing))

    @staticmethod
    def flow_to_pencil(flow: Flow, net: NetGraph) -> DiscretePencil:
        """Greedy path stripping of an acyclic flow into weighted x-y paths.

        Args:
            flow: An acyclic flow, as returned by ``max_flow``.
            net: The graph the flow lives on.

        Returns:
            Paths with weights summing to 1 and the raw stripped total.
        """
        if flow.value <= 0:
            raise NoPencilError("no pencil at this scale")
        eps = _RESIDUAL_EPS * flow.value
        remaining = {arc: f for arc, f in flow.arcs.items() if f > eps}
        paths: List[Tuple[int, ...]] = []
        raw: List[float] = []
        while True:
            path = FlowService._support_path(remaining, flow.source, flow.sink)
            if path is None:
                break
            steps = list(zip(path[:-1], path[1:]))
            bottleneck = min(remaining[a] for a in steps)
            for arc in steps:
                left = remaining[arc] - bottleneck
                if left <= eps:
                    del remaining[arc]
                else:
                    remaining[arc] = left
            paths.append(tuple(path))
            raw.append(bottleneck)

        total = float(sum(raw))
        if total <= 0:
            raise NoPencilError("no pencil at this scale")
        logger.debug(f"stripped {len(paths)} paths, raw total {total:.12g} vs F={flow.value:.12g}")
        return DiscretePencil(paths=tuple(paths), weights=np.asarray(raw) / total, raw_total=total)

    @staticmethod
    def _support_path(arcs: Dict[Tuple[int, int], float], source: int, sink: int) -> Optional[List[int]]:
        out: Dict[int, List[int]] = {}
        for u, v in sorted(arcs):
            out.setdefault(u, []).append(v)
        parent = {source: None}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            if u == sink:
                break
            for v in out.get(u, ()):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            return None
        path, node = [], sink
        while node is not None:
            path.append(node)
            node = parent[node]
        return path[::-1]

    @staticmethod
    def edge_loads(pencil: DiscretePencil) -> Dict[Tuple[int, int], float]:
        """Raw per-arc mass sum_k w_k F chi_{e in path_k}."""
        loads: Dict[Tuple[int, int], float] = {}
        for path, w in zip(pencil.paths, pencil.weights.tolist()):
            for arc in zip(path[:-1], path[1:]):
                loads[arc] = loads.get(arc, 0.0) + w * pencil.raw_total
        return loads

    @staticmethod
    def pencil_inequality_ratio(
        pencil: DiscretePencil,
        net: NetGraph,
        space: PointCloudSpace,
        g,
        riesz: RieszMeasure,
    ) -> float:
        """Expected ḡ-length of the pencil over sum_z g(z) m^L_{x,y}(z).

        Args:
            pencil: Normalized pencil on the net.
            net: The capacity graph of the pencil.
            space: The metric measure space.
            g: Nonnegative per-vertex field.
            riesz: Riesz measure of the same poles.
        """
        g = np.asarray(g, dtype=float)
        if g.shape != (space.n,) or np.any(g < 0):
            raise InputError("g must be a nonnegative per-vertex field")
        length = {}
        for (a, b), ell in zip(net.edges.tolist(), net.lengths.tolist()):
            length[(a, b)] = length[(b, a)] = ell
        numerator = 0.0
        for path, w in zip(pencil.paths, pencil.weights.tolist()):
            numerator += w * sum((g[a] + g[b]) / 2.0 * length[(a, b)] for a, b in zip(path[:-1], path[1:]))
        denominator = float(np.dot(g, riesz.weights))
        return safe_ratio(numerator, denominator)
