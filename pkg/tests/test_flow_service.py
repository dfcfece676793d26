from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from app.models.domain import MetricKind, PointCloudSpace
from app.services.errors import DisconnectedError, InputError, NoPencilError, PreconditionError
from app.services.flow_service import FlowService
from app.services.gallery_service import GalleryService
from app.services.riesz_service import RieszService
from app.services.space_service import MetricSpaceService


def _brute_force_cut(net):
    middle = [int(v) for v in net.vertices if v not in (net.source, net.sink)]
    best = np.inf
    for size in range(len(middle) + 1):
        for subset in combinations(middle, size):
            best = min(best, FlowService.cut_value(net, {net.source, *subset}))
    return best


def _random_net(factory, seed, n=12, p=0.35, directed=False):
    rng = np.random.default_rng(seed)
    edges = [(a, b) for a, b in combinations(range(n), 2) if rng.random() < p]
    edges.append((0, 1))
    edges = sorted(set(edges))
    reverse = rng.uniform(0.1, 1.0, len(edges)) if directed else None
    return factory(edges, rng.uniform(0.1, 1.0, len(edges)), 0, n - 1, reverse=reverse)


def test_single_edge(net_factory):
    net = net_factory([(0, 1)], [2.5], 0, 1)
    assert FlowService.max_flow(net).value == pytest.approx(2.5)
    cut = FlowService.min_cut(net)
    assert cut.side == frozenset({0})
    assert cut.value == pytest.approx(2.5)


def test_diamond_pencil(net_factory):
    net = net_factory([(0, 1), (0, 2), (1, 3), (2, 3)], [1.0, 1.0, 1.0, 1.0], 0, 3)
    flow = FlowService.max_flow(net)
    assert flow.value == pytest.approx(2.0)
    pencil = FlowService.flow_to_pencil(flow, net)
    assert sorted(pencil.paths) == [(0, 1, 3), (0, 2, 3)]
    assert pencil.weights == pytest.approx([0.5, 0.5])
    assert pencil.raw_total == pytest.approx(2.0)


@pytest.mark.parametrize("directed", [False, True])
@pytest.mark.parametrize("seed", range(6))
def test_max_flow_equals_brute_force_min_cut(net_factory, seed, directed):
    net = _random_net(net_factory, seed, directed=directed)
    expected = _brute_force_cut(net)
    flow = FlowService.max_flow(net)
    cut = FlowService.min_cut(net)
    assert flow.value == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert cut.value == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert net.source in cut.side and net.sink not in cut.side


@pytest.mark.parametrize("seed", range(6))
def test_algorithms_agree(net_factory, seed):
    net = _random_net(net_factory, 100 + seed)
    a = FlowService.max_flow(net, "edmonds-karp").value
    b = FlowService.max_flow(net, "preflow-push").value
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_stripping_reproduces_the_flow(net_factory, seed):
    net = _random_net(net_factory, 200 + seed)
    flow = FlowService.max_flow(net)
    if flow.value <= 0:
        pytest.skip("poles disconnected in this sample")
    pencil = FlowService.flow_to_pencil(flow, net)
    assert pencil.raw_total == pytest.approx(flow.value, rel=1e-9)
    assert pencil.weights.sum() == pytest.approx(1.0)
    loads = FlowService.edge_loads(pencil)
    for arc, value in flow.arcs.items():
        assert loads.get(arc, 0.0) == pytest.approx(value, rel=1e-9, abs=1e-12)
    for path in pencil.paths:
        assert path[0] == net.source and path[-1] == net.sink
        assert len(set(path)) == len(path)


def test_flow_has_no_cycles(net_factory):
    net = _random_net(net_factory, 7, p=0.5)
    flow = FlowService.max_flow(net)
    assert nx.is_directed_acyclic_graph(nx.DiGraph(list(flow.arcs)))


def test_cancel_cycles_removes_loop():
    arcs = {(0, 1): 1.0, (1, 2): 1.0, (2, 1): 0.5, (2, 3): 1.0}
    out = FlowService._cancel_cycles(arcs)
    assert (2, 1) not in out
    assert out[(1, 2)] == pytest.approx(0.5)


def test_zero_flow_has_no_pencil(net_factory):
    net = net_factory([(0, 1), (2, 3)], [1.0, 1.0], 0, 3)
    flow = FlowService.max_flow(net)
    assert flow.value == 0.0
    with pytest.raises(NoPencilError):
        FlowService.flow_to_pencil(flow, net)
    assert FlowService.min_cut(net).value == 0.0


def test_cut_value_requires_a_proper_side(net_factory):
    net = net_factory([(0, 1)], [1.0], 0, 1)
    with pytest.raises(InputError):
        FlowService.cut_value(net, {0, 1})


def test_unknown_algorithm(net_factory):
    net = net_factory([(0, 1)], [1.0], 0, 1)
    with pytest.raises(InputError):
        FlowService.max_flow(net, "push-relabel-2")


def test_net_graph_on_grid(grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    net = FlowService.build_net_graph(grid2d, x, y, 0.08)
    assert x in net.vertices and y in net.vertices
    assert np.all(net.capacities >= 0) and np.all(net.reverse_capacities >= 0)
    assert np.all(net.lengths < 4 * 0.08)
    assert not net.scale_flagged
    # the net covers the whole space, not only a ball around x
    full = MetricSpaceService.delta_net(grid2d, 0.08, x, y)
    assert np.array_equal(net.vertices, np.sort(full))


def test_net_graph_capacity_formula(segment3):
    # x = 0, z = 0.5, y = 1 with weights 1/3: every kernel value is 1.5
    net = FlowService.build_net_graph(segment3, 0, 2, 0.2)
    assert net.edges.tolist() == [[0, 1], [1, 2]]
    # x -> z keeps only the y-term, z -> y only the x-term
    assert net.capacities == pytest.approx([2.5, 2.5])
    assert net.reverse_capacities == pytest.approx([5.0, 5.0])
    assert FlowService.max_flow(net).value == pytest.approx(2.5)
    cut = FlowService.min_cut(net)
    assert cut.side == frozenset({0})
    assert cut.value == pytest.approx(2.5)


def test_net_graph_capacity_on_grid(grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    delta = 0.1
    net = FlowService.build_net_graph(grid2d, x, y, delta)
    rx = MetricSpaceService.riesz_kernel_row(grid2d, x)
    ry = MetricSpaceService.riesz_kernel_row(grid2d, y)
    for k in (0, net.n_edges // 2, net.n_edges - 1):
        a, b = net.edges[k]
        ma = MetricSpaceService.ball_masses(grid2d, a, [delta])[0]
        mb = MetricSpaceService.ball_masses(grid2d, b, [delta])[0]
        assert net.capacities[k] == pytest.approx((ma * rx[a] + mb * ry[b]) / delta)
        assert net.reverse_capacities[k] == pytest.approx((mb * rx[b] + ma * ry[a]) / delta)


def test_directed_cut_value(net_factory):
    net = net_factory([(0, 1), (1, 2)], [1.0, 2.0], 0, 2, reverse=[10.0, 20.0])
    assert FlowService.cut_value(net, {0}) == pytest.approx(1.0)
    assert FlowService.cut_value(net, {0, 1}) == pytest.approx(2.0)
    # only arcs leaving S count
    assert FlowService.cut_value(net, {0, 3}) == pytest.approx(1.0)


def test_directed_min_cut_uses_forward_arcs(net_factory):
    net = net_factory([(0, 1), (1, 2)], [3.0, 1.0], 0, 2, reverse=[0.5, 7.0])
    assert FlowService.max_flow(net).value == pytest.approx(1.0)
    cut = FlowService.min_cut(net)
    assert cut.side == frozenset({0, 1})
    assert cut.value == pytest.approx(1.0)


def test_net_scale_must_be_below_pole_distance(grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    with pytest.raises(PreconditionError):
        FlowService.build_net_graph(grid2d, x, y, 0.5)


def test_coarse_scale_is_flagged(grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    assert FlowService.build_net_graph(grid2d, x, y, 0.15).scale_flagged


def test_net_graph_disconnected():
    grid = GalleryService.euclidean_grid(2, 1.0, 0.1)
    # two far apart islands
    space = PointCloudSpace(
        coords=np.vstack([grid.coords, grid.coords + 5.0]),
        weights=np.concatenate([grid.weights, grid.weights]),
        edges=np.vstack([grid.edges, grid.edges + grid.n]),
        lengths=np.concatenate([grid.lengths, grid.lengths]),
        metric_kind=MetricKind.AMBIENT_EUCLIDEAN,
        h=0.1,
    )
    with pytest.raises(DisconnectedError):
        FlowService.build_net_graph(space, 0, grid.n, 0.5)


def test_pencil_inequality_ratio_is_finite(grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    net = FlowService.build_net_graph(grid2d, x, y, 0.08)
    pencil = FlowService.flow_to_pencil(FlowService.max_flow(net), net)
    riesz = RieszService.riesz_measure(grid2d, x, y, 1.0)
    ratio = FlowService.pencil_inequality_ratio(pencil, net, grid2d, np.ones(grid2d.n), riesz)
    assert 0 < ratio < np.inf
    with pytest.raises(InputError):
        FlowService.pencil_inequality_ratio(pencil, net, grid2d, -np.ones(grid2d.n), riesz)


def _min_cuts(space, source, sink, deltas):
    x = MetricSpaceService.nearest_vertex(space, source)
    y = MetricSpaceService.nearest_vertex(space, sink)
    cuts = []
    for delta in deltas:
        net = FlowService.build_net_graph(space, x, y, delta)
        cuts.append((net, FlowService.min_cut(net, "preflow-push")))
    return cuts


@pytest.fixture(scope="module")
def grid_cuts():
    grid = GalleryService.euclidean_grid(2, 1.8, 0.0125)
    return _min_cuts(grid, (0.4, 0.9), (1.4, 0.9), (0.1, 0.05, 0.025))


@pytest.fixture(scope="module")
def carpet_cuts():
    carpet = GalleryService.carpet_like(2, [1 / 3, 1 / 9], 0.01)
    return _min_cuts(carpet, (0.1, 0.5), (0.9, 0.5), (0.1, 0.05))


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="arcs leaving x carry only the y-term, so the cut around x shrinks like δ")
def test_grid_min_cut_is_stable_under_refinement(grid_cuts):
    values = [cut.value for _, cut in grid_cuts]
    assert max(values) <= 2 * min(values)


@pytest.mark.slow
def test_grid_min_cut_is_the_cut_around_a_pole(grid_cuts):
    for net, cut in grid_cuts:
        around_x = FlowService.cut_value(net, {net.source})
        around_y = FlowService.cut_value(net, set(net.vertices.tolist()) - {net.sink})
        assert cut.value == pytest.approx(min(around_x, around_y), rel=1e-6)
    coarse, fine = grid_cuts[0][1].value, grid_cuts[-1][1].value
    assert coarse > 2 * fine


@pytest.mark.slow
def test_carpet_min_cut_is_positive(carpet_cuts):
    for net, cut in carpet_cuts:
        assert cut.value > 0
        assert net.source in cut.side and net.sink not in cut.side


@pytest.mark.slow
@pytest.mark.xfail(strict=False, reason="arcs leaving x carry only the y-term, so the cut around x shrinks like δ")
def test_carpet_min_cut_is_stable_under_refinement(carpet_cuts):
    values = [cut.value for _, cut in carpet_cuts]
    assert max(values) <= 2 * min(values)


@pytest.mark.slow
def test_pencil_constant_is_stable_under_refinement():
    grid = GalleryService.euclidean_grid(2, 1.6, 0.02)
    x = MetricSpaceService.nearest_vertex(grid, (0.3, 0.8))
    y = MetricSpaceService.nearest_vertex(grid, (1.3, 0.8))
    riesz = RieszService.riesz_measure(grid, x, y, 1.0)
    rng = np.random.default_rng(8)
    samples = [rng.random(grid.n) for _ in range(20)]
    constants = []
    for delta in (0.1, 0.05):
        net = FlowService.build_net_graph(grid, x, y, delta)
        pencil = FlowService.flow_to_pencil(FlowService.max_flow(net, "preflow-push"), net)
        constants.append(max(FlowService.pencil_inequality_ratio(pencil, net, grid, g, riesz) for g in samples))
    assert 0 < min(constants)
    assert max(constants) <= 2 * min(constants)
