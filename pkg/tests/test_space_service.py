import numpy as np
import pytest

from app.models.domain import MetricKind, PointCloudSpace
from app.services.errors import InputError, PreconditionError
from app.services.gallery_service import GalleryService
from app.services.space_service import MetricSpaceService, as_mask


def test_rejects_nonpositive_weights():
    with pytest.raises(InputError):
        PointCloudSpace(coords=np.zeros((2, 1)), weights=[1.0, 0.0], edges=[[0, 1]], lengths=[1.0])


def test_rejects_self_loops():
    with pytest.raises(InputError):
        PointCloudSpace(coords=np.zeros((2, 1)), weights=[1.0, 1.0], edges=[[1, 1]], lengths=[1.0])


def test_edges_are_stored_with_ascending_endpoints():
    space = PointCloudSpace(coords=[[0.0], [1.0]], weights=[1.0, 1.0], edges=[[1, 0]], lengths=[1.0])
    assert space.edges.tolist() == [[0, 1]]


def test_check_vertex_out_of_range(segment):
    with pytest.raises(InputError):
        segment.check_vertex(segment.n)


def test_distance_rows_are_read_only(grid2d):
    row = grid2d.distances_from(0)
    with pytest.raises(ValueError):
        row[0] = 1.0


def test_graph_path_distance_counts_edges(path_grid):
    # opposite corners of a 4-connected grid: two full sides
    assert path_grid.distance(0, path_grid.n - 1) == pytest.approx(2.0)


def test_as_mask_accepts_ids_and_masks(segment):
    mask = as_mask(segment, [0, 3])
    assert mask.sum() == 2 and mask[3]
    assert as_mask(segment, mask) is mask
    with pytest.raises(InputError):
        as_mask(segment, [segment.n])


def test_ball_is_open(segment):
    assert MetricSpaceService.ball(segment, 0, 0.15).tolist() == [0, 1]
    with pytest.raises(PreconditionError):
        MetricSpaceService.ball(segment, 0, 0.0)


def test_grid_mass_approximates_area(grid2d):
    # 21 x 21 vertices of weight 0.05^2
    assert grid2d.total_mass == pytest.approx(1.1025)
    assert abs(grid2d.total_mass - 1.0) <= 4 * grid2d.h


def test_ball_masses_match_ball_measure(grid2d):
    center = MetricSpaceService.nearest_vertex(grid2d, (0.5, 0.5))
    radii = [0.12, 0.26, 0.33]
    masses = MetricSpaceService.ball_masses(grid2d, center, radii)
    for r, m in zip(radii, masses):
        assert m == pytest.approx(MetricSpaceService.measure(grid2d, MetricSpaceService.ball(grid2d, center, r)))


def test_ball_mass_profile_is_open_mass(segment):
    dists, masses = MetricSpaceService.ball_mass_profile(segment, 0)
    assert dists[0] == 0.0
    assert masses[0] == 0.0
    assert masses[1] == pytest.approx(1.0 / segment.n)


def test_nearest_vertex(grid2d):
    i = MetricSpaceService.nearest_vertex(grid2d, (0.49, 0.52))
    assert np.allclose(grid2d.coords[i], (0.5, 0.5))
    with pytest.raises(InputError):
        MetricSpaceService.nearest_vertex(grid2d, (0.5,))


def test_riesz_kernel_two_points(two_points):
    assert MetricSpaceService.riesz_kernel(two_points, 0, 1) == pytest.approx(1.0)
    assert MetricSpaceService.riesz_kernel(two_points, 0, 0) == 0.0


def test_riesz_kernel_matches_planar_density():
    grid = GalleryService.euclidean_grid(2, 1.0, 0.01)
    x = MetricSpaceService.nearest_vertex(grid, (0.5, 0.5))
    z = MetricSpaceService.nearest_vertex(grid, (0.8, 0.5))
    assert MetricSpaceService.riesz_kernel(grid, x, z) == pytest.approx(1.0 / (np.pi * 0.3), rel=0.1)


def test_doubling_on_planar_grid():
    grid = GalleryService.euclidean_grid(2, 1.0, 0.02)
    center = MetricSpaceService.nearest_vertex(grid, (0.5, 0.5))
    stats = MetricSpaceService.doubling_estimate(grid, [center], [0.1, 0.2])
    assert stats.doubling_estimate == pytest.approx(4.0, rel=0.15)
    assert stats.doubling_argmax[0] == center


@pytest.mark.slow
def test_doubling_on_cubic_grid():
    grid = GalleryService.euclidean_grid(3, 1.2, 0.04)
    center = MetricSpaceService.nearest_vertex(grid, (0.6, 0.6, 0.6))
    stats = MetricSpaceService.doubling_estimate(grid, [center], [0.2])
    assert stats.doubling_estimate == pytest.approx(8.0, rel=0.15)


def test_doubling_rejects_nonpositive_radius(segment):
    with pytest.raises(PreconditionError):
        MetricSpaceService.doubling_estimate(segment, [0], [0.0])


def test_delta_net_packing_and_covering(grid2d):
    x, y = 0, grid2d.n - 1
    delta = 0.15
    net = MetricSpaceService.delta_net(grid2d, delta, x, y)
    assert net[:2].tolist() == [x, y]
    pts = grid2d.coords[net]
    gaps = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() >= delta
    cover = np.min(np.linalg.norm(grid2d.coords[:, None, :] - pts[None, :, :], axis=2), axis=1)
    assert cover.max() < delta


@pytest.mark.parametrize("delta", [0.0, 2.0])
def test_delta_net_scale_must_be_below_pole_distance(segment, delta):
    with pytest.raises(PreconditionError):
        MetricSpaceService.delta_net(segment, delta, 0, segment.n - 1)


def test_local_lip_of_coordinate(grid2d):
    lip = MetricSpaceService.local_lip(grid2d, grid2d.coords[:, 0])
    assert np.allclose(lip, 1.0)


def test_local_lip_rejects_non_finite(segment):
    u = np.zeros(segment.n)
    u[3] = np.inf
    with pytest.raises(PreconditionError):
        MetricSpaceService.local_lip(segment, u)


def test_quasiconvexity_of_axis_grid(grid2d):
    stats = MetricSpaceService.quasiconvexity_estimate(grid2d, [(0, grid2d.n - 1), (0, 5)])
    assert stats.quasiconvexity_estimate == pytest.approx(np.sqrt(2.0))
    assert stats.quasiconvexity_argmax == (0, grid2d.n - 1)


def test_quasiconvexity_of_path_metric_is_one(path_grid):
    assert MetricSpaceService.quasiconvexity_estimate(path_grid, [(0, 7)]).quasiconvexity_estimate == 1.0


def test_quasiconvexity_disconnected_is_infinite():
    space = PointCloudSpace(
        coords=[[0.0], [1.0], [2.0]], weights=[1.0, 1.0, 1.0], edges=[[0, 1]], lengths=[1.0],
    )
    assert MetricSpaceService.quasiconvexity_estimate(space, [(0, 2)]).quasiconvexity_estimate == float("inf")


def test_boundary_vertices_of_square(grid2d):
    assert MetricSpaceService.boundary_vertices(grid2d).size == 80


def test_sample_vertices_is_deterministic(grid2d):
    a = MetricSpaceService.sample_vertices(grid2d, 10, seed=3, margin=0.2)
    b = MetricSpaceService.sample_vertices(grid2d, 10, seed=3, margin=0.2)
    assert a.tolist() == b.tolist()
    inner = grid2d.coords[a]
    assert np.all((inner > 0.2 - 1e-9) & (inner < 0.8 + 1e-9))


def test_sample_vertices_with_impossible_margin(segment):
    with pytest.raises(PreconditionError):
        MetricSpaceService.sample_vertices(segment, 3, seed=0, margin=1.0)


def test_graph_path_grid_metric_kind(path_grid):
    assert path_grid.metric_kind == MetricKind.GRAPH_PATH
