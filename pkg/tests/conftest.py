import numpy as np
import pytest

from app.models.domain import MetricKind, NetGraph, PointCloudSpace
from app.services.gallery_service import GalleryService


@pytest.fixture(scope="session")
def grid2d() -> PointCloudSpace:
    """Unit square, h = 0.05, ambient Euclidean metric."""
    return GalleryService.euclidean_grid(2, 1.0, 0.05)


@pytest.fixture(scope="session")
def path_grid() -> PointCloudSpace:
    """Unit square, h = 0.1, graph path metric."""
    return GalleryService.euclidean_grid(2, 1.0, 0.1, metric_kind=MetricKind.GRAPH_PATH)


@pytest.fixture(scope="session")
def segment() -> PointCloudSpace:
    return GalleryService.segment(11)


@pytest.fixture(scope="session")
def segment3() -> PointCloudSpace:
    return GalleryService.segment(3)


@pytest.fixture
def two_points() -> PointCloudSpace:
    return PointCloudSpace(
        coords=np.array([[0.0], [1.0]]),
        weights=np.array([1.0, 1.0]),
        edges=np.array([[0, 1]]),
        lengths=np.array([1.0]),
        name="two-points",
    )


def build_net(edges, capacities, source, sink, lengths=None, reverse=None) -> NetGraph:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    vertices = np.unique(np.concatenate([edges.reshape(-1), [source, sink]]))
    return NetGraph(
        vertices=vertices,
        edges=edges,
        capacities=np.asarray(capacities, dtype=float),
        lengths=np.ones(len(edges)) if lengths is None else np.asarray(lengths, dtype=float),
        delta=1.0,
        source=source,
        sink=sink,
        reverse_capacities=None if reverse is None else np.asarray(reverse, dtype=float),
    )


@pytest.fixture
def net_factory():
    return build_net
