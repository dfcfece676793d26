import csv

import numpy as np
import pytest
from pydantic import ValidationError

from app.models.domain import MetricKind
from app.models.schemas import ExperimentConfig, Provenance, Record, Report, SpaceSource, encode_value
from app.services.errors import InputError
from app.services.flow_service import FlowService
from app.services.gallery_service import GalleryService
from app.services.space_service import MetricSpaceService
from app.storage.pointcloud_io import read_pointcloud, write_net_graph, write_pointcloud
from app.storage.report_io import RECORD_COLUMNS, export, load_report


def _report() -> Report:
    records = [
        Record(command="width", pair=[0, 5], params={"L": 1.0}, outputs={"width": 0.25, "ratio": float("inf")},
               passed=True),
        Record(command="modulus", pair=[0, 5], outputs={"modulus": np.float64(0.5), "sizes": np.arange(3)}),
        Record(command="mincut", pair=[0, 5], error="no discrete path at scale δ=0.1"),
    ]
    return Report(provenance=Provenance(app_name="PI Lab", app_version="1.0.0", space_name="grid-2d"),
                  config={"seed": 0}, records=records)


def test_pointcloud_round_trip(tmp_path):
    space = GalleryService.glued_planes(1, 0.6, 0.2)
    path = write_pointcloud(space, tmp_path / "glued.txt")
    back = read_pointcloud(path)
    assert back.n == space.n
    assert np.array_equal(back.coords, space.coords)
    assert np.array_equal(back.weights, space.weights)
    assert np.array_equal(back.edges, space.edges)
    assert np.array_equal(back.lengths, space.lengths)
    assert back.metric_kind == MetricKind.GRAPH_PATH
    assert back.h == space.h


def test_pointcloud_defaults(tmp_path):
    path = tmp_path / "tri.txt"
    path.write_text("v 10 0 0 1.0\nv 11 3 4 1.0  # far corner\nv 12 3 0 2.0\ne 10 11\ne 11 12 7.5\n")
    space = read_pointcloud(path)
    assert space.lengths.tolist() == [5.0, 7.5]
    assert space.h == 5.0
    assert space.ids.tolist() == [10, 11, 12]
    assert space.metric_kind == MetricKind.AMBIENT_EUCLIDEAN


@pytest.mark.parametrize("content", [
    "",
    "v 0 0.0 1.0\nx 1 2\n",
    "v 0 0.0 1.0\nv 0 1.0 1.0\n",
    "v 0 0.0 1.0\ne 0 3\n",
    "v 0 0.0 1.0\nv 1 0.0 0.0 1.0\n",
    "v 0 0.0 -1.0\n",
    "v 0 zero 1.0\n",
    "metric manhattan\nv 0 0.0 1.0\n",
])
def test_pointcloud_rejects_bad_files(tmp_path, content):
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(InputError):
        read_pointcloud(path)


def test_missing_pointcloud(tmp_path):
    with pytest.raises(InputError):
        read_pointcloud(tmp_path / "nope.txt")


def test_net_dump(tmp_path, grid2d):
    x = MetricSpaceService.nearest_vertex(grid2d, (0.3, 0.5))
    y = MetricSpaceService.nearest_vertex(grid2d, (0.7, 0.5))
    net = FlowService.build_net_graph(grid2d, x, y, 0.08)
    lines = write_net_graph(grid2d, net, tmp_path / "net.txt").read_text().splitlines()
    assert lines[0].startswith("# delta=0.08")
    assert sum(line.startswith("v ") for line in lines) == net.vertices.size
    assert sum(line.startswith("e ") for line in lines) == net.n_edges
    first = next(line for line in lines if line.startswith("e ")).split()
    assert float(first[3]) == pytest.approx(net.capacities[0])
    assert float(first[4]) == pytest.approx(net.reverse_capacities[0])


def test_encode_value():
    assert encode_value({"a": np.float64(float("nan")), 1: [float("-inf"), np.int64(3)]}) == {
        "a": "nan", "1": ["-inf", 3],
    }
    assert encode_value(np.array([True, False])) == [True, False]
    assert encode_value(MetricKind.GRAPH_PATH) == "graph-path"


def test_record_failure_flags():
    assert Record(command="c", passed=False).failed
    assert Record(command="c", error="boom").failed
    assert not Record(command="c").failed
    assert not _report().passed


def test_json_round_trip(tmp_path):
    report = _report()
    back = load_report(export(report, "structured-object", tmp_path / "report.json"))
    assert back == report
    assert back.records[0].outputs["ratio"] == "inf"
    assert back.records[1].outputs["sizes"] == [0, 1, 2]


def test_tsv_export(tmp_path):
    path = export(_report(), "tsv", tmp_path / "report.tsv")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    assert tuple(rows[0]) == RECORD_COLUMNS
    assert len(rows) == 4
    assert all(len(row) == len(RECORD_COLUMNS) for row in rows)
    assert rows[1][RECORD_COLUMNS.index("passed")] == "true"


def test_svg_export_is_reproducible(tmp_path):
    a = export(_report(), "vector-plot", tmp_path / "a.svg").read_text()
    b = export(_report(), "svg", tmp_path / "b.svg").read_text()
    assert a.lstrip().startswith("<?xml") and "<svg" in a
    assert a == b


def test_unknown_format(tmp_path):
    with pytest.raises(InputError):
        export(_report(), "yaml", tmp_path / "report.yaml")


def test_config_accepts_bare_command_names():
    config = ExperimentConfig.model_validate({
        "space": {"gallery": {"kind": "segment", "n": 5}},
        "commands": ["width", {"command": "mincut", "params": {"delta": [0.2]}}],
    })
    assert [c.command for c in config.commands] == ["width", "mincut"]
    assert config.commands[1].params == {"delta": [0.2]}


def test_space_source_needs_exactly_one():
    with pytest.raises(ValidationError):
        SpaceSource()
    with pytest.raises(ValidationError):
        SpaceSource(gallery={"kind": "segment"}, file="cloud.txt")


def test_config_rejects_unknown_fields():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"space": {"file": "a.txt"}, "colour": "red"})
