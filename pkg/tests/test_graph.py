import numpy as np
import pytest

from qnet.geometry import RngStream, sample_disk
from qnet.graph import GraphFormatError, SpatialGraph, canonical_edges


def test_canonical_edges_sorts_and_dedups():
    e = canonical_edges([(3, 1), (1, 3), (0, 2)])
    assert e.tolist() == [[0, 2], [1, 3]]


def test_rejects_self_loops_and_out_of_range():
    with pytest.raises(ValueError):
        SpatialGraph(np.zeros((3, 2)), [(1, 1)])
    with pytest.raises(ValueError):
        SpatialGraph(np.zeros((3, 2)), [(0, 3)])


def test_round_trip_bit_exact(tmp_path):
    pos = sample_disk(50, 1234.5, RngStream(8))
    g = SpatialGraph(pos, [(0, 1), (4, 2), (49, 10)], layer="photonic")
    g.write(tmp_path / "g.edges", tmp_path / "g.pos")
    h = SpatialGraph.read(tmp_path / "g.edges", tmp_path / "g.pos")
    assert np.array_equal(h.positions, g.positions)
    assert np.array_equal(h.edges, g.edges)
    assert h.layer == "photonic" and h.coords == "planar"
    assert (tmp_path / "g.edges").read_text().splitlines()[0] == "# nodes=50 edges=3 layer=photonic coords=planar"
    h.write(tmp_path / "h.edges", tmp_path / "h.pos")
    assert (tmp_path / "h.edges").read_bytes() == (tmp_path / "g.edges").read_bytes()
    assert (tmp_path / "h.pos").read_bytes() == (tmp_path / "g.pos").read_bytes()


def test_geo_round_trip(tmp_path):
    g = SpatialGraph(np.array([[48.85, 2.35], [52.52, 13.405]]), [(0, 1)], coords="geo")
    g.write(tmp_path / "e.edges", tmp_path / "e.pos")
    h = SpatialGraph.read(tmp_path / "e.edges", tmp_path / "e.pos")
    assert h.coords == "geo"
    assert np.array_equal(h.positions, g.positions)


@pytest.mark.parametrize(
    "body, line",
    [
        ("# nodes=3\n0\t1\n1\tx\n", 3),
        ("# nodes=3\n0\t1\n1\t7\n", 3),
        ("# nodes=3\n0 1\n", 2),
        ("0\t1\n", 1),
        ("# nodes=3\n2\t2\n", 2),
    ],
)
def test_malformed_files_report_line(tmp_path, body, line):
    p = tmp_path / "bad.edges"
    p.write_text(body)
    with pytest.raises(GraphFormatError) as exc:
        SpatialGraph.read(p)
    assert exc.value.lineno == line


def test_subgraph_remaps():
    g = SpatialGraph.from_edges(5, [(0, 4), (1, 2), (2, 4)])
    sub, old = g.subgraph([2, 4])
    assert old.tolist() == [2, 4]
    assert sub.edges.tolist() == [[0, 1]]
