import json
import os

import numpy as np
import pytest

from sparsegev.errors import ParseError
from sparsegev.graph import DependencyGraph
from sparsegev.io import (atomic_write, dump_json, format_panel_csv, graph_document, parse_panel_csv,
                          read_csv_metadata, read_json, read_panel_csv, truth_document, truth_from_document)
from sparsegev.model import GroundTruthGraph, TimeSeriesPanel


def test_panel_csv_round_trip_is_bit_exact():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(25, 3)) * np.array([1e-300, 1.0, 1e300])
    v[0, 1] = 0.1 + 0.2  # not representable in short decimal
    panel = TimeSeriesPanel(["a", "b,c", "d"], v)
    back = parse_panel_csv(format_panel_csv(panel, {"seed": 3}))
    assert back.names == panel.names
    assert np.array_equal(back.values, panel.values)


def test_metadata_line_is_skipped_and_recoverable():
    text = format_panel_csv(TimeSeriesPanel.from_array(np.ones((2, 1))), {"seed": 7, "lag": 2})
    assert text.startswith("# config: ")
    assert read_csv_metadata(text) == {"lag": 2, "seed": 7}
    assert read_csv_metadata("a\n1\n") is None


@pytest.mark.parametrize("text,where", [
    ("", "line 1"),
    ("a,,b\n1,2,3\n", "line 1, column 2"),
    ("a,b,a\n1,2,3\n", "line 1, column 3"),
    ("a,b\n1,2\n3\n", "line 3"),
    ("a,b\n1,2\n3,x\n", "line 3, column 2"),
    ("a,b\n1,\n", "line 2, column 2"),
    ("a,b\n1,nan\n", "line 2, column 2"),
    ("a,b\n1,2\n\n3,4\n", "line 3"),
    ("# note\na,b\n1,inf\n", "line 3, column 2"),
    ("a,b\n", "no data rows"),
])
def test_parse_errors_carry_location(text, where):
    with pytest.raises(ParseError) as info:
        parse_panel_csv(text, "f.csv")
    assert where in str(info.value)


def test_trailing_blank_lines_are_accepted():
    p = parse_panel_csv("a,b\n1,2\n3,4\n\n\n")
    assert p.T == 2


def test_read_panel_rejects_binary(tmp_path):
    f = tmp_path / "bin.csv"
    f.write_bytes(b"\xff\xfe\x00\x81")
    with pytest.raises(ParseError):
        read_panel_csv(f)


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write(target, "one")
    atomic_write(target, "two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["out.txt"]


def test_json_documents(tmp_path):
    g = DependencyGraph.from_scores(np.array([[0.0, 0.5], [0.0, 0.2]]),
                                    lag_weights=np.array([[[0.0], [0.5]], [[0.0], [-0.2]]]))
    doc = graph_document(g, ["x", "y"], {"seed": 0})
    assert doc["edges"] == [{"src": 1, "dst": 0, "lag": 1, "weight": 0.5},
                            {"src": 1, "dst": 1, "lag": 1, "weight": -0.2}]
    truth = GroundTruthGraph(np.array([[False, True], [False, False]]))
    back = truth_from_document(json.loads(dump_json(truth_document(truth, ["x", "y"]))))
    assert np.array_equal(back.adjacency, truth.adjacency)
    with pytest.raises(ParseError):
        truth_from_document({"nodes": ["x"], "edges": [{"src": 0}]})
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "a": 1,\n}')
    with pytest.raises(ParseError, match="line 3"):
        read_json(bad)
    assert dump_json({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'


def test_three_by_two_file():
    p = parse_panel_csv("u,v\n1,2\n3,4\n5,6\n")
    assert p.names == ["u", "v"] and p.values.shape == (3, 2)
    np.testing.assert_array_equal(p.values, [[1, 2], [3, 4], [5, 6]])
