import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qswitch.artifacts import CSV_HEADER, MAX_CHART_POINTS, atomic_write, svg_chart, to_json, trace_csv

SVG = "{http://www.w3.org/2000/svg}"


class TestAtomicWrite:
    def test_creates_parents_and_writes(self, tmp_path):
        path = atomic_write(tmp_path / "a" / "b.txt", "hello")
        assert path.read_text() == "hello"

    def test_overwrite_leaves_no_temp_files(self, tmp_path):
        atomic_write(tmp_path / "f.txt", "one")
        atomic_write(tmp_path / "f.txt", b"two")
        assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]
        assert (tmp_path / "f.txt").read_text() == "two"

    def test_failure_keeps_old_content(self, tmp_path, monkeypatch):
        target = tmp_path / "f.txt"
        atomic_write(target, "old")

        def boom(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr("qswitch.artifacts.os.replace", boom)
        with pytest.raises(OSError):
            atomic_write(target, "new")
        assert target.read_text() == "old"
        assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]


def test_trace_csv_format():
    text = trace_csv([0.5, 2.0, 1 / 3], [0.0, 0.1, 0.25])
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1:] == ["1,0.5,0", "2,2,0.1", "3,0.3333333333,0.25"]
    assert text.endswith("\n")


def test_to_json_is_canonical():
    assert to_json({"b": 1, "a": [1, 2]}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1\n}\n'


def _polylines(svg):
    root = ET.fromstring(svg)
    return root, root.findall(f".//{SVG}polyline")


def test_svg_is_well_formed_with_one_line_per_curve():
    rng = np.random.default_rng(0)
    svg = svg_chart([("MEW", rng.random(50).cumsum()), ("1-Approx MEW", rng.random(50))], title="t")
    root, lines = _polylines(svg)
    assert root.tag == f"{SVG}svg" and len(lines) == 2
    assert "1-Approx MEW" in svg


def test_svg_zero_data_is_flat():
    _, lines = _polylines(svg_chart([("zero", np.zeros(10))], title="flat"))
    ys = {pt.split(",")[1] for pt in lines[0].get("points").split()}
    assert len(ys) == 1


def test_svg_downsamples_long_curves():
    _, lines = _polylines(svg_chart([("long", np.arange(20_000.0))], title="long"))
    assert len(lines[0].get("points").split()) <= MAX_CHART_POINTS + 1
