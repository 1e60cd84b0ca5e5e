"""Artifact writers: hashing, CSV and JSONL layout, SVG heatmaps."""

from __future__ import annotations

import json

import numpy as np
import pytest

from eitconvex.render import (
    config_hash,
    grid_rows,
    heatmap_svg,
    write_grid_csv,
    write_jsonl,
)


class TestConfigHash:
    def test_stable_and_order_insensitive(self):
        a = config_hash({"m": 20, "seed": 0})
        b = config_hash({"seed": 0, "m": 20})
        assert a == b
        assert len(a) == 12
        assert all(ch in "0123456789abcdef" for ch in a)

    def test_value_changes_hash(self):
        assert config_hash({"m": 20}) != config_hash({"m": 21})


class TestGridCsv:
    def test_exact_layout(self, tmp_path):
        path = tmp_path / "grid.csv"
        write_grid_csv(
            path,
            ("sigma_1", "sigma_2", "residual"),
            [(0.5, 1.0, 0.125), (2.0, 1.0, 3.0)],
            "abc123def456",
        )
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# config_hash=abc123def456"
        assert lines[1] == "sigma_1,sigma_2,residual"
        assert lines[2] == "0.5,1,0.125"
        assert len(lines) == 4

    def test_float_precision_roundtrips(self, tmp_path):
        value = 1.0 / 3.0
        path = tmp_path / "grid.csv"
        write_grid_csv(path, ("v",), [(value,)], "0" * 12)
        text = path.read_text(encoding="utf-8").splitlines()[2]
        assert float(text) == value

    def test_grid_rows_row_major(self):
        axis1 = np.array([1.0, 2.0])
        axis2 = np.array([10.0, 20.0, 30.0])
        values = np.arange(6, dtype=float).reshape(2, 3)
        rows = list(grid_rows(axis1, axis2, values))
        assert rows[0] == (1.0, 10.0, 0.0)
        assert rows[1] == (1.0, 20.0, 1.0)
        assert rows[3] == (2.0, 10.0, 3.0)
        assert len(rows) == 6

    def test_repeated_writes_identical(self, tmp_path):
        rows = list(grid_rows(np.linspace(0, 1, 3), np.linspace(0, 1, 3), np.eye(3)))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_grid_csv(p1, ("x", "y", "v"), rows, "f" * 12)
        write_grid_csv(p2, ("x", "y", "v"), rows, "f" * 12)
        assert p1.read_bytes() == p2.read_bytes()


class TestJsonl:
    def test_one_sorted_object_per_line(self, tmp_path):
        path = tmp_path / "rows.jsonl"
        write_jsonl(path, [{"b": 1, "a": 2}, {"x": None}])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == '{"a": 2, "b": 1}'
        assert json.loads(lines[1]) == {"x": None}
        assert len(lines) == 2


class TestHeatmap:
    def test_rect_per_cell(self, tmp_path):
        path = tmp_path / "map.svg"
        values = np.abs(np.random.default_rng(0).normal(size=(5, 7))) + 1e-3
        heatmap_svg(path, values, extent=(0.1, 3.0, 0.1, 3.0), clip=(1e-4, 1e1))
        text = path.read_text(encoding="utf-8")
        assert text.startswith("<svg")
        # one rect per cell plus the white background
        assert text.count("<rect") == values.size + 1
        assert text.rstrip().endswith("</svg>")

    def test_clip_must_be_positive_increasing(self, tmp_path):
        values = np.ones((2, 2))
        with pytest.raises(ValueError):
            heatmap_svg(tmp_path / "x.svg", values, (0, 1, 0, 1), clip=(0.0, 1.0))
        with pytest.raises(ValueError):
            heatmap_svg(tmp_path / "x.svg", values, (0, 1, 0, 1), clip=(1.0, 0.1))

    def test_deterministic_bytes(self, tmp_path):
        values = np.linspace(0.01, 10.0, 12).reshape(3, 4)
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        heatmap_svg(p1, values, (0.1, 3.0, 0.1, 3.0), (1e-2, 1e1), title="t")
        heatmap_svg(p2, values, (0.1, 3.0, 0.1, 3.0), (1e-2, 1e1), title="t")
        assert p1.read_bytes() == p2.read_bytes()
