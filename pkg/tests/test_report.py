"""Tests for report metadata, JSON output and CSV dumps."""
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.catalog import catalog_field
from steadyflow.config import Tolerances
from steadyflow.fields import Domain, sample_grid
from steadyflow.report import (ReportMeta, TOOL_NAME, dumps, read_grid_csv, spec_hash,
                               to_jsonable, write_grid_csv, write_json, write_table_csv)


@dataclass
class _Sample:
    value: float
    hidden: list = field(default_factory=list, repr=False)


class TestMeta:
    def test_hash_ignores_layout(self):
        """Equivalent spec texts hash the same."""
        assert spec_hash("name=radial-poly; params={p:2}") == \
            spec_hash("name=radial-poly;params={ p : 2 }")
        assert spec_hash("name=radial-poly; params={p:2}") != \
            spec_hash("name=radial-poly; params={p:3}")
        assert spec_hash(None) == ""

    def test_build(self):
        """Metadata records the tool, canonical spec and tolerances."""
        meta = ReportMeta.build("name=sinsin", 128, Tolerances(tol_sym=1e-6), timestamp=False)
        assert meta.tool == TOOL_NAME
        assert meta.spec == "name=sinsin; params={}; domain={}"
        assert meta.tolerances["tol_sym"] == 1e-6
        assert meta.timestamp is None
        assert ReportMeta.build("name=sinsin").timestamp.endswith("Z")


class TestJson:
    def test_rounding_and_nonfinite(self):
        """Floats keep 15 significant digits; non-finite values become null."""
        out = to_jsonable({"a": 0.1 + 0.2, "b": float("nan"), "c": np.float32(1.5),
                           "d": np.arange(3), "e": np.bool_(True)})
        assert out == {"a": 0.3, "b": None, "c": 1.5, "d": [0, 1, 2], "e": True}

    def test_dataclasses_and_frames(self):
        """Dataclass fields hidden from repr are left out; frames become records."""
        assert to_jsonable(_Sample(2.0, [1])) == {"value": 2.0}
        frame = pd.DataFrame({"x": [1.0, 2.0]})
        assert to_jsonable(frame) == [{"x": 1.0}, {"x": 2.0}]
        assert to_jsonable(Domain.disk())["kind"] == "disk"

    def test_write_json_is_sorted(self, tmp_path):
        """JSON output has sorted keys and is reproducible."""
        report = {"z": 1, "a": {"y": 2.0, "b": None}}
        path = write_json(report, tmp_path / "out" / "report.json")
        text = path.read_text(encoding="utf-8")
        assert text.index('"a"') < text.index('"z"')
        assert json.loads(text) == {"a": {"b": None, "y": 2.0}, "z": 1}
        assert text.rstrip("\n") == dumps(report)


class TestCsv:
    def test_grid_roundtrip(self, tmp_path):
        """Grid dumps keep the header and the masked cells."""
        grid = sample_grid(catalog_field("radial-poly"), 32)
        path = write_grid_csv(grid, tmp_path / "grid.csv")
        head, values = read_grid_csv(path)
        assert (head["nx"], head["ny"]) == (32, 32)
        assert head["dx"] == pytest.approx(grid.dx)
        np.testing.assert_array_equal(np.isnan(values), grid.mask)
        np.testing.assert_allclose(values[~grid.mask], grid.values[~grid.mask], rtol=0, atol=0)

    def test_missing_header(self, tmp_path):
        """Files without the grid header are refused."""
        path = tmp_path / "plain.csv"
        path.write_text("1,2\n3,4\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_grid_csv(path)

    def test_table(self, tmp_path):
        """Row dicts are written as a CSV table."""
        path = write_table_csv([{"k": 2, "real": 1.0}, {"k": 3, "real": 0.5}], tmp_path / "t.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["k", "real"]
        assert frame["real"].tolist() == [1.0, 0.5]
