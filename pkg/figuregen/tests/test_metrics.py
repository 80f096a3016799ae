"""Input parsing and schema validation."""

import json

import numpy as np
import pytest

from hazardfigs.metrics import MetricsFrame, SchemaError, load_grid, load_summary, load_truth_beta

from helpers import HEADER, write_grid, write_metrics, write_summary


class TestMetricsFrame:
    def test_parses_all_columns(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics(path, rounds=15)
        frame = MetricsFrame.from_csv(str(path))
        assert list(frame.rounds) == list(range(1, 16))
        assert frame.beta.shape == (15, 12)
        assert frame.avg_nll[0] > frame.avg_nll[-1]

    def test_rejects_wrong_header(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("round,avg_nll\n1,2.0\n")
        with pytest.raises(SchemaError):
            MetricsFrame.from_csv(str(path))

    def test_rejects_empty_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(HEADER + "\n")
        with pytest.raises(SchemaError):
            MetricsFrame.from_csv(str(path))

    def test_rejects_non_monotone_rounds(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics(path, rounds=5)
        lines = path.read_text().splitlines()
        lines[3], lines[4] = lines[4], lines[3]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError):
            MetricsFrame.from_csv(str(path))

    def test_rejects_rounds_not_starting_at_one(self, tmp_path):
        path = tmp_path / "m.csv"
        write_metrics(path, rounds=5)
        lines = path.read_text().splitlines()
        path.write_text("\n".join([lines[0]] + lines[2:]) + "\n")
        with pytest.raises(SchemaError):
            MetricsFrame.from_csv(str(path))


class TestSummary:
    def test_load(self, tmp_path):
        path = tmp_path / "s.json"
        write_summary(path, users=500)
        doc = load_summary(str(path))
        assert doc["users"] == 500

    def test_rejects_wrong_format_tag(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"format": "nope", "users": 1}))
        with pytest.raises(SchemaError):
            load_summary(str(path))

    def test_rejects_missing_keys(self, tmp_path):
        path = tmp_path / "s.json"
        path.write_text(json.dumps({"format": "fedhazard-summary-v1", "users": 1}))
        with pytest.raises(SchemaError):
            load_summary(str(path))


class TestTruthBeta:
    def test_load(self, tmp_path):
        path = tmp_path / "beta.json"
        path.write_text(json.dumps({"format": "fedhazard-beta-v1", "beta": [0.1] * 12}))
        assert np.allclose(load_truth_beta(str(path)), 0.1)

    def test_rejects_wrong_length(self, tmp_path):
        path = tmp_path / "beta.json"
        path.write_text(json.dumps({"format": "fedhazard-beta-v1", "beta": [0.1] * 11}))
        with pytest.raises(SchemaError):
            load_truth_beta(str(path))


class TestGrid:
    def test_round_trip(self, tmp_path):
        write_grid(tmp_path / "g.csv", tmp_path / "g.json", "0->1", 1, 2)
        grid, meta = load_grid(str(tmp_path / "g.csv"), str(tmp_path / "g.json"))
        assert grid.shape == (12, 12)
        assert meta["transition"] == "0->1"

    def test_rejects_shape_mismatch(self, tmp_path):
        write_grid(tmp_path / "g.csv", tmp_path / "g.json", "0->1", 1, 2)
        meta = json.loads((tmp_path / "g.json").read_text())
        meta["resolution"] = 5
        (tmp_path / "g.json").write_text(json.dumps(meta))
        with pytest.raises(SchemaError):
            load_grid(str(tmp_path / "g.csv"), str(tmp_path / "g.json"))
