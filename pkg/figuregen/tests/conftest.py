"""Shared fixtures."""

import pytest

from helpers import write_grid, write_metrics


@pytest.fixture
def metrics_file(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics(path)
    return path


@pytest.fixture
def grid_set(tmp_path):
    pairs = []
    for t in ("0->1", "0->2", "1->2"):
        for x, y in ((1, 2), (1, 3), (2, 3)):
            stem = f"heatmap_{t.replace('->', 'to')}_z{x}z{y}"
            csv_path = tmp_path / f"{stem}.csv"
            sidecar = tmp_path / f"{stem}.json"
            write_grid(csv_path, sidecar, t, x, y)
            pairs.append((str(csv_path), str(sidecar)))
    return pairs
