"""Readers for the training pipeline's output files.

This package never recomputes model math; it consumes three documented
formats produced by the training CLI: the per-round metrics CSV, the run
summary JSON, and heatmap grid CSVs with their JSON sidecars.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

METRICS_COLUMNS = (
    ["round", "avg_nll", "agg_grad_norm", "participant_count", "sample_count", "wall_ms"]
    + [f"b{i}" for i in range(12)]
)
SUMMARY_FORMAT = "fedhazard-summary-v1"
GRID_FORMAT = "fedhazard-grid-v1"
BETA_FORMAT = "fedhazard-beta-v1"


class SchemaError(ValueError):
    """An input file does not match the documented layout."""


@dataclass
class MetricsFrame:
    """Parsed per-round training metrics."""

    rounds: np.ndarray
    avg_nll: np.ndarray
    agg_grad_norm: np.ndarray
    participant_count: np.ndarray
    sample_count: np.ndarray
    wall_ms: np.ndarray
    beta: np.ndarray  # (rounds, 12)

    @classmethod
    def from_csv(cls, path: str) -> "MetricsFrame":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != METRICS_COLUMNS:
                raise SchemaError(f"{path}: header {header!r} does not match the metrics schema")
            rows = [rec for rec in reader if rec]
        if not rows:
            raise SchemaError(f"{path}: no metric rows")
        data = np.array(rows, dtype=np.float64)
        rounds = data[:, 0].astype(np.int64)
        if rounds[0] != 1 or np.any(np.diff(rounds) != 1):
            raise SchemaError(f"{path}: rounds must increase strictly from 1")
        return cls(
            rounds=rounds,
            avg_nll=data[:, 1],
            agg_grad_norm=data[:, 2],
            participant_count=data[:, 3].astype(np.int64),
            sample_count=data[:, 4].astype(np.int64),
            wall_ms=data[:, 5],
            beta=data[:, 6:18],
        )


def load_summary(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != SUMMARY_FORMAT:
        raise SchemaError(f"{path}: not a {SUMMARY_FORMAT} file")
    for key in ("users", "mae", "final_avg_nll", "final_grad_norm", "wall_ms_total"):
        if key not in doc:
            raise SchemaError(f"{path}: summary missing key {key!r}")
    return doc


def load_truth_beta(path: str) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != BETA_FORMAT:
        raise SchemaError(f"{path}: not a {BETA_FORMAT} file")
    beta = np.asarray(doc["beta"], dtype=np.float64)
    if beta.shape != (12,):
        raise SchemaError(f"{path}: coefficient vector must have length 12")
    return beta


def load_grid(csv_path: str, sidecar_path: str) -> tuple[np.ndarray, dict]:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    if meta.get("format") != GRID_FORMAT:
        raise SchemaError(f"{sidecar_path}: not a {GRID_FORMAT} file")
    grid = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    res = int(meta["resolution"])
    if grid.shape != (res, res):
        raise SchemaError(f"{csv_path}: grid shape {grid.shape} does not match resolution {res}")
    return grid, meta
