"""Versioned on-disk formats: datasets, coefficient files, metrics, summaries.

Text formats carry an explicit version tag so readers can reject files they
do not understand. Floats are written with repr (shortest round-trip form),
so save -> load is exact.
"""

from __future__ import annotations

import csv
import json
from typing import Iterable, Sequence

import numpy as np

from .datagen import UserDataset
from .hazard import CoefMatrix, Covariates, DeteriorationState, TransitionPair
from .harness import RoundMetrics

__all__ = [
    "FormatError",
    "save_dataset",
    "load_dataset",
    "save_beta",
    "load_beta",
    "MetricsWriter",
    "save_metrics",
    "load_metrics",
    "save_summary",
    "load_summary",
    "save_grid",
    "load_grid",
]

PAIRS_HEADER = "# fedhazard-pairs-v1: user_id,from,to,dt,z1,z2,z3"
MANIFEST_FORMAT = "fedhazard-manifest-v1"
BETA_FORMAT = "fedhazard-beta-v1"
SUMMARY_FORMAT = "fedhazard-summary-v1"
GRID_FORMAT = "fedhazard-grid-v1"
METRICS_COLUMNS = (
    ["round", "avg_nll", "agg_grad_norm", "participant_count", "sample_count", "wall_ms"]
    + [f"b{i}" for i in range(12)]
)


class FormatError(ValueError):
    """A file does not match the expected versioned layout."""


# --------------------------------------------------------------------------
# population datasets: a pairs file plus a manifest


def save_dataset(users: Sequence[UserDataset], pairs_path: str, manifest_path: str) -> None:
    with open(pairs_path, "w", newline="") as fh:
        fh.write(PAIRS_HEADER + "\n")
        for user in users:
            for p in user.pairs:
                fh.write(
                    f"{user.user_id},{int(p.from_state)},{int(p.to_state)},"
                    f"{p.dt!r},{p.z.z1!r},{p.z.z2!r},{p.z.z3!r}\n"
                )
    manifest = {
        "format": MANIFEST_FORMAT,
        "users": [
            {
                "user_id": u.user_id,
                "region": u.region,
                "n_pairs": u.sample_count,
                "local_beta": u.local_beta.flat().tolist(),
            }
            for u in users
        ],
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def load_dataset(pairs_path: str, manifest_path: str) -> list[UserDataset]:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"{manifest_path}: not a {MANIFEST_FORMAT} file")

    pairs_by_user: dict[int, list[TransitionPair]] = {}
    with open(pairs_path) as fh:
        header = fh.readline().rstrip("\n")
        if header != PAIRS_HEADER:
            raise FormatError(f"{pairs_path}: unrecognised header {header!r}")
        for line in fh:
            uid_s, frm, to, dt, z1, z2, z3 = line.rstrip("\n").split(",")
            pairs_by_user.setdefault(int(uid_s), []).append(
                TransitionPair(
                    DeteriorationState(int(frm)),
                    DeteriorationState(int(to)),
                    float(dt),
                    Covariates(float(z1), float(z2), float(z3)),
                )
            )

    users = []
    for entry in manifest["users"]:
        uid = int(entry["user_id"])
        pairs = pairs_by_user.get(uid, [])
        if len(pairs) != int(entry["n_pairs"]):
            raise FormatError(
                f"user {uid}: manifest says {entry['n_pairs']} pairs, file has {len(pairs)}"
            )
        users.append(
            UserDataset(uid, entry["region"], CoefMatrix.from_flat(entry["local_beta"]), pairs)
        )
    return users


# --------------------------------------------------------------------------
# coefficient matrices


def save_beta(beta: CoefMatrix, path: str) -> None:
    with open(path, "w") as fh:
        json.dump({"format": BETA_FORMAT, "beta": beta.flat().tolist()}, fh)
        fh.write("\n")


def load_beta(path: str) -> CoefMatrix:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != BETA_FORMAT:
        raise FormatError(f"{path}: not a {BETA_FORMAT} file")
    return CoefMatrix.from_flat(doc["beta"])


# --------------------------------------------------------------------------
# round metrics CSV


class MetricsWriter:
    """Appends one CSV row per completed round, flushing as it goes."""

    def __init__(self, path: str) -> None:
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRICS_COLUMNS)
        self._fh.flush()

    def write(self, row: RoundMetrics) -> None:
        self._writer.writerow(
            [
                row.round,
                repr(row.avg_nll),
                repr(row.agg_grad_norm),
                row.participant_count,
                row.sample_count,
                repr(row.wall_ms),
            ]
            + [repr(float(b)) for b in row.beta_snapshot]
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def save_metrics(rows: Iterable[RoundMetrics], path: str) -> None:
    with MetricsWriter(path) as writer:
        for row in rows:
            writer.write(row)


def load_metrics(path: str) -> list[RoundMetrics]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_COLUMNS:
            raise FormatError(f"{path}: unexpected metrics header {header!r}")
        rows = []
        for rec in reader:
            rows.append(
                RoundMetrics(
                    round=int(rec[0]),
                    avg_nll=float(rec[1]),
                    agg_grad_norm=float(rec[2]),
                    participant_count=int(rec[3]),
                    sample_count=int(rec[4]),
                    wall_ms=float(rec[5]),
                    beta_snapshot=np.array([float(x) for x in rec[6:18]]),
                )
            )
    return rows


# --------------------------------------------------------------------------
# run summary JSON


def save_summary(summary: dict, path: str) -> None:
    doc = {"format": SUMMARY_FORMAT, **summary}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_summary(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != SUMMARY_FORMAT:
        raise FormatError(f"{path}: not a {SUMMARY_FORMAT} file")
    return doc


# --------------------------------------------------------------------------
# heatmap grids: a bare CSV matrix plus a JSON sidecar with axis metadata


def save_grid(grid: np.ndarray, meta: dict, csv_path: str, sidecar_path: str) -> None:
    np.savetxt(csv_path, grid, delimiter=",", fmt="%.17g")
    doc = {
        "format": GRID_FORMAT,
        "orientation": "grid[i][j] = probability at (x=axis[j], y=axis[i])",
        **meta,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_grid(csv_path: str, sidecar_path: str) -> tuple[np.ndarray, dict]:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    if meta.get("format") != GRID_FORMAT:
        raise FormatError(f"{sidecar_path}: not a {GRID_FORMAT} file")
    grid = np.loadtxt(csv_path, delimiter=",", ndmin=2)
    if grid.shape != (meta["resolution"], meta["resolution"]):
        raise FormatError(f"{csv_path}: grid shape {grid.shape} does not match sidecar")
    return grid, meta
