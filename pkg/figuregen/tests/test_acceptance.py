"""End-to-end: render all three figure types from real pipeline outputs.

Requires the fedhazard package (the training pipeline) to be installed in
the same environment; the figures themselves are still produced purely from
its output files.
"""

import subprocess
import sys

import pytest

from hazardfigs.cli import main


def run_pipeline(out_dir, users, rounds, seed):
    base = [sys.executable, "-m", "fedhazard.cli"]
    subprocess.run(
        base + ["train", "--users", str(users), "--rounds", str(rounds),
                "--seed", str(seed), "--out", str(out_dir), "--quiet"],
        check=True,
    )
    subprocess.run(
        base + ["heatmap", "--beta", str(out_dir / "beta.json"),
                "--resolution", "10", "--out", str(out_dir / "grids")],
        check=True,
    )


@pytest.fixture(scope="module")
def pipeline_outputs(tmp_path_factory):
    pytest.importorskip("fedhazard")
    root = tmp_path_factory.mktemp("runs")
    for users, rounds, seed in ((30, 4, 11), (60, 4, 11)):
        out = root / f"run{users}"
        out.mkdir()
        run_pipeline(out, users, rounds, seed)
    return root


def test_acceptance_all_figures_render_and_regenerate_identically(pipeline_outputs, tmp_path):
    runs = [pipeline_outputs / "run30", pipeline_outputs / "run60"]
    checks = []

    for tag, args in (
        ("scale", ["scale",
                   "--metrics", *[str(r / "metrics.csv") for r in runs],
                   "--summaries", *[str(r / "summary.json") for r in runs]]),
        ("curves", ["curves", "--metrics", str(runs[0] / "metrics.csv"),
                    "--truth", str(runs[0] / "beta.json")]),
        ("heatmaps", ["heatmaps", "--grid-dir", str(runs[0] / "grids")]),
    ):
        first = tmp_path / f"{tag}_a.svg"
        second = tmp_path / f"{tag}_b.svg"
        assert main(args + ["--out", str(first)]) == 0
        assert main(args + ["--out", str(second)]) == 0
        assert first.stat().st_size > 5_000
        assert first.read_bytes() == second.read_bytes()
        checks.append(tag)

    print(f"ACCEPTANCE figure-gen: PASS (rendered {', '.join(checks)}; byte-identical regeneration)")
