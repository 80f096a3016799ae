"""Builders for synthetic files in the documented pipeline formats."""

import json

import numpy as np

HEADER = "round,avg_nll,agg_grad_norm,participant_count,sample_count,wall_ms," + ",".join(
    f"b{i}" for i in range(12)
)


def write_metrics(path, rounds=20, seed=0):
    rng = np.random.default_rng(seed)
    beta = np.zeros(12)
    target = rng.normal(scale=1.5, size=12)
    lines = [HEADER]
    for r in range(1, rounds + 1):
        beta = beta + (target - beta) * 0.15
        nll = float(0.75 + 2.8 * np.exp(-r / 6))
        norm = float(0.1 + 7.0 * np.exp(-r / 5))
        lines.append(
            f"{r},{nll!r},{norm!r},50,{6000 + int(rng.integers(0, 500))},"
            f"{float(rng.uniform(5, 50))!r}," + ",".join(repr(float(b)) for b in beta)
        )
    path.write_text("\n".join(lines) + "\n")
    return target


def write_summary(path, users, seed=0):
    rng = np.random.default_rng(seed)
    doc = {
        "format": "fedhazard-summary-v1",
        "users": users,
        "seed": seed,
        "total_pairs": users * 140,
        "final_avg_nll": float(0.75 + rng.uniform(0, 0.05)),
        "final_grad_norm": float(0.35 / np.sqrt(users / 500)),
        "wall_ms_total": users * 40.0,
        "final_beta": [float(v) for v in rng.normal(size=12)],
        "mae": {
            "per_transition": {"0->1": 0.49, "0->2": 1.32, "1->2": 0.76},
            "overall": 0.85,
        },
    }
    path.write_text(json.dumps(doc))


def write_grid(csv_path, sidecar_path, transition, x_cov, y_cov, resolution=12, constant=None):
    xs = np.linspace(0, 1, resolution)
    if constant is None:
        grid = 0.2 + 0.3 * np.outer(1 - xs, xs) + 0.1 * xs
    else:
        grid = np.full((resolution, resolution), constant)
    np.savetxt(csv_path, grid, delimiter=",", fmt="%.17g")
    sidecar_path.write_text(
        json.dumps(
            {
                "format": "fedhazard-grid-v1",
                "transition": transition,
                "x_covariate": x_cov,
                "y_covariate": y_cov,
                "fixed_covariate": ({1, 2, 3} - {x_cov, y_cov}).pop(),
                "fixed_value": 0.5,
                "dt": 3.0,
                "resolution": resolution,
                "x_range": [0.0, 1.0],
                "y_range": [0.0, 1.0],
            }
        )
    )


