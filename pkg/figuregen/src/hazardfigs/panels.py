"""The three figure layouts rendered from training outputs."""

from __future__ import annotations

import warnings
from typing import Sequence

import numpy as np
from matplotlib import pyplot as plt

from .metrics import MetricsFrame, SchemaError, load_grid, load_summary, load_truth_beta
from .style import palette, save

TRANSITIONS = ("0->1", "0->2", "1->2")
COV_PAIRS = ((1, 2), (1, 3), (2, 3))

# coefficient column groups per transition row in the metrics CSV
_COEF_GROUPS = {"0->1": range(0, 4), "0->2": range(4, 8), "1->2": range(8, 12)}
_COEF_NAMES = ("intercept", "age", "sea dist", "area")


def render_scale_panels(
    runs: Sequence[tuple[str, str]],
    out_path: str,
    fmt: str = "svg",
    dpi: int = 150,
    style: dict | None = None,
) -> None:
    """Four-panel comparison of several runs (one metrics/summary pair each)."""
    if not runs:
        raise SchemaError("need at least one (metrics, summary) run")
    frames = [MetricsFrame.from_csv(m) for m, _ in runs]
    summaries = [load_summary(s) for _, s in runs]
    colors = palette(style or {})
    labels = [f"{s['users']} users" for s in summaries]

    fig, axes = plt.subplots(2, 2)
    ax = axes[0, 0]
    for frame, label, color in zip(frames, labels, colors):
        ax.plot(frame.rounds, frame.avg_nll, label=label, color=color)
    ax.set_xlabel("round")
    ax.set_ylabel("average NLL")
    ax.set_title("NLL convergence")
    ax.legend()

    ax = axes[0, 1]
    for frame, label, color in zip(frames, labels, colors):
        ax.semilogy(frame.rounds, frame.agg_grad_norm, label=label, color=color)
    ax.set_xlabel("round")
    ax.set_ylabel("aggregated gradient norm")
    ax.set_title("Gradient norm (log scale)")
    ax.legend()

    ax = axes[1, 0]
    width = 0.8 / len(runs)
    xs = np.arange(len(TRANSITIONS))
    for i, (summary, label, color) in enumerate(zip(summaries, labels, colors)):
        per = summary["mae"]["per_transition"]
        vals = [per[t] for t in TRANSITIONS]
        ax.bar(xs + i * width, vals, width=width, label=label, color=color)
    ax.set_xticks(xs + width * (len(runs) - 1) / 2)
    ax.set_xticklabels(TRANSITIONS)
    ax.set_ylabel("coefficient MAE")
    ax.set_title("Estimation error per transition")
    ax.legend()

    ax = axes[1, 1]
    xs = np.arange(len(runs))
    ax.bar(xs - 0.15, [s["final_avg_nll"] for s in summaries], width=0.3,
           label="final NLL", color=colors[0])
    ax.bar(xs + 0.15, [s["final_grad_norm"] for s in summaries], width=0.3,
           label="final |g|", color=colors[1])
    ax.set_xticks(xs)
    ax.set_xticklabels(labels)
    ax.set_ylabel("final NLL / |g|")
    ax.legend(loc="upper left")
    twin = ax.twinx()
    twin.plot(xs, [s["wall_ms_total"] / 1e3 for s in summaries], "o--",
              color=colors[2], label="wall clock")
    twin.set_ylabel("wall clock (s)")
    twin.grid(False)
    twin.legend(loc="upper right")
    ax.set_title("Final round and runtime")

    fig.tight_layout()
    save(fig, out_path, fmt, dpi)
    plt.close(fig)


def render_learning_curves(
    metrics_path: str,
    truth_beta_path: str | None,
    out_path: str,
    fmt: str = "svg",
    dpi: int = 150,
    style: dict | None = None,
) -> None:
    """Four-panel single-run view: NLL, gradient norm, coefficient traces."""
    frame = MetricsFrame.from_csv(metrics_path)
    truth = None
    if truth_beta_path is not None:
        try:
            truth = load_truth_beta(truth_beta_path)
        except (OSError, SchemaError) as exc:
            warnings.warn(f"reference coefficients unavailable ({exc}); "
                          "plotting trajectories without dashed target lines")
    colors = palette(style or {})

    fig, axes = plt.subplots(2, 2)
    axes[0, 0].plot(frame.rounds, frame.avg_nll, color=colors[0])
    axes[0, 0].set_xlabel("round")
    axes[0, 0].set_ylabel("average NLL")
    axes[0, 0].set_title("NLL per round")

    axes[0, 1].semilogy(frame.rounds, frame.agg_grad_norm, color=colors[1])
    axes[0, 1].set_xlabel("round")
    axes[0, 1].set_ylabel("aggregated gradient norm")
    axes[0, 1].set_title("Gradient norm (log scale)")

    for ax, transitions in ((axes[1, 0], ("0->1", "0->2")), (axes[1, 1], ("1->2",))):
        for t_idx, trans in enumerate(transitions):
            for c_idx, col in enumerate(_COEF_GROUPS[trans]):
                color = colors[(t_idx * 4 + c_idx) % len(colors)]
                ax.plot(frame.rounds, frame.beta[:, col], color=color,
                        label=f"{trans} {_COEF_NAMES[c_idx]}")
                if truth is not None:
                    ax.axhline(truth[col], color=color, linestyle="--",
                               linewidth=0.9, alpha=0.7)
        ax.set_xlabel("round")
        ax.set_ylabel("coefficient value")
        ax.set_title(f"Coefficients {' / '.join(transitions)}")
        ax.legend(ncol=2, fontsize=7)

    fig.tight_layout()
    save(fig, out_path, fmt, dpi)
    plt.close(fig)


def render_heatmaps(
    grid_files: Sequence[tuple[str, str]],
    out_path: str,
    fmt: str = "svg",
    dpi: int = 150,
    style: dict | None = None,
) -> None:
    """3x3 sheet: transition rows x covariate-pair columns, contour overlays."""
    loaded: dict[tuple[str, tuple[int, int]], tuple[np.ndarray, dict]] = {}
    for csv_path, sidecar_path in grid_files:
        grid, meta = load_grid(csv_path, sidecar_path)
        key = (meta["transition"], (int(meta["x_covariate"]), int(meta["y_covariate"])))
        loaded[key] = (grid, meta)

    missing = [
        (t, pair) for t in TRANSITIONS for pair in COV_PAIRS if (t, pair) not in loaded
    ]
    if missing:
        raise SchemaError(
            "missing heatmap grids for: "
            + ", ".join(f"(transition {t}, covariates z{x}/z{y})" for t, (x, y) in missing)
        )

    fig, axes = plt.subplots(3, 3, figsize=(10.5, 9.5))
    for r, trans in enumerate(TRANSITIONS):
        row_grids = [loaded[(trans, pair)][0] for pair in COV_PAIRS]
        vmin = min(g.min() for g in row_grids)
        vmax = max(g.max() for g in row_grids)
        for c, pair in enumerate(COV_PAIRS):
            grid, meta = loaded[(trans, pair)]
            ax = axes[r, c]
            im = ax.imshow(
                grid,
                origin="lower",
                extent=(*meta["x_range"], *meta["y_range"]),
                vmin=vmin,
                vmax=vmax,
                aspect="auto",
                cmap="viridis",
            )
            if vmax - vmin > 1e-12 and grid.max() - grid.min() > 1e-12:
                n = grid.shape[0]
                xs = np.linspace(*meta["x_range"], n)
                ys = np.linspace(*meta["y_range"], n)
                ax.contour(xs, ys, grid, levels=5, colors="white", linewidths=0.8)
            ax.set_xlabel(f"z{pair[0]}")
            ax.set_ylabel(f"z{pair[1]}")
            if c == 0:
                ax.set_ylabel(f"{trans}\nz{pair[1]}")
        fig.colorbar(im, ax=axes[r, :].tolist(), shrink=0.85,
                     label=f"p({trans} | dt={loaded[(trans, COV_PAIRS[0])][1]['dt']:g})")

    save(fig, out_path, fmt, dpi)
    plt.close(fig)
