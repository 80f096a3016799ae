"""Command-line entry point.

Subcommands: generate, train, eval, heatmap, codec. Settings resolve as
CLI flag > config file (TOML) > built-in default. The default output
directory can be set with the FEDHAZARD_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import codec as codec_mod
from .client import ClientUpdate, LocalTrainConfig
from .datagen import GeneratorConfig, build_population
from .harness import ExperimentConfig, beta_mae, heatmap_grid, run_experiment, scenario_probs
from .hazard import CoefMatrix, Covariates, TransitionKind
from .server import ServerConfig
from . import storage

USAGE_ERROR = 2

# the three benchmark covariate scenarios (age, sea distance, deck area)
SCENARIOS = (
    ("young_far_small", (0.2, 0.8, 0.1)),
    ("midage_near_medium", (0.5, 0.3, 0.5)),
    ("old_near_large", (0.9, 0.1, 0.9)),
)

DEFAULTS = {
    "users": 500,
    "seed": 2024,
    "rounds": 50,
    "rho": 0.10,
    "local_steps": 3,
    "local_lr": 0.01,
    "global_lr": 0.05,
    "batch": 32,
    "momentum": 0.9,
    "clip": 1.0,
    "workers": 1,
}


class CliError(Exception):
    """Fatal runtime problem; maps to exit code 1."""


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise _usage_error(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise _usage_error(f"cannot parse config file {path}: {exc}")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise _usage_error(f"unknown config keys: {sorted(unknown)}")
    return doc


def _usage_error(message: str) -> SystemExit:
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(USAGE_ERROR)


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (flags win)."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        settings.update(_load_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _out_dir(args: argparse.Namespace) -> str:
    out = args.out or os.environ.get("FEDHAZARD_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _validate(settings: dict) -> None:
    if settings["users"] <= 0:
        raise _usage_error(f"--users must be positive, got {settings['users']}")
    if settings["rounds"] < 0:
        raise _usage_error(f"--rounds must be >= 0, got {settings['rounds']}")
    if not 0.0 < settings["rho"] <= 1.0:
        raise _usage_error(f"--rho must be in (0, 1], got {settings['rho']}")
    if settings["seed"] < 0:
        raise _usage_error("--seed must be non-negative")


def _experiment_config(settings: dict, metrics_path: str | None) -> ExperimentConfig:
    return ExperimentConfig(
        generator=GeneratorConfig(user_count=settings["users"], seed=settings["seed"]),
        server=ServerConfig(
            rounds=settings["rounds"],
            participation_fraction=settings["rho"],
            global_lr=settings["global_lr"],
            momentum=settings["momentum"],
            clip_norm=settings["clip"],
            seed=settings["seed"],
        ),
        client=LocalTrainConfig(
            local_steps=settings["local_steps"],
            local_lr=settings["local_lr"],
            batch_size=settings["batch"],
        ),
        metrics_path=metrics_path,
        workers=settings["workers"],
    )


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    _validate(settings)
    out = _out_dir(args)
    population = build_population(GeneratorConfig(settings["users"], settings["seed"]))
    pairs_path = os.path.join(out, "pairs.csv")
    manifest_path = os.path.join(out, "manifest.json")
    storage.save_dataset(population, pairs_path, manifest_path)
    total = sum(u.sample_count for u in population)
    print(f"wrote {total} pairs from {len(population)} users to {pairs_path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    settings = _resolve(args)
    _validate(settings)
    out = _out_dir(args)
    metrics_path = os.path.join(out, "metrics.csv")
    cfg = _experiment_config(settings, metrics_path)

    t0 = time.perf_counter()

    def report(row):
        print(
            f"round {row.round:3d}  avg_nll={row.avg_nll:.4f}  "
            f"|g|={row.agg_grad_norm:.4f}  clients={row.participant_count}  "
            f"pairs={row.sample_count}"
        )

    result = run_experiment(cfg, on_round=report if not args.quiet else None)
    wall_ms_total = (time.perf_counter() - t0) * 1e3

    beta_path = os.path.join(out, "beta.json")
    storage.save_beta(result.final_beta, beta_path)

    per_mae, overall_mae = beta_mae(result.final_beta, cfg.generator.ground_truth)
    summary = {
        "seed": settings["seed"],
        "users": settings["users"],
        "config": {k: settings[k] for k in DEFAULTS},
        "total_pairs": result.total_pairs,
        "rounds_completed": len(result.metrics),
        "final_avg_nll": result.metrics[-1].avg_nll if result.metrics else None,
        "final_grad_norm": result.metrics[-1].agg_grad_norm if result.metrics else None,
        "wall_ms_total": wall_ms_total,
        "final_beta": result.final_beta.flat().tolist(),
        "final_momentum": result.final_state.momentum_buffer.tolist(),
        "ground_truth_beta": cfg.generator.ground_truth.flat().tolist(),
        "mae": {"per_transition": per_mae, "overall": overall_mae},
        "scenarios": _scenario_records(result.final_beta, dt=3.0),
    }
    storage.save_summary(summary, os.path.join(out, "summary.json"))
    if not args.quiet:
        print(f"final beta -> {beta_path}; summary -> {os.path.join(out, 'summary.json')}")
    return 0


def _scenario_records(beta: CoefMatrix, dt: float) -> list[dict]:
    records = []
    for name, z in SCENARIOS:
        table = scenario_probs(beta, Covariates(*z), dt)
        records.append(
            {"name": name, "z": list(z), "dt": dt,
             "state0": list(table["state0"]), "state1": list(table["state1"])}
        )
    return records


def cmd_eval(args: argparse.Namespace) -> int:
    beta = storage.load_beta(args.beta)
    if args.z is not None:
        z_list = [("custom", tuple(args.z))]
    else:
        z_list = list(SCENARIOS)
    rows = []
    for name, z in z_list:
        table = scenario_probs(beta, Covariates(*z), args.dt)
        rows.append((name, z, table))

    if args.format == "json":
        doc = [
            {"name": n, "z": list(z), "dt": args.dt,
             "state0": list(t["state0"]), "state1": list(t["state1"])}
            for n, z, t in rows
        ]
        print(json.dumps(doc, indent=1))
    else:
        print("scenario,z1,z2,z3,dt,p0_stay,p0_to1,p0_to2,p1_stay,p1_to2")
        for n, z, t in rows:
            s0, s1 = t["state0"], t["state1"]
            print(
                f"{n},{z[0]},{z[1]},{z[2]},{args.dt},"
                f"{s0[0]:.3f},{s0[1]:.3f},{s0[2]:.3f},{s1[0]:.3f},{s1[1]:.3f}"
            )
    return 0


COVARIATE_PAIRS = ((1, 2), (1, 3), (2, 3))


def cmd_heatmap(args: argparse.Namespace) -> int:
    beta = storage.load_beta(args.beta)
    out = _out_dir(args)
    names = {0: "0to1", 1: "0to2", 2: "1to2"}
    for kind in TransitionKind:
        for xi, yi in COVARIATE_PAIRS:
            grid = heatmap_grid(beta, kind, (xi, yi), fixed_value=args.fixed,
                                resolution=args.resolution, dt=args.dt)
            stem = f"heatmap_{names[kind.index]}_z{xi}z{yi}"
            meta = {
                "transition": f"{int(kind.from_state)}->{int(kind.to_state)}",
                "x_covariate": xi,
                "y_covariate": yi,
                "fixed_covariate": ({1, 2, 3} - {xi, yi}).pop(),
                "fixed_value": args.fixed,
                "dt": args.dt,
                "resolution": args.resolution,
                "x_range": [0.0, 1.0],
                "y_range": [0.0, 1.0],
            }
            storage.save_grid(grid, meta, os.path.join(out, stem + ".csv"),
                              os.path.join(out, stem + ".json"))
    print(f"wrote 9 heatmap grids to {out}")
    return 0


def cmd_codec(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    for _ in range(args.trials):
        g = np.float64(np.float32(rng.normal(scale=2.0, size=12)))
        n = int(rng.integers(1, 2**32 - 1))
        update = ClientUpdate(g, n, 0)
        blob = codec_mod.encode_update(update)
        if len(blob) != codec_mod.UPDATE_SIZE:
            raise CliError(f"update payload was {len(blob)} bytes")
        back = codec_mod.decode_update(blob)
        if back.sample_count != n or not np.array_equal(back.pseudo_gradient, g):
            raise CliError("update round-trip mismatch")
        beta = CoefMatrix.from_flat(np.float64(np.float32(rng.normal(size=12))))
        blob = codec_mod.encode_broadcast(beta)
        if len(blob) != codec_mod.BROADCAST_SIZE:
            raise CliError(f"broadcast payload was {len(blob)} bytes")
        if codec_mod.decode_broadcast(blob) != beta:
            raise CliError("broadcast round-trip mismatch")
    print(f"codec round-trip ok over {args.trials} trials "
          f"({codec_mod.UPDATE_SIZE}-byte updates, {codec_mod.BROADCAST_SIZE}-byte broadcasts)")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_common_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file (flags override it)")
    p.add_argument("--users", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--local-steps", dest="local_steps", type=int)
    p.add_argument("--local-lr", dest="local_lr", type=float)
    p.add_argument("--global-lr", dest="global_lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--momentum", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory (default $FEDHAZARD_OUT or .)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedhazard",
        description="Federated CTMC hazard-model estimation on synthetic bridge data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic population and write it out")
    _add_common_training_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="run the federated experiment")
    _add_common_training_flags(p)
    p.add_argument("--quiet", action="store_true", help="suppress per-round log lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="print scenario transition tables for a saved beta")
    p.add_argument("--beta", required=True, help="beta JSON file")
    p.add_argument("--dt", type=float, default=3.0)
    p.add_argument("--z", type=float, nargs=3, metavar=("Z1", "Z2", "Z3"),
                   help="evaluate one custom scenario instead of the benchmark three")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("heatmap", help="write the 9 transition-probability grids")
    p.add_argument("--beta", required=True, help="beta JSON file")
    p.add_argument("--dt", type=float, default=3.0)
    p.add_argument("--fixed", type=float, default=0.5)
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--out", help="output directory (default $FEDHAZARD_OUT or .)")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("codec", help="self-check the binary update codec")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_codec)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError, CliError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
