"""End-to-end federated experiment loop and model evaluation helpers.

One round: sample participants, broadcast the global matrix, train each
participant locally, aggregate the weighted pseudo-gradients, apply the
clipped-momentum server step. The per-round average NLL is measured with
the broadcast (pre-update) matrix over the participants' full local data,
so it tracks the global model rather than any client's progress.

All round-level randomness is keyed by (seed, round), which makes a run
resumable from any server-state snapshot.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .client import LocalTrainConfig, run_client
from .datagen import GeneratorConfig, UserDataset, build_population
from .hazard import CoefMatrix, Covariates, TransitionKind, batch_nll, move_prob, stay_prob
from .rng import CLIENT_STREAM, PARTICIPANT_STREAM, substream
from .server import ServerConfig, ServerState, aggregate, sample_participants, server_step

__all__ = [
    "ExperimentConfig",
    "RoundMetrics",
    "ExperimentResult",
    "run_experiment",
    "eval_round_nll",
    "beta_mae",
    "scenario_probs",
    "heatmap_grid",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig
    server: ServerConfig = ServerConfig()
    client: LocalTrainConfig = LocalTrainConfig()
    metrics_path: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    avg_nll: float
    agg_grad_norm: float
    beta_snapshot: np.ndarray
    participant_count: int
    sample_count: int
    wall_ms: float


@dataclass
class ExperimentResult:
    metrics: list[RoundMetrics]
    final_state: ServerState
    population: list[UserDataset]

    @property
    def final_beta(self) -> CoefMatrix:
        return self.final_state.global_beta

    @property
    def total_pairs(self) -> int:
        return sum(u.sample_count for u in self.population)


def eval_round_nll(beta: CoefMatrix, participants: Sequence[UserDataset]) -> float:
    """Sample-weighted mean per-pair NLL of `beta` over the users' full data."""
    total = 0.0
    count = 0
    for user in participants:
        if user.sample_count == 0:
            continue
        total += float(np.sum(batch_nll(beta, user.batch())))
        count += user.sample_count
    if count == 0:
        raise ValueError("no pairs to evaluate")
    return total / count


def beta_mae(learned: CoefMatrix, truth: CoefMatrix) -> tuple[dict[str, float], float]:
    """Mean absolute coefficient error per transition row, plus the overall mean."""
    err = np.abs(learned.values - truth.values)
    per = {
        "0->1": float(err[0].mean()),
        "0->2": float(err[1].mean()),
        "1->2": float(err[2].mean()),
    }
    return per, float(err.mean())


def scenario_probs(beta: CoefMatrix, z: Covariates, dt: float) -> dict[str, tuple[float, ...]]:
    """Full interval transition table at one covariate scenario.

    Returns {"state0": (to0, to1, to2), "state1": (to1, to2)}; each row sums
    to one by construction.
    """
    s0 = stay_prob(beta, 0, z, dt)
    m01 = move_prob(beta, TransitionKind.GOOD_TO_MINOR, z, dt)
    m02 = move_prob(beta, TransitionKind.GOOD_TO_SEVERE, z, dt)
    s1 = stay_prob(beta, 1, z, dt)
    m12 = move_prob(beta, TransitionKind.MINOR_TO_SEVERE, z, dt)
    return {"state0": (s0, m01, m02), "state1": (s1, m12)}


def heatmap_grid(
    beta: CoefMatrix,
    kind: TransitionKind,
    var_pair: tuple[int, int],
    fixed_value: float = 0.5,
    resolution: int = 50,
    dt: float = 3.0,
) -> np.ndarray:
    """Move-probability surface over two covariates, the third held fixed.

    `var_pair` gives 1-based covariate indices (x axis first). The returned
    grid is indexed grid[i, j] = probability at (x = axis[j], y = axis[i]),
    both axes spanning [0, 1] with `resolution` points.
    """
    xi, yi = var_pair
    if xi == yi or not {xi, yi} <= {1, 2, 3}:
        raise ValueError(f"var_pair must be two distinct indices in {{1,2,3}}, got {var_pair}")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    grid = np.empty((resolution, resolution))
    base = [fixed_value, fixed_value, fixed_value]
    for i, y in enumerate(axis):
        for j, x in enumerate(axis):
            zv = base.copy()
            zv[xi - 1] = float(x)
            zv[yi - 1] = float(y)
            grid[i, j] = move_prob(beta, kind, Covariates(*zv), dt)
    return grid


def _train_one(
    beta: CoefMatrix,
    user: UserDataset,
    cfg: LocalTrainConfig,
    seed: int,
    round_index: int,
):
    rng = substream(seed, CLIENT_STREAM, round_index, user.user_id)
    return run_client(beta, user, cfg, rng)


def run_experiment(
    cfg: ExperimentConfig,
    population: list[UserDataset] | None = None,
    resume_from: ServerState | None = None,
    on_round: Callable[[RoundMetrics], None] | None = None,
) -> ExperimentResult:
    """Run the federated loop for cfg.server.rounds rounds.

    `population` may be passed to reuse an already-built population;
    `resume_from` continues from a server-state snapshot (rounds before
    snapshot.round_index are skipped, and match the original run exactly
    because every round keys its own random streams). `on_round` is invoked
    with each completed round's metrics, before the next round starts.
    """
    if population is None:
        population = build_population(cfg.generator)
    usable = [u for u in population if u.sample_count > 0]
    user_ids = [u.user_id for u in usable]
    by_id = {u.user_id: u for u in usable}

    state = resume_from if resume_from is not None else ServerState.initial()
    seed = cfg.server.seed
    metrics: list[RoundMetrics] = []

    writer = None
    if cfg.metrics_path:
        from .storage import MetricsWriter  # local import; storage depends on this module

        writer = MetricsWriter(cfg.metrics_path)

    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for r in range(state.round_index + 1, cfg.server.rounds + 1):
            t0 = time.perf_counter()
            rng = substream(seed, PARTICIPANT_STREAM, r)
            if user_ids:
                chosen = sample_participants(user_ids, cfg.server.participation_fraction, rng)
            else:
                chosen = []
            participants = [by_id[uid] for uid in chosen]

            if not participants:
                log.warning("round %d: every sampled client was empty; state unchanged", r)
                row = RoundMetrics(r, float("nan"), 0.0, state.global_beta.flat(), 0, 0,
                                   (time.perf_counter() - t0) * 1e3)
                metrics.append(row)
                state = ServerState(state.global_beta, state.momentum_buffer, r)
                if writer:
                    writer.write(row)
                if on_round:
                    on_round(row)
                continue

            avg_nll = eval_round_nll(state.global_beta, participants)

            if pool is not None:
                updates = list(
                    pool.map(
                        lambda u: _train_one(state.global_beta, u, cfg.client, seed, r),
                        participants,
                    )
                )
            else:
                updates = [
                    _train_one(state.global_beta, u, cfg.client, seed, r)
                    for u in participants
                ]

            agg = aggregate(updates)
            state = server_step(state, agg, cfg.server)

            row = RoundMetrics(
                round=r,
                avg_nll=avg_nll,
                agg_grad_norm=float(np.linalg.norm(agg)),
                beta_snapshot=state.global_beta.flat(),
                participant_count=len(updates),
                sample_count=sum(u.sample_count for u in updates),
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
            metrics.append(row)
            if writer:
                writer.write(row)  # flushed per round, so aborts keep partial metrics
            if on_round:
                on_round(row)
    finally:
        if pool is not None:
            pool.shutdown()
        if writer:
            writer.close()

    return ExperimentResult(metrics, state, population)
