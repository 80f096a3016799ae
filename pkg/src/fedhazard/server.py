"""Server side: participant sampling, weighted aggregation, clip, momentum.

The server never sees transition pairs. Its inputs are client updates
(pseudo-gradient, sample count) and its state is the global coefficient
vector plus a momentum buffer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .client import ClientUpdate
from .hazard import N_COEF, CoefMatrix

__all__ = [
    "ServerConfig",
    "ServerState",
    "EmptyRoundError",
    "sample_participants",
    "aggregate",
    "clip",
    "server_step",
]


class EmptyRoundError(ValueError):
    """Aggregation was asked to run on an empty update list."""


@dataclass(frozen=True)
class ServerConfig:
    rounds: int = 50
    participation_fraction: float = 0.10
    global_lr: float = 0.05
    momentum: float = 0.9
    clip_norm: float = 1.0
    seed: int = 2024

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0.0 < self.participation_fraction <= 1.0:
            raise ValueError("participation_fraction must be in (0, 1]")
        if not self.global_lr > 0.0:
            raise ValueError("global_lr must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not self.clip_norm > 0.0:  # math.inf disables clipping
            raise ValueError("clip_norm must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class ServerState:
    global_beta: CoefMatrix
    momentum_buffer: np.ndarray
    round_index: int = 0

    def __post_init__(self) -> None:
        v = np.asarray(self.momentum_buffer, dtype=np.float64)
        if v.shape != (N_COEF,):
            raise ValueError("momentum buffer must be a 12-vector")
        object.__setattr__(self, "momentum_buffer", v)

    @classmethod
    def initial(cls) -> "ServerState":
        return cls(CoefMatrix.zero(), np.zeros(N_COEF), 0)


def participant_count(total_users: int, fraction: float) -> int:
    """ceil(fraction * total_users), guarded against float round-up noise."""
    return max(1, math.ceil(fraction * total_users - 1e-9))


def sample_participants(
    user_ids: Sequence[int], fraction: float, rng: np.random.Generator
) -> list[int]:
    """Uniform sample without replacement of ceil(fraction * |users|) ids."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    ids = np.sort(np.asarray(user_ids, dtype=np.int64))
    k = participant_count(len(ids), fraction)
    chosen = rng.choice(ids, size=k, replace=False)
    return sorted(int(u) for u in chosen)


def aggregate(updates: Sequence[ClientUpdate]) -> np.ndarray:
    """Sample-weighted mean of the pseudo-gradients.

    Reduction runs in ascending user_id order so repeated rounds sum in a
    fixed order and stay bitwise reproducible.
    """
    if not updates:
        raise EmptyRoundError("no client updates to aggregate")
    ordered = sorted(updates, key=lambda u: u.user_id)
    g = np.stack([u.pseudo_gradient for u in ordered])
    w = np.array([float(u.sample_count) for u in ordered])
    return (w[:, None] * g).sum(axis=0) / w.sum()


def clip(g: np.ndarray, clip_norm: float) -> np.ndarray:
    """Project g onto the l2 ball of radius clip_norm (identity inside it)."""
    if not clip_norm > 0.0:
        raise ValueError("clip_norm must be positive")
    norm = float(np.linalg.norm(g))
    if norm <= clip_norm:
        return g
    return g * (clip_norm / norm)


def server_step(state: ServerState, agg_gradient: np.ndarray, cfg: ServerConfig) -> ServerState:
    """One global update: v <- mu*v + clip(g); beta <- beta - eta*v."""
    g = np.asarray(agg_gradient, dtype=np.float64)
    if g.shape != (N_COEF,) or not np.all(np.isfinite(g)):
        raise ArithmeticError(
            f"round {state.round_index + 1}: aggregated gradient is not a finite 12-vector"
        )
    v = cfg.momentum * state.momentum_buffer + clip(g, cfg.clip_norm)
    beta = CoefMatrix.from_flat(state.global_beta.flat() - cfg.global_lr * v)
    return ServerState(beta, v, state.round_index + 1)
