"""User-side training: K local SGD steps and the pseudo-gradient upload.

A client receives the broadcast coefficient matrix, runs K mini-batch SGD
steps on its own pairs, and reports (init - final) / local_lr together with
its full dataset size. Nothing else leaves the client.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import UserDataset
from .hazard import CoefMatrix, TransitionPair, nll_gradient

__all__ = [
    "LocalTrainConfig",
    "ClientUpdate",
    "EmptyDatasetError",
    "local_train",
    "pseudo_gradient",
    "sample_minibatch",
    "run_client",
]


class EmptyDatasetError(ValueError):
    """Raised for a client with no pairs; the round simply skips it."""


@dataclass(frozen=True)
class LocalTrainConfig:
    local_steps: int = 3
    local_lr: float = 0.01
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.local_steps < 1:
            raise ValueError("local_steps must be >= 1")
        if not self.local_lr > 0.0:
            raise ValueError("local_lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class ClientUpdate:
    """The wire payload: pseudo-gradient 12-vector plus full local pair count."""

    pseudo_gradient: np.ndarray
    sample_count: int
    user_id: int

    def __post_init__(self) -> None:
        g = np.asarray(self.pseudo_gradient, dtype=np.float64)
        if g.shape != (12,) or not np.all(np.isfinite(g)):
            raise ValueError("pseudo_gradient must be a finite 12-vector")
        object.__setattr__(self, "pseudo_gradient", g)
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


def _batch_indices(n: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw without replacement; the whole dataset if it is small."""
    return rng.choice(n, size=min(batch_size, n), replace=False)


def sample_minibatch(
    data: UserDataset, batch_size: int, rng: np.random.Generator
) -> list[TransitionPair]:
    if data.sample_count == 0:
        raise EmptyDatasetError(f"user {data.user_id} has no pairs")
    idx = _batch_indices(data.sample_count, batch_size, rng)
    return [data.pairs[i] for i in idx]


def local_train(
    init_beta: CoefMatrix,
    data: UserDataset,
    cfg: LocalTrainConfig,
    rng: np.random.Generator,
) -> CoefMatrix:
    """Run K mini-batch SGD steps on the local mean NLL; returns the final matrix.

    Batches are redrawn independently per step (without replacement within a
    step), so small users whose pair count is below the batch size train on
    their full dataset each step.
    """
    if data.sample_count == 0:
        raise EmptyDatasetError(f"user {data.user_id} has no pairs")
    batch = data.batch()
    vec = init_beta.flat()
    for _ in range(cfg.local_steps):
        idx = _batch_indices(batch.n, cfg.batch_size, rng)
        grad = nll_gradient(CoefMatrix.from_flat(vec), batch.take(idx))
        vec = vec - cfg.local_lr * grad
    return CoefMatrix.from_flat(vec)


def pseudo_gradient(init_beta: CoefMatrix, final_beta: CoefMatrix, local_lr: float) -> np.ndarray:
    """(init - final) / local_lr, the server-facing gradient surrogate."""
    if not local_lr > 0.0:
        raise ValueError("local_lr must be positive")
    return (init_beta.flat() - final_beta.flat()) / local_lr


def run_client(
    init_beta: CoefMatrix,
    data: UserDataset,
    cfg: LocalTrainConfig,
    rng: np.random.Generator,
) -> ClientUpdate:
    """Full client turn: train locally, package the update."""
    final = local_train(init_beta, data, cfg, rng)
    g = pseudo_gradient(init_beta, final, cfg.local_lr)
    if not np.all(np.isfinite(g)):
        raise ArithmeticError(f"non-finite pseudo-gradient from user {data.user_id}")
    return ClientUpdate(g, data.sample_count, data.user_id)
