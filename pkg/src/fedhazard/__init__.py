"""Federated estimation of a CTMC hazard model of bridge deterioration."""

from .client import ClientUpdate, LocalTrainConfig, local_train, pseudo_gradient, run_client
from .codec import decode_broadcast, decode_update, encode_broadcast, encode_update
from .datagen import (
    DEFAULT_PROFILES,
    GROUND_TRUTH_BETA,
    GeneratorConfig,
    RegionProfile,
    UserDataset,
    build_population,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    RoundMetrics,
    beta_mae,
    eval_round_nll,
    heatmap_grid,
    run_experiment,
    scenario_probs,
)
from .hazard import (
    CoefMatrix,
    Covariates,
    DeteriorationState,
    TransitionKind,
    TransitionPair,
    hazard_rate,
    move_prob,
    nll_gradient,
    pair_nll,
    stay_prob,
    total_hazard,
)
from .server import ServerConfig, ServerState, aggregate, clip, sample_participants, server_step

__version__ = "0.1.0"
