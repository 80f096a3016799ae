"""Synthetic heterogeneous municipality population.

Each simulated municipality (a "user") gets a region type that sets its
coastline-distance range, bridge-count distribution and the noise level of
its local coefficient matrix. Bridges carry raw physical covariates; members
are inspected on irregular schedules and their observed state sequences are
sampled directly from the model's interval distribution, so the generated
data match the likelihood that is later fitted to them.

Pair extraction keeps raw covariates (age advances across a member's
schedule); local-max normalisation to [0, 1] happens once per user at the
end, mirroring how a municipality would scale against its own asset stock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hazard import (
    CoefMatrix,
    Covariates,
    DeteriorationState,
    TransitionKind,
    TransitionPair,
    hazard_rate,
    stay_prob,
)
from .rng import USER_STREAM, substream

__all__ = [
    "RegionProfile",
    "GeneratorConfig",
    "UserDataset",
    "GROUND_TRUTH_BETA",
    "DEFAULT_PROFILES",
    "build_population",
    "simulate_member_history",
    "extract_pairs",
    "normalize_local",
]

# Ground-truth coefficient matrix the whole population is perturbed from.
GROUND_TRUTH_BETA = CoefMatrix(
    [
        [-2.0, 0.5, -0.3, 0.10],  # 0->1
        [-4.0, 0.3, -0.5, 0.05],  # 0->2
        [-2.5, 0.4, -0.4, 0.08],  # 1->2
    ]
)


@dataclass(frozen=True)
class RegionProfile:
    """One region type: population share, bridge stock and heterogeneity level."""

    name: str
    proportion: float
    bridge_count_range: tuple[int, int]
    beta_noise_sigma: float
    sea_distance_range_km: tuple[float, float]

    def __post_init__(self) -> None:
        if not 0.0 < self.proportion <= 1.0:
            raise ValueError(f"proportion must be in (0, 1], got {self.proportion}")
        if self.beta_noise_sigma < 0.0:
            raise ValueError("beta_noise_sigma must be >= 0")
        lo, hi = self.bridge_count_range
        if not (0 < lo < hi):
            raise ValueError(f"bad bridge_count_range {self.bridge_count_range}")
        slo, shi = self.sea_distance_range_km
        if not (0.0 <= slo < shi):
            raise ValueError(f"bad sea_distance_range_km {self.sea_distance_range_km}")


DEFAULT_PROFILES: tuple[RegionProfile, ...] = (
    RegionProfile("coastal", 0.30, (10, 80), 0.20, (0.0, 5.0)),
    RegionProfile("riverside", 0.30, (5, 50), 0.15, (5.0, 30.0)),
    RegionProfile("inland", 0.40, (3, 30), 0.10, (30.0, 100.0)),
)


@dataclass(frozen=True)
class GeneratorConfig:
    user_count: int
    seed: int
    ground_truth: CoefMatrix = GROUND_TRUTH_BETA
    profiles: tuple[RegionProfile, ...] = DEFAULT_PROFILES
    member_count_choices: tuple[int, ...] = (1, 2, 3)
    inspection_count_choices: tuple[int, ...] = (2, 3, 4, 5)
    dt_range_years: tuple[float, float] = (1.0, 5.0)
    age_range_years: tuple[float, float] = (0.0, 60.0)
    area_range_m2: tuple[float, float] = (50.0, 2000.0)

    def __post_init__(self) -> None:
        if self.user_count <= 0:
            raise ValueError(f"user_count must be positive, got {self.user_count}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        total = sum(p.proportion for p in self.profiles)
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError(f"region proportions must sum to 1, got {total}")
        if not self.member_count_choices or min(self.member_count_choices) < 1:
            raise ValueError("member_count_choices must be positive integers")
        if not self.inspection_count_choices or min(self.inspection_count_choices) < 2:
            raise ValueError("inspection_count_choices must each be >= 2")
        for name in ("dt_range_years", "age_range_years", "area_range_m2"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo < hi):
                raise ValueError(f"bad {name}: ({lo}, {hi})")
        if self.dt_range_years[0] <= 0.0:
            raise ValueError("inspection intervals must be positive")


@dataclass
class UserDataset:
    """One municipality's private training set."""

    user_id: int
    region: str
    local_beta: CoefMatrix
    pairs: list[TransitionPair]
    _batch: "object" = field(default=None, repr=False, compare=False)

    @property
    def sample_count(self) -> int:
        return len(self.pairs)

    def batch(self):
        """Cached columnar view of the pair list (pairs are append-frozen)."""
        from .hazard import PairBatch

        if self._batch is None:
            self._batch = PairBatch.from_pairs(self.pairs)
        return self._batch


def simulate_member_history(
    local_beta: CoefMatrix,
    covariates: Covariates | Sequence[Covariates],
    schedule: Sequence[float],
    rng: np.random.Generator,
) -> list[DeteriorationState]:
    """Sample a member's observed state sequence over `schedule` intervals.

    Starts in Good. At each interval the next observed state is drawn from the
    model's interval distribution (stay/move probabilities) at that interval's
    covariates; once Severe is reached it persists without consuming draws.
    `covariates` is either one triple used for every interval or a sequence
    with one triple per interval.
    """
    if len(schedule) == 0:
        raise ValueError("schedule must be non-empty")
    if isinstance(covariates, Covariates):
        z_seq: Sequence[Covariates] = [covariates] * len(schedule)
    else:
        z_seq = covariates
        if len(z_seq) != len(schedule):
            raise ValueError("need one covariate triple per interval")

    states = [DeteriorationState.GOOD]
    state = DeteriorationState.GOOD
    for z, dt in zip(z_seq, schedule):
        if dt <= 0.0:
            raise ValueError(f"interval lengths must be positive, got {dt}")
        if state == DeteriorationState.SEVERE:
            states.append(state)
            continue
        p_stay = stay_prob(local_beta, state, z, dt)
        u = rng.random()
        if u < p_stay:
            states.append(state)
            continue
        if state == DeteriorationState.MINOR:
            state = DeteriorationState.SEVERE
        else:
            # split the leave mass between 0->1 and 0->2 by hazard share
            lam01 = hazard_rate(local_beta, TransitionKind.GOOD_TO_MINOR, z)
            lam02 = hazard_rate(local_beta, TransitionKind.GOOD_TO_SEVERE, z)
            share = lam01 / (lam01 + lam02)
            leave = 1.0 - p_stay
            if u < p_stay + share * leave:
                state = DeteriorationState.MINOR
            else:
                state = DeteriorationState.SEVERE
        states.append(state)
    return states


def extract_pairs(
    history: Sequence[DeteriorationState],
    schedule: Sequence[float],
    raw_covariates: tuple[float, float, float],
) -> list[TransitionPair]:
    """Turn one member's observed sequence into raw-covariate transition pairs.

    `raw_covariates` is (age at first inspection, sea distance, deck area).
    Age advances by the elapsed schedule time at each interval start;
    intervals that start in the absorbing state are dropped.
    """
    if len(history) != len(schedule) + 1:
        raise ValueError(
            f"history of length {len(history)} does not match {len(schedule)} intervals"
        )
    age0, sea, area = raw_covariates
    pairs: list[TransitionPair] = []
    age = float(age0)
    for k, dt in enumerate(schedule):
        frm = history[k]
        if frm != DeteriorationState.SEVERE:
            pairs.append(
                TransitionPair(frm, history[k + 1], float(dt), Covariates(age, sea, area))
            )
        age += float(dt)
    return pairs


def normalize_local(pairs: Sequence[TransitionPair]) -> list[TransitionPair]:
    """Divide each covariate by its maximum over the user's own pairs.

    A component whose maximum is zero maps to zero everywhere. Idempotent on
    already-normalised data.
    """
    if not pairs:
        raise ValueError("cannot normalise an empty pair list")
    max1 = max(p.z.z1 for p in pairs)
    max2 = max(p.z.z2 for p in pairs)
    max3 = max(p.z.z3 for p in pairs)
    s1 = 1.0 / max1 if max1 > 0.0 else 0.0
    s2 = 1.0 / max2 if max2 > 0.0 else 0.0
    s3 = 1.0 / max3 if max3 > 0.0 else 0.0
    return [
        TransitionPair(
            p.from_state,
            p.to_state,
            p.dt,
            Covariates(p.z.z1 * s1, p.z.z2 * s2, p.z.z3 * s3),
        )
        for p in pairs
    ]


# --------------------------------------------------------------------------
# population assembly

# Bridge-stock sizes are strongly skewed, like real municipal registers:
# most municipalities hold a modest stock inside the profile range
# (log-normal), a city tier administers a few times the range maximum, and a
# rare metropolitan tier an order of magnitude more. The upper tiers are what
# make small sampling rounds dominated by a few very large datasets.
_CITY_FRACTION = 0.062
_CITY_MEDIAN_MULT = 3.5  # city median = mult * range max
_CITY_LOG_SIGMA = 0.20
_METRO_FRACTION = 0.013
_METRO_MEDIAN_MULT = 12.5
_METRO_LOG_SIGMA = 0.15
_METRO_CAP_MULT = 16

_BASE_MEDIAN_SCALE = 0.5
_Z95 = 1.6448536269514722  # standard-normal 95th percentile


def _draw_bridge_count(rng: np.random.Generator, lo: int, hi: int) -> int:
    tier = rng.random()
    gauss = rng.standard_normal()
    if tier < _METRO_FRACTION:
        draw = math.exp(math.log(_METRO_MEDIAN_MULT * hi) + _METRO_LOG_SIGMA * gauss)
        return int(min(max(round(draw), 6 * hi), _METRO_CAP_MULT * hi))
    if tier < _METRO_FRACTION + _CITY_FRACTION:
        draw = math.exp(math.log(_CITY_MEDIAN_MULT * hi) + _CITY_LOG_SIGMA * gauss)
        return int(min(max(round(draw), 2 * hi), 6 * hi))
    mu = math.log(_BASE_MEDIAN_SCALE * math.sqrt(lo * hi))
    sigma = math.log(hi / lo) / (2.0 * _Z95)
    draw = math.exp(mu + sigma * gauss)
    return int(min(max(round(draw), lo), hi))


def _pick_region(rng: np.random.Generator, profiles: Sequence[RegionProfile]) -> RegionProfile:
    u = rng.random()
    acc = 0.0
    for p in profiles:
        acc += p.proportion
        if u < acc:
            return p
    return profiles[-1]


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def _build_user(uid: int, cfg: GeneratorConfig) -> UserDataset:
    rng = substream(cfg.seed, USER_STREAM, uid)
    profile = _pick_region(rng, cfg.profiles)

    noise = rng.standard_normal((3, 4))
    local_beta = CoefMatrix(cfg.ground_truth.values + profile.beta_noise_sigma * noise)

    n_bridges = _draw_bridge_count(rng, *profile.bridge_count_range)
    members: list[tuple[tuple[float, float, float], np.ndarray]] = []
    for _ in range(n_bridges):
        age0 = rng.uniform(*cfg.age_range_years)
        sea = rng.uniform(*profile.sea_distance_range_km)
        area = _log_uniform(rng, *cfg.area_range_m2)
        n_members = int(rng.choice(cfg.member_count_choices))
        for _ in range(n_members):
            n_insp = int(rng.choice(cfg.inspection_count_choices))
            schedule = rng.uniform(*cfg.dt_range_years, size=n_insp - 1)
            members.append(((age0, sea, area), schedule))

    # Normalisers for simulation: the user's maxima over the planned design.
    # (Every bridge always yields at least one pair, so sea/area maxima match
    # the final pair maxima; the age maximum can exceed the realised one when
    # the oldest interval is lost to absorption.)
    age_max = max(raw[0] + float(np.sum(sched[:-1])) for raw, sched in members)
    sea_max = max(raw[1] for raw, _ in members)
    area_max = max(raw[2] for raw, _ in members)
    sa = 1.0 / age_max if age_max > 0.0 else 0.0
    ss = 1.0 / sea_max if sea_max > 0.0 else 0.0
    sr = 1.0 / area_max if area_max > 0.0 else 0.0

    raw_pairs: list[TransitionPair] = []
    for (age0, sea, area), schedule in members:
        ages = age0 + np.concatenate(([0.0], np.cumsum(schedule[:-1])))
        z_seq = [Covariates(a * sa, sea * ss, area * sr) for a in ages]
        history = simulate_member_history(local_beta, z_seq, schedule, rng)
        raw_pairs.extend(extract_pairs(history, schedule, (age0, sea, area)))

    return UserDataset(uid, profile.name, local_beta, normalize_local(raw_pairs))


def build_population(config: GeneratorConfig) -> list[UserDataset]:
    """Generate the full user population, deterministically for (seed, config).

    User u's dataset depends only on (seed, u, config), so growing
    user_count extends a population without disturbing existing users.
    """
    return [_build_user(uid, config) for uid in range(config.user_count)]
