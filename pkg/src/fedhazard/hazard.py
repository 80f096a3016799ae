"""Three-state deterioration model: hazards, interval probabilities, likelihood.

States are Good(0) -> Minor(1) -> Severe(2), with Severe absorbing. Only the
three worsening transitions 0->1, 0->2, 1->2 carry hazards. Each hazard is
log-linear in the covariates (age, coastline distance, deck area):

    rate(kind, z) = exp(b0 + b1*z1 + b2*z2 + b3*z3)

Over an inspection interval dt the chain either stays, with probability
exp(-total_rate * dt), or is observed in a worse state j with probability
(rate_j / total_rate) * (1 - exp(-total_rate * dt)). Multi-jump paths inside
an interval are deliberately not modelled; the move formula attributes the
whole interval to a single competing-risk exit.

The negative log-likelihood of one observed pair and its closed-form gradient
with respect to the 12 coefficients are implemented both as scalar functions
(one pair) and as vectorised batch kernels used by training and evaluation.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "DeteriorationState",
    "TransitionKind",
    "Covariates",
    "CoefMatrix",
    "TransitionPair",
    "PairBatch",
    "InvalidStateError",
    "NumericOverflowError",
    "EmptyBatchError",
    "hazard_rate",
    "total_hazard",
    "stay_prob",
    "move_prob",
    "pair_nll",
    "batch_nll",
    "nll_gradient",
    "clamp_events",
    "reset_clamp_events",
]

N_COEF = 12

# Linear predictors are clamped to this band before exponentiation so that a
# wild SGD iterate cannot produce an infinite hazard or an exactly-zero one.
LINPRED_BOUND = 30.0

_LN2 = math.log(2.0)


class InvalidStateError(ValueError):
    """A state outside the operation's domain (e.g. hazards out of Severe)."""


class NumericOverflowError(ArithmeticError):
    """A hazard evaluation left the representable range."""


class EmptyBatchError(ValueError):
    """A batch operation received no pairs."""


class DeteriorationState(IntEnum):
    GOOD = 0
    MINOR = 1
    SEVERE = 2


class TransitionKind(Enum):
    """The three allowed worsening transitions, in fixed coefficient-row order."""

    GOOD_TO_MINOR = (0, 1)
    GOOD_TO_SEVERE = (0, 2)
    MINOR_TO_SEVERE = (1, 2)

    @property
    def from_state(self) -> DeteriorationState:
        return DeteriorationState(self.value[0])

    @property
    def to_state(self) -> DeteriorationState:
        return DeteriorationState(self.value[1])

    @property
    def index(self) -> int:
        """Row index of this transition in the coefficient matrix."""
        return _KIND_INDEX[self]

    @classmethod
    def from_states(cls, from_state: int, to_state: int) -> "TransitionKind":
        try:
            return cls((int(from_state), int(to_state)))
        except ValueError:
            raise InvalidStateError(
                f"{from_state}->{to_state} is not an allowed transition"
            ) from None


_KIND_INDEX = {
    TransitionKind.GOOD_TO_MINOR: 0,
    TransitionKind.GOOD_TO_SEVERE: 1,
    TransitionKind.MINOR_TO_SEVERE: 2,
}

# Coefficient rows whose transition leaves a given from-state.
_ROWS_FROM_STATE = {DeteriorationState.GOOD: (0, 1), DeteriorationState.MINOR: (2,)}


@dataclass(frozen=True, slots=True)
class Covariates:
    """Covariate triple (age, coastline distance, deck area).

    Model-facing values are dimensionless in [0, 1] after per-user local-max
    normalisation; raw physical values pass through here too while a dataset
    is being built, so only finiteness and non-negativity are enforced.
    """

    z1: float
    z2: float
    z3: float

    def __post_init__(self) -> None:
        for name, v in (("z1", self.z1), ("z2", self.z2), ("z3", self.z3)):
            if not math.isfinite(v):
                raise ValueError(f"covariate {name} must be finite, got {v}")
            if v < 0.0:
                raise ValueError(f"covariate {name} must be non-negative, got {v}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.z1, self.z2, self.z3)


class CoefMatrix:
    """The 3x4 hazard coefficient matrix.

    Rows follow TransitionKind order (0->1, 0->2, 1->2); columns are
    (intercept, age, sea distance, area). Flattening is row-major, which
    fixes the 12-vector layout used everywhere: aggregation, the wire codec
    and the metrics files.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Iterable) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.shape != (3, 4):
            raise ValueError(f"coefficient matrix must be 3x4, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficient matrix entries must be finite")
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def zero(cls) -> "CoefMatrix":
        return cls(np.zeros((3, 4)))

    @classmethod
    def from_flat(cls, vec: Iterable[float]) -> "CoefMatrix":
        arr = np.asarray(list(vec) if not isinstance(vec, np.ndarray) else vec, dtype=np.float64)
        if arr.shape != (N_COEF,):
            raise ValueError(f"flat coefficient vector must have length {N_COEF}")
        return cls(arr.reshape(3, 4))

    @property
    def values(self) -> np.ndarray:
        """Read-only (3, 4) view."""
        return self._values

    def flat(self) -> np.ndarray:
        """Row-major 12-vector copy."""
        return self._values.reshape(N_COEF).copy()

    def row(self, kind: TransitionKind) -> np.ndarray:
        return self._values[kind.index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoefMatrix):
            return NotImplemented
        return bool(np.array_equal(self._values, other._values))

    def __repr__(self) -> str:
        return f"CoefMatrix({self._values.tolist()!r})"


@dataclass(frozen=True, slots=True)
class TransitionPair:
    """One observed consecutive-inspection record."""

    from_state: DeteriorationState
    to_state: DeteriorationState
    dt: float
    z: Covariates

    def __post_init__(self) -> None:
        frm = DeteriorationState(self.from_state)
        to = DeteriorationState(self.to_state)
        object.__setattr__(self, "from_state", frm)
        object.__setattr__(self, "to_state", to)
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be finite and positive, got {self.dt}")
        if frm == DeteriorationState.SEVERE:
            raise InvalidStateError("pairs never originate in the absorbing state")
        if frm != to:
            TransitionKind.from_states(frm, to)  # membership check

    @property
    def is_stay(self) -> bool:
        return self.from_state == self.to_state


# --------------------------------------------------------------------------
# diagnostics: count of clamped linear predictors (overflow guard hits)

_clamp_lock = threading.Lock()
_clamp_count = 0


def _record_clamps(n: int) -> None:
    global _clamp_count
    if n:
        with _clamp_lock:
            _clamp_count += int(n)


def clamp_events() -> int:
    """Total linear-predictor clamp events since the last reset."""
    return _clamp_count


def reset_clamp_events() -> None:
    global _clamp_count
    with _clamp_lock:
        _clamp_count = 0


# --------------------------------------------------------------------------
# scalar operations


def _linpred(row: np.ndarray, z: Covariates) -> float:
    eta = float(row[0] + row[1] * z.z1 + row[2] * z.z2 + row[3] * z.z3)
    if not math.isfinite(eta):
        raise NumericOverflowError(f"non-finite linear predictor {eta}")
    if eta > LINPRED_BOUND:
        _record_clamps(1)
        return LINPRED_BOUND
    if eta < -LINPRED_BOUND:
        _record_clamps(1)
        return -LINPRED_BOUND
    return eta


def hazard_rate(beta: CoefMatrix, kind: TransitionKind, z: Covariates) -> float:
    """Instantaneous transition rate for `kind` at covariates `z` (1/years)."""
    rate = math.exp(_linpred(beta.row(kind), z))
    if not (rate > 0.0 and math.isfinite(rate)):
        raise NumericOverflowError(f"hazard overflow for transition {kind.name}")
    return rate


def total_hazard(beta: CoefMatrix, from_state: DeteriorationState, z: Covariates) -> float:
    """Sum of all rates leaving `from_state` (1/years)."""
    frm = DeteriorationState(from_state)
    if frm == DeteriorationState.SEVERE:
        raise InvalidStateError("the absorbing state has no outgoing hazard")
    if frm == DeteriorationState.GOOD:
        return hazard_rate(beta, TransitionKind.GOOD_TO_MINOR, z) + hazard_rate(
            beta, TransitionKind.GOOD_TO_SEVERE, z
        )
    return hazard_rate(beta, TransitionKind.MINOR_TO_SEVERE, z)


def stay_prob(
    beta: CoefMatrix, from_state: DeteriorationState, z: Covariates, dt: float
) -> float:
    """Probability of being observed in the same state after `dt` years."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return math.exp(-total_hazard(beta, from_state, z) * dt)


def move_prob(beta: CoefMatrix, kind: TransitionKind, z: Covariates, dt: float) -> float:
    """Probability of being observed one `kind` transition worse after `dt` years."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    lam = hazard_rate(beta, kind, z)
    total = total_hazard(beta, kind.from_state, z)
    # Written exactly as stay_prob's complement so that for single-exit states
    # move_prob == 1 - stay_prob bitwise, and state rows sum to one.
    return (lam / total) * (1.0 - math.exp(-total * dt))


def _log1mexp(x: float) -> float:
    """log(1 - exp(-x)) for x > 0, branch-stable for both small and large x."""
    if x <= _LN2:
        return math.log(-math.expm1(-x))
    return math.log1p(-math.exp(-x))


def pair_nll(beta: CoefMatrix, pair: TransitionPair) -> float:
    """Negative log-likelihood of one observed pair, in nats (always >= 0)."""
    total = total_hazard(beta, pair.from_state, pair.z)
    x = total * pair.dt
    if pair.is_stay:
        return x
    lam = hazard_rate(beta, TransitionKind.from_states(pair.from_state, pair.to_state), pair.z)
    return math.log(total) - math.log(lam) - _log1mexp(x)


# --------------------------------------------------------------------------
# vectorised batch kernels


class PairBatch:
    """Columnar view of a batch of pairs, for vectorised likelihood work.

    Columns: from/to state codes, dt, and the (n, 4) design matrix
    (1, z1, z2, z3). For moves, `move_row` holds the coefficient row of the
    observed transition (from + to - 1 happens to enumerate kind order).
    """

    __slots__ = ("frm", "to", "dt", "design", "move_row", "n")

    def __init__(
        self,
        frm: np.ndarray,
        to: np.ndarray,
        dt: np.ndarray,
        design: np.ndarray,
    ) -> None:
        self.frm = frm
        self.to = to
        self.dt = dt
        self.design = design
        self.move_row = frm + to - 1
        self.n = int(frm.shape[0])

    @classmethod
    def from_pairs(cls, pairs: Sequence[TransitionPair]) -> "PairBatch":
        n = len(pairs)
        frm = np.fromiter((p.from_state for p in pairs), dtype=np.int64, count=n)
        to = np.fromiter((p.to_state for p in pairs), dtype=np.int64, count=n)
        dt = np.fromiter((p.dt for p in pairs), dtype=np.float64, count=n)
        design = np.ones((n, 4))
        for i, p in enumerate(pairs):
            design[i, 1] = p.z.z1
            design[i, 2] = p.z.z2
            design[i, 3] = p.z.z3
        return cls(frm, to, dt, design)

    def take(self, idx: np.ndarray) -> "PairBatch":
        return PairBatch(self.frm[idx], self.to[idx], self.dt[idx], self.design[idx])


BatchLike = Union[PairBatch, Sequence[TransitionPair]]


def _as_batch(pairs: BatchLike) -> PairBatch:
    if isinstance(pairs, PairBatch):
        return pairs
    return PairBatch.from_pairs(pairs)


def _log1mexp_vec(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    small = x <= _LN2
    out[small] = np.log(-np.expm1(-x[small]))
    large = ~small
    out[large] = np.log1p(-np.exp(-x[large]))
    return out


def _batch_core(beta: CoefMatrix, b: PairBatch):
    """Shared hazard pieces: per-pair 3-column rate matrix, exit rate, x = rate*dt."""
    eta = b.design @ beta.values.T
    clipped = np.clip(eta, -LINPRED_BOUND, LINPRED_BOUND)
    _record_clamps(np.count_nonzero(eta != clipped))
    lam = np.exp(clipped)
    from_good = b.frm == 0
    total = np.where(from_good, lam[:, 0] + lam[:, 1], lam[:, 2])
    return lam, total, total * b.dt


def batch_nll(beta: CoefMatrix, pairs: BatchLike) -> np.ndarray:
    """Per-pair negative log-likelihood values for a batch."""
    b = _as_batch(pairs)
    if b.n == 0:
        raise EmptyBatchError("batch_nll needs at least one pair")
    lam, total, x = _batch_core(beta, b)
    stay = b.to == b.frm
    out = np.empty(b.n)
    out[stay] = x[stay]
    mv = ~stay
    if np.any(mv):
        lam_obs = lam[np.nonzero(mv)[0], b.move_row[mv]]
        out[mv] = np.log(total[mv]) - np.log(lam_obs) - _log1mexp_vec(x[mv])
    return out


def nll_gradient(beta: CoefMatrix, pairs: BatchLike) -> np.ndarray:
    """Gradient of the batch-mean NLL, flattened in coefficient-matrix order.

    Closed form per pair; rows whose transition does not leave the pair's
    from-state contribute zero. Stays contribute dt * rate per outgoing row;
    moves contribute rate/total - 1{observed row} - rate*dt/expm1(total*dt),
    each scaled by the design vector (1, z1, z2, z3).
    """
    b = _as_batch(pairs)
    if b.n == 0:
        raise EmptyBatchError("nll_gradient needs at least one pair")
    lam, total, x = _batch_core(beta, b)
    stay = (b.to == b.frm)[:, None]

    stay_coef = b.dt[:, None] * lam
    onehot = np.zeros((b.n, 3))
    onehot[np.arange(b.n), b.move_row] = 1.0
    with np.errstate(over="ignore"):
        decay = b.dt / np.expm1(x)  # -> 0 when x overflows expm1
    move_coef = lam / total[:, None] - onehot - lam * decay[:, None]

    coef = np.where(stay, stay_coef, move_coef)
    # zero out rows that do not leave the pair's from-state
    from_good = (b.frm == 0)[:, None]
    active = np.where(from_good, _GOOD_ROW_MASK, _MINOR_ROW_MASK)
    coef = coef * active

    grad = coef.T @ b.design / b.n
    return grad.reshape(N_COEF)


_GOOD_ROW_MASK = np.array([1.0, 1.0, 0.0])
_MINOR_ROW_MASK = np.array([0.0, 0.0, 1.0])
