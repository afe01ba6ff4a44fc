"""Slot-level Monte-Carlo reference for the analytic CSMA/CA model.

Replications run side by side as rows of (R, K) numpy arrays. Slots are
virtual: an idle slot lasts sigma, a success the transmitter's T_S and a
collision the longest T_C involved. AIFSN and TXOP are folded into those
durations the same way the analytic model folds them.

Every contender walks the same per-contender state machine as the closed-form
attempt probability; only the channel is shared. A frame arrives in a state
with probability 1 - exp(-lam * E_S), where E_S is the mean wall time per
state elapsed so far in that replication. A contender idle at counter zero
transmits in the state its frame arrives in when no other contender sent in
the previous state, and draws a stage-0 backoff otherwise. A frame sent
straight from idle leaves the contender empty after a success.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from errors import DomainError
from mac.markov import fold_contenders
from mac.types import ContenderLoad, QosParams, SlotTiming

logger = logging.getLogger(name=__name__)

# estimate -> (numerator, denominator) totals
_RATIOS = {
    "tau": ("attempts", "slots"),
    "p": ("collisions", "attempts"),
    "q": ("arrivals", "slots"),
    "s_norm": ("payload_time", "elapsed"),
    "e_n": ("frame_slots", "frames_done"),
    "mean_slot": ("elapsed", "slots"),
}
_PRODUCTS = {"e_d": ("e_n", "mean_slot")}
_UNDEFINED = {"e_n": math.nan}


@dataclass(frozen=True)
class SimConfig:
    slots: int = 60_000
    replications: int = 64
    warmup: int = 2_000
    seed: int = 0
    confidence: float = 0.95
    saturated: bool = False
    batches: int = 10

    def __post_init__(self) -> None:
        if self.slots <= self.warmup or self.warmup < 0:
            raise DomainError(f"need slots > warmup >= 0, got slots={self.slots}, warmup={self.warmup}")
        if self.replications < 1 or self.batches < 1:
            raise DomainError(f"need replications and batches >= 1, got {self.replications}, {self.batches}")
        if self.replications * self.batches < 2:
            raise DomainError("need at least 2 batches in total for intervals")
        if self.batches > self.slots - self.warmup:
            raise DomainError(f"{self.batches} batches do not fit into {self.slots - self.warmup} measured slots")
        if not 0.0 < self.confidence < 1.0:
            raise DomainError(f"confidence must lie in (0, 1), got {self.confidence}")


@dataclass(frozen=True, eq=False)
class SimStats:
    """Totals per batch of measured slots.

    Each replication's measured slots are cut into B consecutive batches.
    Contender fields have shape (R, B, K), channel fields (R, B). Estimates
    pool all batches; interval half widths come from the spread of the
    batch means.
    """

    attempts: np.ndarray
    collisions: np.ndarray
    arrivals: np.ndarray
    frame_slots: np.ndarray
    frames_done: np.ndarray
    slots: np.ndarray
    elapsed: np.ndarray
    payload_time: np.ndarray
    idle_slots: np.ndarray
    success_slots: np.ndarray
    collision_slots: np.ndarray
    success_time: np.ndarray
    collision_time: np.ndarray
    confidence: float

    @property
    def batch_count(self) -> int:
        return int(self.slots.size)

    @property
    def measured_slots(self) -> int:
        return int(self.slots.sum() // self.slots.shape[0])

    def _flat(self, name: str) -> np.ndarray:
        values = np.asarray(getattr(self, name), dtype=float)
        return values.reshape(-1, *values.shape[2:])

    def _estimate(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Pooled estimate and per-batch deviations linearised around it."""
        if name in _PRODUCTS:
            (left, left_dev), (right, right_dev) = (self._estimate(part) for part in _PRODUCTS[name])
            value = left * right
            with np.errstate(invalid="ignore", divide="ignore"):
                return value, value * (left_dev / left + right_dev / right)
        if name not in _RATIOS:
            raise DomainError(f"unknown statistic {name!r}")
        num_name, den_name = _RATIOS[name]
        num, den = self._flat(num_name), self._flat(den_name)
        if num.ndim > den.ndim:
            den = np.broadcast_to(den[:, None], num.shape)
        total_num, total_den = num.sum(axis=0), den.sum(axis=0)
        defined = total_den > 0
        value = np.divide(
            total_num, total_den, out=np.full(total_num.shape, _UNDEFINED.get(name, 0.0)), where=defined
        )
        mean_den = np.where(defined, total_den / num.shape[0], 1.0)
        deviations = np.where(defined, (num - np.where(defined, value, 0.0) * den) / mean_den, 0.0)
        return value, deviations

    def mean(self, name: str) -> np.ndarray:
        return self._estimate(name)[0]

    def interval(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Estimate and Student-t half width from batch means."""
        value, deviations = self._estimate(name)
        batches = deviations.shape[0]
        spread = np.std(deviations, axis=0, ddof=1) / math.sqrt(batches)
        return value, stats.t.ppf((1.0 + self.confidence) / 2.0, batches - 1) * spread


def _uniform_counters(rng: np.random.Generator, windows: np.ndarray) -> np.ndarray:
    return np.floor(rng.random(windows.shape) * windows).astype(np.int64)


def _advance(
    rng: np.random.Generator,
    has_frame: np.ndarray,
    stage: np.ndarray,
    counter: np.ndarray,
    *,
    arrival: np.ndarray,
    join_busy: np.ndarray,
    won: np.ndarray,
    lost: np.ndarray,
    w0,
    m,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One state transition of the per-contender backoff chain."""
    empty_wait = ~has_frame & (counter > 0)
    has_frame = np.where(
        won,
        has_frame & arrival,
        np.where(lost | join_busy, True, np.where(empty_wait, arrival, has_frame)),
    )
    stage = np.where(won | join_busy, 0, np.where(lost, np.minimum(stage + 1, m), stage))
    fresh = _uniform_counters(rng, (w0 * 2**stage).astype(float))
    counter = np.where(won | lost | join_busy, fresh, np.where(counter > 0, counter - 1, counter))
    return has_frame, stage, counter


def simulate(
    loads: Sequence[ContenderLoad], timing: SlotTiming, config: SimConfig = SimConfig()
) -> SimStats:
    """Run R independent replications of the K-contender channel."""
    if len(loads) == 0:
        raise DomainError("at least one contender is required")
    eff = fold_contenders(loads, timing)
    rng = np.random.default_rng(config.seed)
    reps, k = config.replications, eff.size
    shape = (reps, k)
    batch_shape = (reps, config.batches)
    w0 = eff.w0.astype(np.int64)
    m = eff.m.astype(np.int64)
    sigma = timing.sigma
    measured = config.slots - config.warmup
    logger.info(
        f"Simulating {k} contenders, {reps} replications of {config.slots} slots in {config.batches} batches"
    )

    has_frame = np.zeros(shape, dtype=bool)
    stage = np.zeros(shape, dtype=np.int64)
    counter = np.zeros(shape, dtype=np.int64)
    tracked = np.zeros(shape, dtype=bool)
    held = np.zeros(shape, dtype=np.int64)
    sensed_idle = np.ones(shape, dtype=bool)
    wall_time = np.zeros(reps)

    totals = {
        name: np.zeros(batch_shape + (k,))
        for name in ("attempts", "collisions", "arrivals", "frame_slots", "frames_done")
    }
    channel = {
        name: np.zeros(batch_shape)
        for name in (
            "slots",
            "elapsed",
            "payload_time",
            "idle_slots",
            "success_slots",
            "collision_slots",
            "success_time",
            "collision_time",
        )
    }

    for slot in range(config.slots):
        if config.saturated:
            arrival = np.ones(shape, dtype=bool)
        else:
            mean_state = wall_time / slot if slot else np.full(reps, sigma)
            arrival = rng.random(shape) < -np.expm1(-eff.lam * mean_state[:, None])

        wake = ~has_frame & (counter == 0) & arrival
        join_busy = wake & ~sensed_idle
        tx = (has_frame & (counter == 0)) | (wake & sensed_idle)
        n_tx = tx.sum(axis=1)
        idle = n_tx == 0
        success = n_tx == 1
        collision = n_tx >= 2
        duration = np.where(
            idle,
            sigma,
            np.where(success, (tx * eff.t_success).sum(axis=1), np.where(tx, eff.t_collision, 0.0).max(axis=1)),
        )
        wall_time += duration

        held += has_frame & tracked
        won = tx & success[:, None]
        lost = tx & collision[:, None]

        if slot >= config.warmup:
            batch = (slot - config.warmup) * config.batches // measured
            done = won & tracked
            totals["attempts"][:, batch] += tx
            totals["collisions"][:, batch] += lost
            totals["arrivals"][:, batch] += arrival
            totals["frame_slots"][:, batch] += np.where(done, held, 0)
            totals["frames_done"][:, batch] += done
            channel["slots"][:, batch] += 1
            channel["elapsed"][:, batch] += duration
            channel["payload_time"][:, batch] += np.where(success, (tx * eff.payload).sum(axis=1), 0.0)
            channel["idle_slots"][:, batch] += idle
            channel["success_slots"][:, batch] += success
            channel["collision_slots"][:, batch] += collision
            channel["success_time"][:, batch] += np.where(success, duration, 0.0)
            channel["collision_time"][:, batch] += np.where(collision, duration, 0.0)

        # frames are counted from a fresh stage-0 backoff only
        joined = ~has_frame & arrival
        tracked = np.where(won, has_frame & arrival, np.where(join_busy, True, np.where(joined, False, tracked)))
        held = np.where(won | joined, 0, held)
        has_frame, stage, counter = _advance(
            rng, has_frame, stage, counter, arrival=arrival, join_busy=join_busy, won=won, lost=lost, w0=w0, m=m
        )
        sensed_idle = n_tx[:, None] - tx == 0

    return SimStats(**totals, **channel, confidence=config.confidence)


def simulate_backoff_chain(
    q: float,
    p: float,
    qos: QosParams,
    *,
    steps: int = 4_000,
    chains: int = 512,
    p_idle: Optional[float] = None,
    seed: int = 0,
) -> float:
    """Attempt frequency of one contender under exogenous q, p and P_idle.

    Walks the same state chain the closed-form attempt probability is
    derived from, with many independent chains in parallel.
    """
    if p_idle is None:
        p_idle = 1.0 - p
    for name, value in (("q", q), ("p", p), ("p_idle", p_idle)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name} must lie in [0, 1], got {value}")
    rng = np.random.default_rng(seed)
    warmup = steps // 5
    has_frame = np.zeros(chains, dtype=bool)
    stage = np.zeros(chains, dtype=np.int64)
    counter = np.zeros(chains, dtype=np.int64)
    attempts = 0

    for step in range(steps):
        arrival = rng.random(chains) < q
        medium_idle = rng.random(chains) < p_idle
        collided = rng.random(chains) < p
        wake = ~has_frame & (counter == 0) & arrival
        tx = (has_frame & (counter == 0)) | (wake & medium_idle)
        if step >= warmup:
            attempts += int(tx.sum())
        has_frame, stage, counter = _advance(
            rng,
            has_frame,
            stage,
            counter,
            arrival=arrival,
            join_busy=wake & ~medium_idle,
            won=tx & ~collided,
            lost=tx & collided,
            w0=qos.w0,
            m=qos.m,
        )

    return attempts / (chains * (steps - warmup))


def simulate_states_per_success(
    p: float, qos: QosParams, *, frames: int = 200_000, seed: int = 0
) -> float:
    """Mean states visited per frame when every attempt collides w.p. p."""
    if not 0.0 <= p < 1.0:
        raise DomainError(f"p must lie in [0, 1), got {p}")
    rng = np.random.default_rng(seed)
    failures = rng.geometric(1.0 - p, size=frames) - 1
    total = np.zeros(frames)
    for attempt in range(int(failures.max()) + 1):
        active = failures >= attempt
        window = qos.window(attempt)
        total += np.where(active, rng.integers(0, window, size=frames) + 1, 0)
    return float(total.mean())
