"""Online tracking of on/off duration means from observed episodes."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from constants import AccessCategory
from errors import ConfigError, DomainError
from traffic.generator import Scenario
from traffic.profiles import CauseRegime, OnOffCause, RegimeClock, RegimeKey

logger = logging.getLogger(name=__name__)

EstimatorKey = Tuple[str, AccessCategory, str, RegimeKey]


@dataclass(frozen=True)
class Episode:
    """Completed on or off run of one cause, tagged with the regime it started in."""

    sta: str
    ac: AccessCategory
    cause: str
    regime: RegimeKey
    active: bool
    start: int
    duration: float

    @property
    def key(self) -> EstimatorKey:
        return self.sta, self.ac, self.cause, self.regime

    @property
    def end(self) -> float:
        return self.start + self.duration


def extract_episodes(scenario: Scenario, clock: RegimeClock) -> List[Episode]:
    """Run-length encode every cause trace; runs cut by either trace end are dropped."""
    episodes: List[Episode] = []
    for (sta, ac, cause), trace in scenario.causes.items():
        trace = np.asarray(trace, dtype=bool)
        starts = np.concatenate([[0], np.flatnonzero(np.diff(trace.astype(np.int8))) + 1])
        lengths = np.diff(np.concatenate([starts, [trace.size]]))
        for begin, length in zip(starts[1:-1], lengths[1:-1]):
            minute = scenario.start + int(begin)
            episodes.append(
                Episode(
                    sta=sta,
                    ac=ac,
                    cause=cause,
                    regime=clock.regime_at(minute),
                    active=bool(trace[begin]),
                    start=minute,
                    duration=float(length),
                )
            )
    episodes.sort(key=lambda e: (e.end, e.sta, e.ac.value, e.cause))
    return episodes


@dataclass(frozen=True)
class DurationEstimator:
    """Exponentially forgetting means of on and off durations per (user, ac, cause, regime).

    An update moves the mean by max(forgetting, 1/count) towards the new
    observation, so the first observations average plainly.
    """

    forgetting: float = 0.1
    on: Dict[EstimatorKey, float] = field(default_factory=dict)
    off: Dict[EstimatorKey, float] = field(default_factory=dict)
    counts: Dict[Tuple[EstimatorKey, bool], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 < self.forgetting <= 1:
            raise ConfigError(f"forgetting factor must lie in (0, 1], got {self.forgetting}")

    def mean(self, key: EstimatorKey, active: bool) -> Optional[float]:
        return (self.on if active else self.off).get(key)

    def count(self, key: EstimatorKey, active: bool) -> int:
        return self.counts.get((key, active), 0)

    def params(self, sta: str, ac: AccessCategory, cause: OnOffCause, regime: RegimeKey) -> CauseRegime:
        """Estimated means for a cause, falling back to its configured prior.

        Pinned regimes keep their configured state.
        """
        prior = cause.params(regime)
        if prior.fixed_state is not None:
            return prior
        key = (sta, ac, cause.name, regime)
        return CauseRegime(
            mean_on=self.on.get(key, prior.mean_on),
            mean_off=self.off.get(key, prior.mean_off),
        )


def update_estimators(est: DurationEstimator, episodes: Iterable[Episode]) -> DurationEstimator:
    on, off, counts = dict(est.on), dict(est.off), dict(est.counts)
    updated = 0
    for episode in episodes:
        if not episode.duration > 0:
            raise DomainError(f"episode durations must be > 0, got {episode.duration} for {episode.key}")
        table = on if episode.active else off
        count = counts.get((episode.key, episode.active), 0) + 1
        counts[(episode.key, episode.active)] = count
        step = max(est.forgetting, 1.0 / count)
        previous = table.get(episode.key, episode.duration)
        table[episode.key] = previous + step * (episode.duration - previous)
        updated += 1
    if not updated:
        return est
    logger.debug(f"Updated duration estimates with {updated} episodes")
    return DurationEstimator(forgetting=est.forgetting, on=on, off=off, counts=counts)
