"""Digital-twin future scenarios sampled from the current duration estimates."""

import logging
import math
from typing import List

import numpy as np

from constants import FutureStrategy
from errors import DomainError
from traffic.estimators import DurationEstimator
from traffic.generator import Scenario, sample_station
from traffic.profiles import Population

logger = logging.getLogger(name=__name__)

DEFAULT_HORIZON = 60
DEFAULT_TILT = 1.5


def emit_futures(
    est: DurationEstimator,
    population: Population,
    start_time: int,
    *,
    horizon: int = DEFAULT_HORIZON,
    count: int = 20,
    strategy: FutureStrategy = FutureStrategy.UNIFORM,
    tilt: float = DEFAULT_TILT,
    seed: int = 0,
) -> List[Scenario]:
    """count futures over [start_time, start_time + horizon).

    The load-tilted strategy stretches on-durations by tilt and gives every
    future its likelihood-ratio weight; uniform futures weigh 1.
    """
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    strategy = FutureStrategy(strategy)
    beta = tilt if strategy is FutureStrategy.LOAD_TILTED else 1.0
    if not beta > 0:
        raise DomainError(f"tilt must be > 0, got {tilt}")

    futures = []
    for stream in np.random.SeedSequence([seed, start_time]).spawn(count):
        rng = np.random.default_rng(stream)
        fragments = []
        log_weight = 0.0
        for station in population.stations:
            fragment, log_w = sample_station(
                station,
                population.profile(station),
                population.clock,
                start_time,
                horizon,
                rng,
                params=lambda cause, ac, regime, sta=station.name: est.params(sta, ac, cause, regime),
                tilt=beta,
            )
            fragments.append(fragment)
            log_weight += log_w
        futures.append(Scenario.stack(fragments, weight=math.exp(log_weight)))
    logger.debug(
        f"Emitted {count} {strategy} futures from minute {start_time}, "
        f"mean weight {np.mean([f.weight for f in futures]):.3f}"
    )
    return futures
