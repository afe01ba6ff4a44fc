"""Minute-level on/off activity traces and the Scenario container."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from constants import AccessCategory
from errors import DomainError
from traffic.profiles import CauseRegime, OnOffCause, Population, RegimeClock, RegimeKey, RoleProfile, StationSpec

logger = logging.getLogger(name=__name__)

AC_ORDER: Tuple[AccessCategory, ...] = tuple(AccessCategory)
CauseKey = Tuple[str, AccessCategory, str]
ParamsFn = Callable[[OnOffCause, AccessCategory, RegimeKey], CauseRegime]
SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True, eq=False)
class ScenarioSlice:
    start: int  # absolute minute
    demand: np.ndarray  # (stations, ACs) mean bps over the slice
    positions: np.ndarray  # (stations, 2) at the slice start


@dataclass(frozen=True, eq=False)
class Scenario:
    """Activity of every station/AC over [start, start + horizon) minutes.

    Rates are the per-AC bit rates while active; weight is the
    likelihood-ratio weight of a sampled future (1 for plain samples).
    """

    start: int
    horizon: int
    stations: Tuple[str, ...]
    activity: np.ndarray  # (stations, ACs, minutes) bool
    rates: np.ndarray  # (stations, ACs) bps
    positions: np.ndarray  # (stations, minutes, 2)
    causes: Dict[CauseKey, np.ndarray] = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self) -> None:
        s, c, t = len(self.stations), len(AC_ORDER), self.horizon
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1 minute, got {self.horizon}")
        if self.activity.shape != (s, c, t) or self.rates.shape != (s, c) or self.positions.shape != (s, t, 2):
            raise DomainError(
                f"scenario shapes disagree: activity {self.activity.shape}, rates {self.rates.shape}, "
                f"positions {self.positions.shape} for {s} stations over {t} minutes"
            )

    @property
    def minutes(self) -> np.ndarray:
        return self.start + np.arange(self.horizon)

    def demand(self) -> np.ndarray:
        """(stations, ACs, minutes) offered bps."""
        return self.activity * self.rates[:, :, None]

    def realized_demand(self, payload_bits: int, seed: SeedLike = 0) -> np.ndarray:
        """Poisson frame arrivals per minute at the active rates, in bps."""
        rng = np.random.default_rng(seed)
        frames = rng.poisson(self.demand() * 60.0 / payload_bits)
        return frames * payload_bits / 60.0

    def aggregate(self, demand: Optional[np.ndarray] = None) -> np.ndarray:
        """(ACs, minutes) demand summed over stations."""
        return (self.demand() if demand is None else demand).sum(axis=0)

    def slices(self, slice_minutes: int, demand: Optional[np.ndarray] = None) -> List[ScenarioSlice]:
        if slice_minutes < 1:
            raise DomainError(f"slice length must be >= 1 minute, got {slice_minutes}")
        demand = self.demand() if demand is None else demand
        result = []
        for offset in range(0, self.horizon, slice_minutes):
            window = slice(offset, min(offset + slice_minutes, self.horizon))
            result.append(
                ScenarioSlice(
                    start=self.start + offset,
                    demand=demand[:, :, window].mean(axis=2),
                    positions=self.positions[:, offset, :],
                )
            )
        return result

    def station_index(self, name: str) -> int:
        return self.stations.index(name)

    def to_frame(self) -> pd.DataFrame:
        """Columnar rows (minute, sta, ac, active, rate, x, y)."""
        s, c, t = self.activity.shape
        sta = np.repeat(np.arange(s), c * t)
        ac = np.tile(np.repeat(np.arange(c), t), s)
        minute = np.tile(self.minutes, s * c)
        xy = np.repeat(self.positions, c, axis=0).reshape(-1, 2)
        return pd.DataFrame(
            {
                "minute": minute,
                "sta": np.asarray(self.stations, dtype=object)[sta],
                "ac": np.asarray(AccessCategory.values(), dtype=object)[ac],
                "active": self.activity.ravel(),
                "rate": self.rates[sta, ac],
                "x": xy[:, 0],
                "y": xy[:, 1],
            }
        )

    @classmethod
    def stack(cls, fragments: Sequence["Scenario"], weight: float = 1.0) -> "Scenario":
        if not fragments:
            raise DomainError("cannot stack an empty list of scenario fragments")
        first = fragments[0]
        if any(f.start != first.start or f.horizon != first.horizon for f in fragments):
            raise DomainError("scenario fragments must share start and horizon")
        causes: Dict[CauseKey, np.ndarray] = {}
        for fragment in fragments:
            causes.update(fragment.causes)
        return cls(
            start=first.start,
            horizon=first.horizon,
            stations=tuple(name for f in fragments for name in f.stations),
            activity=np.concatenate([f.activity for f in fragments], axis=0),
            rates=np.concatenate([f.rates for f in fragments], axis=0),
            positions=np.concatenate([f.positions for f in fragments], axis=0),
            causes=causes,
            weight=weight,
        )


def _default_params(cause: OnOffCause, ac: AccessCategory, regime: RegimeKey) -> CauseRegime:
    return cause.params(regime)


def tilted_duty(params: CauseRegime, tilt: float) -> float:
    if params.fixed_state is not None:
        return float(params.fixed_state)
    return tilt * params.mean_on / (tilt * params.mean_on + params.mean_off)


def sample_cause(
    params: Callable[[RegimeKey], CauseRegime],
    clock: RegimeClock,
    start: int,
    horizon: int,
    rng: np.random.Generator,
    *,
    tilt: float = 1.0,
) -> Tuple[np.ndarray, float]:
    """One cause's on/off path sampled at minute starts, with its log likelihood ratio.

    Durations are exponential with the mean of the regime in force and are
    redrawn at every regime boundary. The initial state follows the
    stationary duty cycle. tilt stretches on-durations; the returned log
    weight is log(base density / tilted density) of the whole path.
    """
    end = float(start + horizon)
    t = float(start)
    current = params(clock.regime_at(t))
    state = current.fixed_state
    log_weight = 0.0
    if state is None:
        base, tilted = current.duty_cycle, tilted_duty(current, tilt)
        state = bool(rng.random() < tilted)
        if tilt != 1.0:
            log_weight += math.log(base / tilted) if state else math.log((1.0 - base) / (1.0 - tilted))
    changes: List[float] = []
    states: List[bool] = [state]
    while t < end:
        boundary = min(clock.next_change(t), end)
        current = params(clock.regime_at(t))
        fixed = current.fixed_state
        if fixed is not None:
            if fixed != state:
                state = fixed
                changes.append(t)
                states.append(state)
            t = boundary
            continue
        mean = current.mean_on * tilt if state else current.mean_off
        duration = rng.exponential(mean)
        if t + duration >= boundary:
            if state and tilt != 1.0:
                exposure = boundary - t
                log_weight += exposure / mean - exposure / current.mean_on
            t = boundary
            continue
        if state and tilt != 1.0:
            log_weight += math.log(tilt) + duration / mean - duration / current.mean_on
        t += duration
        state = not state
        changes.append(t)
        states.append(state)
    minutes = start + np.arange(horizon)
    trace = np.asarray(states, dtype=bool)[np.searchsorted(changes, minutes, side="right")]
    return trace, log_weight


def sample_station(
    station: StationSpec,
    profile: RoleProfile,
    clock: RegimeClock,
    start: int,
    horizon: int,
    rng: np.random.Generator,
    *,
    params: ParamsFn = _default_params,
    tilt: float = 1.0,
) -> Tuple[Scenario, float]:
    activity = np.zeros((1, len(AC_ORDER), horizon), dtype=bool)
    rates = np.zeros((1, len(AC_ORDER)))
    causes: Dict[CauseKey, np.ndarray] = {}
    log_weight = 0.0
    for col, ac in enumerate(AC_ORDER):
        rate = profile.rate(ac)
        gating = profile.causes_for(ac)
        if rate <= 0 or not gating:
            continue
        rates[0, col] = rate
        active = np.ones(horizon, dtype=bool)
        for cause in gating:
            trace, log_w = sample_cause(
                lambda regime, cause=cause, ac=ac: params(cause, ac, regime),
                clock,
                start,
                horizon,
                rng,
                tilt=tilt,
            )
            causes[(station.name, ac, cause.name)] = trace
            active &= trace
            log_weight += log_w
        activity[0, col] = active
    codes = clock.codes(start + np.arange(horizon))
    anchors = {int(code): profile.place(station, clock.key_of(code)) for code in np.unique(codes)}
    positions = np.array([anchors[int(code)] for code in codes], dtype=float).reshape(1, horizon, 2)
    fragment = Scenario(
        start=start,
        horizon=horizon,
        stations=(station.name,),
        activity=activity,
        rates=rates,
        positions=positions,
        causes=causes,
    )
    return fragment, log_weight


def generate_trace(
    profile: RoleProfile,
    clock: RegimeClock,
    horizon: int,
    seed: SeedLike = 0,
    *,
    station: Optional[StationSpec] = None,
    start: int = 0,
) -> Scenario:
    """Scenario fragment of one station following a role profile."""
    station = station or StationSpec(name=profile.name, role=profile.name, home=(0.0, 0.0))
    fragment, _ = sample_station(station, profile, clock, start, horizon, np.random.default_rng(seed))
    return fragment


def generate_scenario(population: Population, horizon: int, seed: int = 0, start: int = 0) -> Scenario:
    """Physical-twin traffic of the whole population; one seed stream per station."""
    streams = np.random.SeedSequence(seed).spawn(len(population.stations))
    fragments = [
        generate_trace(population.profile(station), population.clock, horizon, stream, station=station, start=start)
        for station, stream in zip(population.stations, streams)
    ]
    scenario = Scenario.stack(fragments)
    logger.info(
        f"Generated {horizon / 60:.0f} h of traffic for {len(population.stations)} stations, "
        f"mean activity {scenario.activity.mean():.3f}"
    )
    return scenario
