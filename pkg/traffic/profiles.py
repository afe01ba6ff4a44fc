"""Role profiles, latent on/off causes and the day-part/weekend regime clock."""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import MINUTES_PER_DAY, AccessCategory
from errors import ConfigError
from spatial.floorplan import Point

logger = logging.getLogger(name=__name__)

RegimeKey = Tuple[int, bool]  # (day part, weekend)
WEEKDAY = "weekday"
WEEKEND = "weekend"
WILDCARD = "*"


@dataclass(frozen=True)
class RegimeClock:
    """Day parts by starting hour and the set of weekend days (Monday = 0).

    Minute 0 is Monday 00:00. A day part runs until the next boundary; when
    the first boundary is not midnight the last part wraps over it.
    """

    day_part_boundaries: Tuple[float, ...]
    weekend_days: FrozenSet[int] = frozenset({5, 6})
    part_names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        hours = self.day_part_boundaries
        if not hours or any(b <= a for a, b in zip(hours, hours[1:])) or hours[0] < 0 or hours[-1] >= 24:
            raise ConfigError(f"day-part boundaries must be strictly increasing within 24 h, got {hours}")
        if not self.weekend_days <= set(range(7)):
            raise ConfigError(f"weekend days must lie in 0..6, got {sorted(self.weekend_days)}")
        if self.part_names and len(self.part_names) != len(hours):
            raise ConfigError("one name per day part is required")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegimeClock":
        parts = data["day_parts"]
        if isinstance(parts, Mapping):
            names, hours = tuple(str(k) for k in parts), tuple(float(v) for v in parts.values())
        else:
            names, hours = (), tuple(float(v) for v in parts)
        return cls(
            day_part_boundaries=hours,
            weekend_days=frozenset(int(d) for d in data.get("weekend_days", (5, 6))),
            part_names=names,
        )

    @property
    def n_parts(self) -> int:
        return len(self.day_part_boundaries)

    @property
    def keys(self) -> List[RegimeKey]:
        return [(part, weekend) for weekend in (False, True) for part in range(self.n_parts)]

    def _part(self, minute_of_day: np.ndarray) -> np.ndarray:
        edges = np.asarray(self.day_part_boundaries) * 60.0
        part = np.searchsorted(edges, minute_of_day, side="right") - 1
        return np.where(part < 0, self.n_parts - 1, part)

    def codes(self, minutes: np.ndarray) -> np.ndarray:
        """Regime code part + n_parts * weekend for each (absolute) minute."""
        minutes = np.asarray(minutes, dtype=float)
        day = (minutes // MINUTES_PER_DAY).astype(int) % 7
        weekend = np.isin(day, list(self.weekend_days))
        return self._part(minutes % MINUTES_PER_DAY) + self.n_parts * weekend

    def key_of(self, code: int) -> RegimeKey:
        return int(code) % self.n_parts, bool(code >= self.n_parts)

    def code_of(self, key: RegimeKey) -> int:
        return key[0] + self.n_parts * int(key[1])

    def regime_at(self, minute: float) -> RegimeKey:
        day = int(minute // MINUTES_PER_DAY) % 7
        part = bisect.bisect_right(self.day_part_boundaries, (minute % MINUTES_PER_DAY) / 60.0) - 1
        return (part if part >= 0 else self.n_parts - 1), day in self.weekend_days

    def next_change(self, minute: float) -> float:
        """First day-part boundary or midnight strictly after minute."""
        day_start = math.floor(minute / MINUTES_PER_DAY) * MINUTES_PER_DAY
        offsets = [h * 60.0 for h in self.day_part_boundaries] + [float(MINUTES_PER_DAY)]
        for base in (day_start, day_start + MINUTES_PER_DAY):
            for offset in offsets:
                if base + offset > minute:
                    return base + offset
        return day_start + 2 * MINUTES_PER_DAY

    def parse_key(self, text: str) -> List[RegimeKey]:
        """'evening.weekend', 'evening' (both), '*.weekend' or 'weekend' (all parts)."""
        part_text, _, day_text = str(text).partition(".")
        if part_text in (WEEKDAY, WEEKEND) and not day_text:
            part_text, day_text = WILDCARD, part_text
        if part_text == WILDCARD:
            parts = list(range(self.n_parts))
        elif part_text in self.part_names:
            parts = [self.part_names.index(part_text)]
        else:
            raise ConfigError(f"unknown day part '{part_text}' in regime key '{text}'")
        if day_text in ("", WILDCARD):
            days = [False, True]
        elif day_text in (WEEKDAY, WEEKEND):
            days = [day_text == WEEKEND]
        else:
            raise ConfigError(f"regime key '{text}' must end in weekday or weekend")
        return [(part, weekend) for part in parts for weekend in days]

    def label(self, key: RegimeKey) -> str:
        name = self.part_names[key[0]] if self.part_names else str(key[0])
        return f"{name}.{WEEKEND if key[1] else WEEKDAY}"


@dataclass(frozen=True)
class CauseRegime:
    """On/off mean durations in minutes; pinned forces a state for the whole regime."""

    mean_on: float
    mean_off: float
    pinned: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.pinned is None and not (self.mean_on > 0 and self.mean_off > 0):
            raise ConfigError(f"mean durations must be > 0, got on={self.mean_on}, off={self.mean_off}")
        if self.pinned is None and math.isinf(self.mean_on):
            raise ConfigError("an infinite on-duration is written as mean_off: .inf (always on)")

    @property
    def fixed_state(self) -> Optional[bool]:
        if self.pinned is not None:
            return self.pinned
        if math.isinf(self.mean_off):
            return True
        return None

    @property
    def duty_cycle(self) -> float:
        state = self.fixed_state
        if state is not None:
            return float(state)
        return self.mean_on / (self.mean_on + self.mean_off)


def _cause_regime(data: Mapping[str, Any], default: Optional[CauseRegime] = None) -> CauseRegime:
    pinned = data.get("pinned")
    if data.get("always_on"):
        pinned = True
    return CauseRegime(
        mean_on=float(data.get("mean_on", default.mean_on if default else 1.0)),
        mean_off=float(data.get("mean_off", default.mean_off if default else 1.0)),
        pinned=None if pinned is None else bool(pinned),
    )


@dataclass(frozen=True)
class OnOffCause:
    """One latent activity cause; acs limits the access categories it gates."""

    name: str
    mean_on: float
    mean_off: float
    regime_table: Dict[RegimeKey, CauseRegime] = field(default_factory=dict)
    acs: Optional[FrozenSet[AccessCategory]] = None
    pinned: Optional[bool] = None

    def __post_init__(self) -> None:
        if self.pinned is None and not (self.mean_on > 0 and self.mean_off > 0):
            raise ConfigError(f"cause {self.name} needs positive mean durations")

    @property
    def base(self) -> CauseRegime:
        return CauseRegime(mean_on=self.mean_on, mean_off=self.mean_off, pinned=self.pinned)

    def params(self, regime: RegimeKey) -> CauseRegime:
        return self.regime_table.get(regime) or self.base

    def gates(self, ac: AccessCategory) -> bool:
        return self.acs is None or ac in self.acs

    @classmethod
    def from_dict(cls, data: Dict[str, Any], clock: RegimeClock) -> "OnOffCause":
        base = _cause_regime(data)
        table: Dict[RegimeKey, CauseRegime] = {}
        for text, override in (data.get("regimes") or {}).items():
            for key in clock.parse_key(text):
                table[key] = _cause_regime(override, default=base)
        acs = data.get("acs")
        return cls(
            name=str(data["name"]),
            mean_on=base.mean_on,
            mean_off=base.mean_off,
            regime_table=table,
            acs=None if acs is None else frozenset(AccessCategory(a) for a in acs),
            pinned=base.pinned,
        )


@dataclass(frozen=True)
class RoleProfile:
    """Behaviour shared by all stations of one role.

    Per-AC rate when active is base_rate * ac_mix[ac] (bps); location_rule
    maps a regime to the anchor point the role's stations gather around.
    """

    name: str
    causes: Tuple[OnOffCause, ...]
    base_rate: float
    ac_mix: Dict[AccessCategory, float]
    location_rule: Dict[RegimeKey, Point] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.causes:
            raise ConfigError(f"role {self.name} needs at least one cause")
        if self.base_rate < 0 or any(v < 0 for v in self.ac_mix.values()):
            raise ConfigError(f"role {self.name} has a negative rate or AC multiplier")

    def rate(self, ac: AccessCategory) -> float:
        return self.base_rate * self.ac_mix.get(ac, 0.0)

    def causes_for(self, ac: AccessCategory) -> Tuple[OnOffCause, ...]:
        return tuple(cause for cause in self.causes if cause.gates(ac))

    def place(self, station: "StationSpec", regime: RegimeKey) -> Point:
        anchor = self.location_rule.get(regime)
        if anchor is None:
            return station.home
        return anchor[0] + station.offset[0], anchor[1] + station.offset[1]

    @property
    def active_acs(self) -> Tuple[AccessCategory, ...]:
        return tuple(ac for ac in AccessCategory if self.rate(ac) > 0 and self.causes_for(ac))

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any], clock: RegimeClock) -> "RoleProfile":
        rule: Dict[RegimeKey, Point] = {}
        for text, anchor in (data.get("location_rule") or {}).items():
            for key in clock.parse_key(text):
                rule[key] = (float(anchor[0]), float(anchor[1]))
        return cls(
            name=name,
            causes=tuple(OnOffCause.from_dict(c, clock) for c in data["causes"]),
            base_rate=float(data["base_rate_mbps"]) * 1e6,
            ac_mix={AccessCategory(ac): float(v) for ac, v in data["ac_mix"].items()},
            location_rule=rule,
        )


@dataclass(frozen=True)
class StationSpec:
    name: str
    role: str
    home: Point
    offset: Point = (0.0, 0.0)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StationSpec":
        return cls(
            name=str(data["name"]),
            role=str(data["role"]),
            home=tuple(float(v) for v in data["home"]),
            offset=tuple(float(v) for v in data.get("offset", (0.0, 0.0))),
        )


@dataclass(frozen=True)
class Population:
    clock: RegimeClock
    roles: Dict[str, RoleProfile]
    stations: Tuple[StationSpec, ...]

    def __post_init__(self) -> None:
        unknown = {s.role for s in self.stations} - set(self.roles)
        if unknown:
            raise ConfigError(f"stations refer to undefined roles {sorted(unknown)}")
        names = [s.name for s in self.stations]
        if len(set(names)) != len(names):
            raise ConfigError("station names must be unique")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Population":
        clock = RegimeClock.from_dict(data["regimes"])
        roles = {name: RoleProfile.from_dict(name, role, clock) for name, role in data["roles"].items()}
        population = cls(
            clock=clock,
            roles=roles,
            stations=tuple(StationSpec.from_dict(s) for s in data["stations"]),
        )
        logger.debug(f"Loaded {len(population.stations)} stations in {len(roles)} roles")
        return population

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.stations)

    def profile(self, station: StationSpec) -> RoleProfile:
        return self.roles[station.role]

    def position(self, station: StationSpec, regime: RegimeKey) -> Point:
        return self.profile(station).place(station, regime)

    def positions(self, codes: Sequence[int]) -> np.ndarray:
        """(stations, len(codes), 2) positions for a sequence of regime codes."""
        table = {
            code: np.array([self.position(s, self.clock.key_of(code)) for s in self.stations], dtype=float)
            for code in set(int(c) for c in codes)
        }
        if not codes:
            return np.zeros((len(self.stations), 0, 2))
        return np.stack([table[int(c)] for c in codes], axis=1)
