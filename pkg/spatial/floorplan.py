import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from constants import Band
from errors import ConfigError, DomainError

logger = logging.getLogger(name=__name__)

Point = Tuple[float, float]
_EPS = 1e-9


def _bands_mapping(data: Mapping[Any, Any]) -> Dict[Band, float]:
    return {Band(str(key)): float(value) for key, value in data.items()}


@dataclass(frozen=True)
class Wall:
    """Straight partition with a per-band penetration loss in dB."""

    start: Point
    end: Point
    attenuation: Dict[Band, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if any(value < 0 for value in self.attenuation.values()):
            raise ConfigError(f"wall attenuation must be >= 0 dB, got {self.attenuation}")

    def loss(self, band: Band) -> float:
        return self.attenuation.get(band, 0.0)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Wall":
        return cls(
            start=tuple(float(v) for v in data["start"]),
            end=tuple(float(v) for v in data["end"]),
            attenuation=_bands_mapping(data.get("attenuation_db", {})),
        )


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle, e.g. a sofa or desk where stations gather."""

    name: str
    lower: Point
    upper: Point
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (self.lower[0] < self.upper[0] and self.lower[1] < self.upper[1]):
            raise ConfigError(f"region {self.name} has an empty extent")
        if not self.weight > 0:
            raise ConfigError(f"region {self.name} needs a positive weight")

    @property
    def area(self) -> float:
        return (self.upper[0] - self.lower[0]) * (self.upper[1] - self.lower[1])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Region":
        return cls(
            name=str(data["name"]),
            lower=tuple(float(v) for v in data["lower"]),
            upper=tuple(float(v) for v in data["upper"]),
            weight=float(data.get("weight", 1.0)),
        )


@dataclass(frozen=True)
class ApSite:
    name: str
    position: Point
    tx_power: Dict[Band, float]  # dBm
    bands: Tuple[Band, ...] = tuple(Band)

    def __post_init__(self) -> None:
        missing = [band for band in self.bands if band not in self.tx_power]
        if not self.bands or missing:
            raise ConfigError(f"AP {self.name} needs a tx power for every band it serves, missing {missing}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ApSite":
        power = data["tx_power_dbm"]
        bands = tuple(Band(str(b)) for b in data.get("bands", Band.values()))
        if not isinstance(power, Mapping):
            power = {band: power for band in bands}
        return cls(
            name=str(data["name"]),
            position=tuple(float(v) for v in data["position"]),
            tx_power=_bands_mapping(power),
            bands=bands,
        )


@dataclass(frozen=True)
class Floorplan:
    """Rectangular plan [0, width] x [0, height] in meters."""

    width: float
    height: float
    walls: Tuple[Wall, ...] = ()
    furniture: Tuple[Region, ...] = ()

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"floorplan extent must be positive, got {self.width} x {self.height}")
        for wall in self.walls:
            if not (self.contains(wall.start) and self.contains(wall.end)):
                raise ConfigError(f"wall {wall.start} -> {wall.end} leaves the floorplan")
        for region in self.furniture:
            if not (self.contains(region.lower) and self.contains(region.upper)):
                raise ConfigError(f"furniture region {region.name} leaves the floorplan")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Floorplan":
        width, height = (float(v) for v in data["extent_m"])
        return cls(
            width=width,
            height=height,
            walls=tuple(Wall.from_dict(w) for w in data.get("walls", [])),
            furniture=tuple(Region.from_dict(r) for r in data.get("furniture", [])),
        )

    def contains(self, point: Point) -> bool:
        x, y = point
        return -_EPS <= x <= self.width + _EPS and -_EPS <= y <= self.height + _EPS

    def check_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        outside = (
            (points[:, 0] < -_EPS)
            | (points[:, 0] > self.width + _EPS)
            | (points[:, 1] < -_EPS)
            | (points[:, 1] > self.height + _EPS)
        )
        if outside.any():
            raise DomainError(f"{int(outside.sum())} point(s) outside the {self.width} x {self.height} m floorplan")
        return points

    def wall_losses(self, band: Band) -> np.ndarray:
        return np.array([wall.loss(band) for wall in self.walls])

    def crossings(self, origin: Point, points: np.ndarray) -> np.ndarray:
        """Boolean (points, walls) matrix: segment origin -> point properly crosses the wall.

        Touching a wall end or running along it does not count.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.walls:
            return np.zeros((len(points), 0), dtype=bool)
        a = np.asarray(origin, dtype=float)
        starts = np.array([w.start for w in self.walls], dtype=float)
        ends = np.array([w.end for w in self.walls], dtype=float)

        def orientation(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
            return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

        b = points[:, None, :]
        o1 = orientation(a, b, starts[None, :, :])
        o2 = orientation(a, b, ends[None, :, :])
        o3 = orientation(starts[None, :, :], ends[None, :, :], np.broadcast_to(a, b.shape))
        o4 = orientation(starts[None, :, :], ends[None, :, :], b)
        return (o1 * o2 < -_EPS) & (o3 * o4 < -_EPS)

    def grid(self, resolution: float) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates covering the extent."""
        if not resolution > 0:
            raise DomainError(f"resolution must be > 0, got {resolution}")
        nx = max(1, int(round(self.width / resolution)))
        ny = max(1, int(round(self.height / resolution)))
        xs = (np.arange(nx) + 0.5) * self.width / nx
        ys = (np.arange(ny) + 0.5) * self.height / ny
        return xs, ys

    def uniform_points(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(low=(0.0, 0.0), high=(self.width, self.height), size=(count, 2))

    def furniture_points(self, count: int, seed: int = 0, spread: Optional[float] = None) -> np.ndarray:
        """Points clustered on furniture regions, picked by area times weight.

        spread adds isotropic Gaussian jitter (m) clipped to the extent.
        """
        if not self.furniture:
            raise ConfigError("floorplan has no furniture regions for a non-uniform placement")
        rng = np.random.default_rng(seed)
        weights = np.array([r.area * r.weight for r in self.furniture])
        chosen = rng.choice(len(self.furniture), size=count, p=weights / weights.sum())
        lower = np.array([r.lower for r in self.furniture])[chosen]
        upper = np.array([r.upper for r in self.furniture])[chosen]
        points = rng.uniform(low=lower, high=upper)
        if spread:
            points = points + rng.normal(scale=spread, size=points.shape)
        return np.clip(points, 0.0, (self.width, self.height))


def load_sites(entries: Sequence[Dict[str, Any]], floorplan: Floorplan) -> Tuple[ApSite, ...]:
    sites = tuple(ApSite.from_dict(entry) for entry in entries)
    for site in sites:
        if not floorplan.contains(site.position):
            raise ConfigError(f"AP {site.name} at {site.position} lies outside the floorplan")
    names = [site.name for site in sites]
    if len(set(names)) != len(names):
        raise ConfigError(f"AP names must be unique, got {names}")
    logger.debug(f"Loaded {len(sites)} AP sites: {', '.join(names)}")
    return sites
