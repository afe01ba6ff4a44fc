"""Multi-wall log-distance received power, heatmaps and spatial signatures."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from constants import Band
from errors import ConfigError, DomainError
from spatial.floorplan import ApSite, Floorplan, Point
from utils.data_loader import PathLike, load_yaml

logger = logging.getLogger(name=__name__)

PHY_FILE = "phy_80211ax.yaml"


@dataclass(frozen=True)
class BandPathLoss:
    ref_loss: float  # dB at d0
    exponent: float

    def __post_init__(self) -> None:
        if not self.exponent > 0:
            raise ConfigError(f"path-loss exponent must be > 0, got {self.exponent}")


@dataclass(frozen=True)
class PathLossModel:
    d0: float
    bands: Dict[Band, BandPathLoss]

    def __post_init__(self) -> None:
        if not self.d0 > 0:
            raise ConfigError(f"reference distance must be > 0, got {self.d0}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PathLossModel":
        return cls(
            d0=float(data.get("d0_m", 1.0)),
            bands={
                Band(str(name)): BandPathLoss(ref_loss=float(v["ref_loss_db"]), exponent=float(v["exponent"]))
                for name, v in data["bands"].items()
            },
        )

    def band(self, band: Band) -> BandPathLoss:
        try:
            return self.bands[band]
        except KeyError:
            raise ConfigError(f"no path-loss parameters for the {band} GHz band") from None

    def loss(self, band: Band, distance: np.ndarray) -> np.ndarray:
        """Free-path loss in dB; distances below d0 are clamped to d0."""
        params = self.band(band)
        d = np.maximum(np.asarray(distance, dtype=float), self.d0)
        return params.ref_loss + 10.0 * params.exponent * np.log10(d / self.d0)


def load_path_loss(filename: PathLike = PHY_FILE) -> PathLossModel:
    return PathLossModel.from_dict(load_yaml(filename)["propagation"])


def received_powers(
    ap: ApSite, band: Band, points: np.ndarray, floorplan: Floorplan, model: PathLossModel
) -> np.ndarray:
    """Received power (dBm) at each point, walls on the straight path subtracted."""
    if band not in ap.tx_power:
        raise DomainError(f"AP {ap.name} does not transmit on the {band} GHz band")
    points = floorplan.check_points(points)
    distance = np.hypot(points[:, 0] - ap.position[0], points[:, 1] - ap.position[1])
    walls = floorplan.crossings(ap.position, points).astype(float) @ floorplan.wall_losses(band)
    return ap.tx_power[band] - model.loss(band, distance) - walls


def received_power(ap: ApSite, band: Band, point: Point, floorplan: Floorplan, model: PathLossModel) -> float:
    return float(received_powers(ap, band, np.asarray([point]), floorplan, model)[0])


@dataclass(frozen=True, eq=False)
class Heatmap:
    ap: str
    band: Band
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (len(ys), len(xs)) dBm

    def to_frame(self) -> pd.DataFrame:
        """Long-format CSV grid (x, y, rx_dbm)."""
        x, y = np.meshgrid(self.xs, self.ys)
        return pd.DataFrame({"x": x.ravel(), "y": y.ravel(), "rx_dbm": self.values.ravel()})

    def argmax(self) -> Point:
        row, col = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.xs[col]), float(self.ys[row])


def heatmap(ap: ApSite, band: Band, resolution: float, floorplan: Floorplan, model: PathLossModel) -> Heatmap:
    xs, ys = floorplan.grid(resolution)
    x, y = np.meshgrid(xs, ys)
    values = received_powers(ap, band, np.column_stack([x.ravel(), y.ravel()]), floorplan, model)
    return Heatmap(ap=ap.name, band=band, xs=xs, ys=ys, values=values.reshape(x.shape))


@dataclass(frozen=True, eq=False)
class SignatureSet:
    """Spatial signatures of a point set, one row per point.

    Columns are ordered AP-major, band-minor; labels name them "ap@band".
    """

    points: np.ndarray
    labels: Tuple[str, ...]
    vectors: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.vectors[index]


def signatures(
    sites: Sequence[ApSite],
    bands: Sequence[Band],
    points: np.ndarray,
    floorplan: Floorplan,
    model: PathLossModel,
) -> SignatureSet:
    if not sites or not bands:
        raise DomainError("signatures need at least one AP site and one band")
    points = floorplan.check_points(points)
    columns = [received_powers(site, band, points, floorplan, model) for site in sites for band in bands]
    return SignatureSet(
        points=points,
        labels=tuple(f"{site.name}@{band}" for site in sites for band in bands),
        vectors=np.column_stack(columns),
    )


class RadioMap(ABC):
    """Received power between stations and AP/bands, and between APs."""

    @abstractmethod
    def rx_power(self, sta: str, position: Point, ap: ApSite, band: Band) -> float:
        raise NotImplementedError

    @abstractmethod
    def ap_link_power(self, child: ApSite, parent: ApSite, band: Band) -> float:
        raise NotImplementedError

    def rx_matrix(
        self, stations: Sequence[str], positions: np.ndarray, ap_bands: Sequence[Tuple[ApSite, Band]]
    ) -> np.ndarray:
        """(stations, ap_bands) received power in dBm."""
        return np.array(
            [[self.rx_power(sta, tuple(pos), ap, band) for ap, band in ap_bands] for sta, pos in zip(stations, positions)]
        ).reshape(len(stations), len(ap_bands))


class FloorplanRadio(RadioMap):
    def __init__(self, floorplan: Floorplan, model: PathLossModel) -> None:
        self.floorplan = floorplan
        self.model = model
        self.logger = logging.getLogger(name=__name__)

    def rx_power(self, sta: str, position: Point, ap: ApSite, band: Band) -> float:
        return received_power(ap, band, position, self.floorplan, self.model)

    def ap_link_power(self, child: ApSite, parent: ApSite, band: Band) -> float:
        return received_power(parent, band, child.position, self.floorplan, self.model)

    def rx_matrix(
        self, stations: Sequence[str], positions: np.ndarray, ap_bands: Sequence[Tuple[ApSite, Band]]
    ) -> np.ndarray:
        positions = np.asarray(positions, dtype=float).reshape(len(stations), 2)
        if not ap_bands:
            return np.zeros((len(stations), 0))
        return np.column_stack(
            [received_powers(ap, band, positions, self.floorplan, self.model) for ap, band in ap_bands]
        )


class StaticRadioMap(RadioMap):
    """Fixed RCPI table keyed by (station, AP, band); missing links are unreachable."""

    def __init__(
        self,
        table: Mapping[Tuple[str, str, Band], float],
        ap_links: Optional[Mapping[Tuple[str, str, Band], float]] = None,
    ) -> None:
        self.table = dict(table)
        self.ap_links = dict(ap_links or {})

    def rx_power(self, sta: str, position: Point, ap: ApSite, band: Band) -> float:
        return self.table.get((sta, ap.name, band), -np.inf)

    def ap_link_power(self, child: ApSite, parent: ApSite, band: Band) -> float:
        return self.ap_links.get((child.name, parent.name, band), -np.inf)
