"""Service area, network configuration and the min-margin objective."""

import functools
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from bounds.frames import PhyProfile
from bounds.margins import ApBand, LoadMatrix, airtime_per_bit, build_load_matrix, bound_vector, margin_values
from bounds.shannon import link_rates
from bounds.types import SaturationBound
from constants import AccessCategory, Band, BackhaulMedium
from errors import ConfigError, DomainError
from mac.types import QosParams
from risk.backhaul import BackhaulChoice
from spatial.floorplan import ApSite
from spatial.propagation import RadioMap
from traffic.generator import Scenario, ScenarioSlice

logger = logging.getLogger(name=__name__)

DEFAULT_MIN_RX_DBM = -82.0
# position sets whose rate matrices a service area keeps
RATE_CACHE_SIZE = 4096


@dataclass(frozen=True)
class LinkSettings:
    """Channel used by stations and backhaul links on every band."""

    bandwidth_hz: float
    spatial_streams: int
    min_rx_power: float = DEFAULT_MIN_RX_DBM  # dBm needed to associate or link

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], phy: PhyProfile) -> "LinkSettings":
        return cls(
            bandwidth_hz=float(data.get("bandwidth_hz", phy.bandwidth_hz)),
            spatial_streams=int(data.get("spatial_streams", phy.spatial_streams)),
            min_rx_power=float(data.get("min_rx_dbm", DEFAULT_MIN_RX_DBM)),
        )


class ServiceArea:
    """APs, their serving bands and the radio environment stations see."""

    def __init__(
        self,
        sites: Sequence[ApSite],
        radio: RadioMap,
        phy: PhyProfile,
        link: LinkSettings,
        service_bands: Optional[Mapping[str, Sequence[Band]]] = None,
    ) -> None:
        self.sites = tuple(sites)
        self.radio = radio
        self.phy = phy
        self.link = link
        self.logger = logging.getLogger(name=__name__)
        self.ap_sites: List[Tuple[ApSite, Band]] = [
            (site, band) for site in self.sites for band in (service_bands or {}).get(site.name, site.bands)
        ]
        for site, band in self.ap_sites:
            if band not in site.bands:
                raise ConfigError(f"AP {site.name} cannot serve the {band} GHz band it does not transmit on")
        self.ap_bands: Tuple[ApBand, ...] = tuple((site.name, band) for site, band in self.ap_sites)
        self._cached_rates = functools.lru_cache(maxsize=RATE_CACHE_SIZE)(self._rates_at)

    def site(self, name: str) -> ApSite:
        for site in self.sites:
            if site.name == name:
                return site
        raise DomainError(f"unknown AP {name}")

    def site_index(self, name: str) -> int:
        return [site.name for site in self.sites].index(name)

    def _rates_for(self, rx: np.ndarray) -> np.ndarray:
        return link_rates(
            rx,
            self.phy.noise_floor(self.link.bandwidth_hz),
            bandwidth=self.link.bandwidth_hz,
            spatial_streams=self.link.spatial_streams,
            impl_margin=self.phy.impl_margin_db,
            mcs_table=self.phy.mcs_spectral_efficiency,
            min_rx_power=self.link.min_rx_power,
        )

    def _rates_at(self, stations: Tuple[str, ...], packed: bytes, shape: Tuple[int, ...]) -> np.ndarray:
        positions = np.frombuffer(packed, dtype=float).reshape(shape)
        return self._rates_for(self.rx_powers(stations, positions))

    def rx_powers(self, stations: Sequence[str], positions: np.ndarray) -> np.ndarray:
        return self.radio.rx_matrix(stations, positions, self.ap_sites)

    def rates(self, stations: Sequence[str], positions: np.ndarray) -> np.ndarray:
        """(stations, ap_bands) data rates; 0 where the station cannot associate. LRU-cached per position set."""
        positions = np.ascontiguousarray(positions, dtype=float)
        return self._cached_rates(tuple(stations), positions.tobytes(), positions.shape)

    def ap_link_rate(self, child: ApSite, parent: ApSite, band: Band) -> float:
        return float(self._rates_for(np.asarray([self.radio.ap_link_power(child, parent, band)]))[0])

    def load_matrix(self, stations: Sequence[str], demand: np.ndarray, positions: np.ndarray) -> LoadMatrix:
        return build_load_matrix(stations, self.ap_bands, demand, self.rates(stations, positions), self.phy.frame)

    def slice_matrices(self, scenario: Scenario, slices: Sequence[ScenarioSlice]) -> List[LoadMatrix]:
        return [self.load_matrix(scenario.stations, s.demand, s.positions) for s in slices]


@dataclass(frozen=True)
class NetworkConfig:
    """Associations, backhaul and per-AP EDCA sets of one network state."""

    aps: Tuple[ApSite, ...]
    associations: Dict[str, ApBand]
    backhaul: BackhaulChoice
    qos: Dict[str, Dict[AccessCategory, QosParams]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = {ap.name for ap in self.aps}
        stray = {ap for ap, _ in self.associations.values()} - names
        if stray:
            raise ConfigError(f"associations refer to unknown APs {sorted(stray)}")
        if len(self.backhaul.parents) != len(self.aps):
            raise ConfigError("backhaul choice does not match the AP list")

    def with_association(self, sta: str, ap_band: ApBand) -> "NetworkConfig":
        associations = dict(self.associations)
        associations[sta] = ap_band
        return replace(self, associations=associations)

    def with_backhaul(self, backhaul: BackhaulChoice) -> "NetworkConfig":
        return replace(self, backhaul=backhaul)

    def backhaul_load(self, matrix: LoadMatrix, assignment: Optional[np.ndarray] = None) -> np.ndarray:
        """Normalized load each wireless link adds on its parent AP's link band.

        A link carries the summed demand of every station served in the
        child's subtree.
        """
        extra = np.zeros(len(matrix.ap_bands))
        if self.backhaul.medium is BackhaulMedium.WIRED:
            return extra
        if assignment is None:
            assignment = matrix.assignment(self.associations)
        names = [ap.name for ap in self.aps]
        served = assignment >= 0
        per_ap = np.zeros(len(self.aps))
        owners = [names.index(matrix.ap_bands[col][0]) for col in assignment[served]]
        np.add.at(per_ap, owners, matrix.demand[served].sum(axis=1))
        for child, parent, band in self.backhaul.links:
            key = (names[parent], band)
            if key not in matrix.ap_bands:
                continue
            carried = per_ap[self.backhaul.subtree(child)].sum()
            rate = self.backhaul.link_rates[child] if self.backhaul.link_rates else 0.0
            if carried > 0:
                extra[matrix.ap_bands.index(key)] += carried * float(airtime_per_bit(np.asarray([rate]), matrix.frame)[0])
        return extra

    def snapshot(self) -> Dict[str, Any]:
        return {
            "associations": {sta: {"ap": ap, "band": str(band)} for sta, (ap, band) in sorted(self.associations.items())},
            "backhaul": {
                "medium": str(self.backhaul.medium),
                "topology_id": self.backhaul.topology_id,
                "parents": list(self.backhaul.parents),
                "bands": [None if b is None else str(b) for b in self.backhaul.bands],
            },
            "qos": {ap: {str(ac): q.to_dict() for ac, q in table.items()} for ap, table in sorted(self.qos.items())},
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.snapshot(), sort_keys=True)


def associate_strongest(area: ServiceArea, stations: Sequence[str], positions: np.ndarray) -> Dict[str, ApBand]:
    """Baseline policy: every station joins the reachable AP/band with the highest received power."""
    rx = area.rx_powers(stations, positions)
    reachable = area.rates(stations, positions) > 0
    rx = np.where(reachable, rx, -np.inf)
    associations = {}
    for row, sta in enumerate(stations):
        if reachable[row].any():
            associations[sta] = area.ap_bands[int(np.argmax(rx[row]))]
    return associations


def build_config(
    area: ServiceArea,
    associations: Mapping[str, ApBand],
    backhaul: Optional[BackhaulChoice] = None,
    qos: Optional[Mapping[AccessCategory, QosParams]] = None,
) -> NetworkConfig:
    """Config with one EDCA table shared by every AP; wired backhaul by default."""
    return NetworkConfig(
        aps=area.sites,
        associations=dict(associations),
        backhaul=backhaul or BackhaulChoice.wired(len(area.sites)),
        qos={site.name: dict(qos) for site in area.sites} if qos else {},
    )


def margin_table(
    config: NetworkConfig, matrices: Sequence[LoadMatrix], bounds: Mapping[AccessCategory, SaturationBound]
) -> np.ndarray:
    """(slices, ap_bands) margins of a config over a sequence of load matrices."""
    s_by_ac = bound_vector(bounds)
    rows = []
    for matrix in matrices:
        assignment = matrix.assignment(config.associations)
        rows.append(margin_values(matrix, assignment, s_by_ac, config.backhaul_load(matrix, assignment))[2])
    return np.asarray(rows).reshape(len(matrices), -1)


def evaluate_config(
    config: NetworkConfig,
    scenario: Scenario,
    bounds: Mapping[AccessCategory, SaturationBound],
    area: ServiceArea,
    *,
    slice_minutes: int = 15,
) -> float:
    """Minimum margin over every AP/band and time slice of a scenario."""
    matrices = area.slice_matrices(scenario, scenario.slices(slice_minutes))
    return float(margin_table(config, matrices, bounds).min())
