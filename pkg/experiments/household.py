import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Tuple

from bounds.frames import PhyProfile
from constants import Band
from risk.network import LinkSettings, ServiceArea
from spatial.floorplan import ApSite, Floorplan, load_sites
from spatial.propagation import FloorplanRadio, PathLossModel, load_path_loss
from traffic.profiles import Population
from utils.data_loader import PathLike

logger = logging.getLogger(name=__name__)


def _service_bands(data: Any, sites: Tuple[ApSite, ...]) -> Dict[str, Tuple[Band, ...]]:
    """A list applies to every AP; a mapping names the bands per AP."""
    if data is None:
        return {site.name: site.bands for site in sites}
    if isinstance(data, Mapping):
        return {str(ap): tuple(Band(str(b)) for b in bands) for ap, bands in data.items()}
    return {site.name: tuple(Band(str(b)) for b in data) for site in sites}


@dataclass(frozen=True, eq=False)
class Household:
    """Floorplan, APs, radio environment and station population of one declarative test case."""

    floorplan: Floorplan
    sites: Tuple[ApSite, ...]
    model: PathLossModel
    area: ServiceArea
    population: Population

    @classmethod
    def from_config(cls, config: Mapping[str, Any], phy: PhyProfile, phy_file: PathLike) -> "Household":
        floorplan = Floorplan.from_dict(config["floorplan"])
        sites = load_sites(config["aps"], floorplan)
        model = load_path_loss(phy_file)
        area = ServiceArea(
            sites,
            FloorplanRadio(floorplan, model),
            phy,
            LinkSettings.from_dict(config.get("link", {}), phy),
            _service_bands(config.get("service_bands"), sites),
        )
        population = Population.from_dict(config)
        logger.info(
            f"Household with {len(sites)} APs, {len(area.ap_bands)} serving AP/bands "
            f"and {len(population.stations)} stations"
        )
        return cls(floorplan=floorplan, sites=sites, model=model, area=area, population=population)
