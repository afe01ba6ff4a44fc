"""Inter-AP backhaul trees rooted at the controller AP."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import networkx as nx

from constants import BackhaulMedium, Band
from errors import ConfigError, DomainError
from spatial.floorplan import ApSite
from spatial.propagation import RadioMap

logger = logging.getLogger(name=__name__)

DEFAULT_SHORTLIST = 8


@dataclass(frozen=True)
class BackhaulChoice:
    """Parent AP index per AP (None for the controller) and the band of each link.

    bands and link_rates are indexed like parents; the controller's entries
    are unused.
    """

    topology_id: int
    parents: Tuple[Optional[int], ...]
    bands: Tuple[Optional[Band], ...]
    medium: BackhaulMedium = BackhaulMedium.WIRELESS
    link_rates: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.bands) != len(self.parents):
            raise ConfigError("one band entry per AP is required")
        if not is_rooted_tree(self.parents):
            raise ConfigError(f"backhaul parents {self.parents} do not form a tree rooted at the controller")

    @property
    def controller(self) -> int:
        return self.parents.index(None)

    @property
    def links(self) -> List[Tuple[int, int, Optional[Band]]]:
        """(child, parent, band) for every non-controller AP."""
        return [(child, parent, self.bands[child]) for child, parent in enumerate(self.parents) if parent is not None]

    def subtree(self, root: int) -> List[int]:
        return sorted(nx.descendants(tree_graph(self.parents), root) | {root})

    @classmethod
    def wired(cls, n_ap: int, controller: int = 0) -> "BackhaulChoice":
        parents = tuple(None if i == controller else controller for i in range(n_ap))
        return cls(topology_id=-1, parents=parents, bands=(None,) * n_ap, medium=BackhaulMedium.WIRED)


def tree_graph(parents: Sequence[Optional[int]]) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(parents)))
    graph.add_edges_from((parent, child) for child, parent in enumerate(parents) if parent is not None)
    return graph


def is_rooted_tree(parents: Sequence[Optional[int]]) -> bool:
    if list(parents).count(None) != 1:
        return False
    return nx.is_arborescence(tree_graph(parents))


def enumerate_topologies(n_ap: int, controller: int = 0) -> List[Tuple[Optional[int], ...]]:
    """Every parent assignment forming a tree rooted at the controller."""
    if n_ap < 1 or not 0 <= controller < n_ap:
        raise DomainError(f"need at least one AP and a controller index in range, got {n_ap}, {controller}")
    others = [i for i in range(n_ap) if i != controller]
    topologies = []
    for choice in itertools.product(range(n_ap), repeat=len(others)):
        parents: List[Optional[int]] = [None] * n_ap
        for child, parent in zip(others, choice):
            parents[child] = parent
        if all(parents[c] != c for c in others) and is_rooted_tree(parents):
            topologies.append(tuple(parents))
    return topologies


def enumerate_backhaul(
    n_ap: int = 4, bands: Sequence[Band] = tuple(Band), controller: int = 0
) -> List[BackhaulChoice]:
    """All rooted topologies times one band per wireless link."""
    if not bands:
        raise DomainError("at least one backhaul band is required")
    choices = []
    for topology_id, parents in enumerate(enumerate_topologies(n_ap, controller)):
        children = [i for i, p in enumerate(parents) if p is not None]
        for link_bands in itertools.product(bands, repeat=len(children)):
            per_ap: List[Optional[Band]] = [None] * n_ap
            for child, band in zip(children, link_bands):
                per_ap[child] = band
            choices.append(BackhaulChoice(topology_id=topology_id, parents=parents, bands=tuple(per_ap)))
    logger.debug(f"Enumerated {len(choices)} backhaul configurations for {n_ap} APs and {len(bands)} bands")
    return choices


def _distance(a: ApSite, b: ApSite) -> float:
    return math.dist(a.position, b.position)


def _nearer_parent(sites: Sequence[ApSite], child: int, controller: int) -> int:
    """Nearest AP that is closer to the controller than the child, else the controller."""
    reach = _distance(sites[child], sites[controller])
    candidates = [
        i
        for i in range(len(sites))
        if i != child and (i == controller or _distance(sites[i], sites[controller]) < reach)
    ]
    return min(candidates, key=lambda i: (_distance(sites[child], sites[i]), i))


def preferred_band(child: ApSite, parent: ApSite, radio: RadioMap, min_rx_power: float) -> Optional[Band]:
    """Highest common band whose link power is sufficient."""
    common = [band for band in Band if band in child.bands and band in parent.bands]
    for band in sorted(common, key=lambda b: b.ghz, reverse=True):
        if radio.ap_link_power(child, parent, band) >= min_rx_power:
            return band
    return None


def shortlist(
    sites: Sequence[ApSite],
    radio: RadioMap,
    *,
    controller: int = 0,
    min_rx_power: float,
    link_rate: Callable[[ApSite, ApSite, Band], float],
    limit: int = DEFAULT_SHORTLIST,
) -> List[BackhaulChoice]:
    """Reasonable wireless backhaul choices.

    Each AP links either to the controller or to the nearest AP closer to
    the controller; a far AP is never chosen over a nearer one. Every link
    uses its preferred band; link_rate gives the rate of a (child, parent, band) link.
    Choices are ordered by total link length, the star first among ties.
    """
    n_ap = len(sites)
    enumerated = enumerate_topologies(n_ap, controller)
    allowed = {
        child: {controller, _nearer_parent(sites, child, controller)} for child in range(n_ap) if child != controller
    }
    result = []
    for topology_id, parents in enumerate(enumerated):
        if any(parents[child] not in options for child, options in allowed.items()):
            continue
        bands: List[Optional[Band]] = [None] * n_ap
        rates = [0.0] * n_ap
        for child in allowed:
            parent = parents[child]
            band = preferred_band(sites[child], sites[parent], radio, min_rx_power)
            if band is None:
                break
            bands[child] = band
            rates[child] = link_rate(sites[child], sites[parent], band)
        else:
            length = sum(_distance(sites[c], sites[parents[c]]) for c in allowed)
            star = all(parents[c] == controller for c in allowed)
            result.append(
                (
                    length,
                    not star,
                    BackhaulChoice(topology_id=topology_id, parents=parents, bands=tuple(bands), link_rates=tuple(rates)),
                )
            )
    result.sort(key=lambda item: (item[0], item[1], item[2].topology_id))
    choices = [choice for _, _, choice in result[:limit]]
    logger.info(f"Backhaul short-list holds {len(choices)} of {len(enumerated)} topologies")
    return choices
