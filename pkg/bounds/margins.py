"""Per-AP/band latency margins: combined bound minus summed normalized load."""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bounds.frames import FrameFormat
from bounds.types import Margin, SaturationBound
from constants import DEFAULT_MARGIN_THRESHOLD, AccessCategory, Band
from errors import DomainError, UnassociatedStationError

if TYPE_CHECKING:
    from risk.network import NetworkConfig

logger = logging.getLogger(name=__name__)

AC_ORDER: Tuple[AccessCategory, ...] = tuple(AccessCategory)
ApBand = Tuple[str, Band]


def airtime_per_bit(rates: np.ndarray, frame: FrameFormat, payload_bytes: Optional[int] = None) -> np.ndarray:
    """Vectorised PPDU airtime per payload bit; infinite where the rate is 0."""
    rates = np.asarray(rates, dtype=float)
    bits = frame.payload_bits(payload_bytes)
    on_air = bits + 8 * frame.mac_overhead_bytes + frame.service_tail_bits
    with np.errstate(divide="ignore"):
        return np.where(rates > 0, (frame.preamble + on_air / np.where(rates > 0, rates, 1.0)) / bits, np.inf)


@dataclass(frozen=True, eq=False)
class LoadMatrix:
    """Normalized offered load each station would put on each AP/band, per AC.

    loads has shape (stations, ap_bands, ACs); it is infinite where a station
    with demand cannot reach an AP/band.
    """

    stations: Tuple[str, ...]
    ap_bands: Tuple[ApBand, ...]
    loads: np.ndarray
    demand: np.ndarray  # (stations, ACs) bps
    rates: np.ndarray  # (stations, ap_bands) bps
    frame: FrameFormat

    @property
    def active(self) -> np.ndarray:
        return self.demand > 0

    def column(self, ap_band: ApBand) -> int:
        try:
            return self.ap_bands.index(ap_band)
        except ValueError:
            raise DomainError(f"unknown AP/band {ap_band}") from None

    def assignment(self, associations: Mapping[str, ApBand]) -> np.ndarray:
        """Column index per station; -1 for idle stations without an association."""
        index = np.full(len(self.stations), -1, dtype=int)
        for row, sta in enumerate(self.stations):
            if sta in associations:
                index[row] = self.column(associations[sta])
            elif self.active[row].any():
                raise UnassociatedStationError(f"station {sta} has demand but no AP/band association")
        return index

    def per_ap_band(self, assignment: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Summed load and active contender count per AP/band and AC."""
        served = assignment >= 0
        rows = np.flatnonzero(served)
        chosen = self.loads[rows, assignment[served], :]
        loads = np.zeros((len(self.ap_bands), len(AC_ORDER)))
        counts = np.zeros_like(loads)
        np.add.at(loads, assignment[served], np.where(self.active[rows], chosen, 0.0))
        np.add.at(counts, assignment[served], self.active[rows].astype(float))
        return loads, counts


def build_load_matrix(
    stations: Sequence[str],
    ap_bands: Sequence[ApBand],
    demand: np.ndarray,
    rates: np.ndarray,
    frame: FrameFormat,
) -> LoadMatrix:
    demand = np.asarray(demand, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if demand.shape != (len(stations), len(AC_ORDER)) or rates.shape != (len(stations), len(ap_bands)):
        raise DomainError(f"shape mismatch: demand {demand.shape}, rates {rates.shape}")
    per_bit = airtime_per_bit(rates, frame)
    with np.errstate(invalid="ignore"):
        loads = np.where(demand[:, None, :] > 0, demand[:, None, :] * per_bit[:, :, None], 0.0)
    return LoadMatrix(
        stations=tuple(stations),
        ap_bands=tuple(ap_bands),
        loads=loads,
        demand=demand,
        rates=rates,
        frame=frame,
    )


def bound_vector(bounds: Mapping[AccessCategory, SaturationBound]) -> np.ndarray:
    missing = [ac for ac in AC_ORDER if ac not in bounds]
    if missing:
        raise DomainError(f"saturation bounds missing for {missing}")
    return np.array([bounds[ac].s_star for ac in AC_ORDER])


def combined_bounds(counts: np.ndarray, s_by_ac: np.ndarray) -> np.ndarray:
    """Count-weighted bound per AP/band; equal-weight AC average where nothing is active."""
    totals = counts.sum(axis=1)
    weighted = counts @ s_by_ac / np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, weighted, s_by_ac.mean())


def margin_values(
    matrix: LoadMatrix,
    assignment: np.ndarray,
    s_by_ac: np.ndarray,
    extra_load: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bound, carried load and margin per AP/band for one assignment."""
    loads, counts = matrix.per_ap_band(assignment)
    carried = loads.sum(axis=1)
    if extra_load is not None:
        carried = carried + extra_load
    bound = combined_bounds(counts, s_by_ac)
    return bound, carried, bound - carried


def compute_margins(
    config: "NetworkConfig",
    matrix: LoadMatrix,
    bounds: Mapping[AccessCategory, SaturationBound],
    *,
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
) -> List[Margin]:
    """Margins of every AP/band the config serves.

    config supplies the station associations and the normalized load its
    wireless backhaul adds per AP/band (backhaul_load(matrix)).
    """
    if not 0 <= threshold < 1:
        raise DomainError(f"threshold must lie in [0, 1), got {threshold}")
    assignment = matrix.assignment(config.associations)
    bound, carried, value = margin_values(matrix, assignment, bound_vector(bounds), config.backhaul_load(matrix))
    return [
        Margin(
            ap=ap,
            band=band,
            value=float(value[col]),
            bound=float(bound[col]),
            load=float(carried[col]),
            alarm=bool(value[col] < threshold * bound[col]),
        )
        for col, (ap, band) in enumerate(matrix.ap_bands)
    ]


def margins_frame(margins: Sequence[Margin], time: int) -> pd.DataFrame:
    """CSV rows (time, ap, band, margin, alarm) of one evaluation."""
    return pd.DataFrame(
        [
            {"time": time, "ap": m.ap, "band": str(m.band), "margin": m.value, "alarm": m.alarm}
            for m in margins
        ],
        columns=["time", "ap", "band", "margin", "alarm"],
    )
