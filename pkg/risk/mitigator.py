"""Gradient-search risk mitigation over associations and the backhaul short-list."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from bounds.margins import ApBand, LoadMatrix
from bounds.types import SaturationBound
from constants import DEFAULT_MARGIN_THRESHOLD, AccessCategory, Band, BandPolicy, MitigationStatus
from errors import ConfigError
from risk.backhaul import BackhaulChoice
from risk.monitor import check_slice
from risk.network import NetworkConfig, ServiceArea, margin_table
from traffic.generator import Scenario

logger = logging.getLogger(name=__name__)

IMPROVEMENT_TOL = 1e-12
MOVE_COLUMNS = ["iteration", "kind", "sta", "source", "target", "min_margin", "rematched"]


@dataclass(frozen=True)
class MitigationKnobs:
    m: int = 1  # target AP/bands per iteration
    n: int = 3  # costliest stations per target
    k: int = 3  # savior AP/bands per station
    band_policy: BandPolicy = BandPolicy.INTERFERENCE

    def __post_init__(self) -> None:
        if min(self.m, self.n, self.k) < 1:
            raise ConfigError(f"knobs m, n, k must be >= 1, got {self.m}, {self.n}, {self.k}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MitigationKnobs":
        return cls(
            m=int(data.get("m", 1)),
            n=int(data.get("n", 3)),
            k=int(data.get("k", 3)),
            band_policy=BandPolicy(data.get("band_policy", BandPolicy.INTERFERENCE)),
        )


@dataclass(frozen=True)
class Move:
    """One accepted change: a re-association, or a backhaul switch with the re-matching it enabled.

    A switch carries the margin reached after re-matching; the re-associations
    made under the new backhaul are listed in rematched as sta:source->target.
    """

    iteration: int
    kind: str  # "associate" or "backhaul"
    sta: Optional[str]
    source: str
    target: str
    min_margin: float  # objective after the move
    rematched: Tuple[str, ...] = ()

    def to_row(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "kind": self.kind,
            "sta": self.sta or "",
            "source": self.source,
            "target": self.target,
            "min_margin": self.min_margin,
            "rematched": ";".join(self.rematched),
        }


@dataclass
class MitigationResult:
    config: NetworkConfig
    moves: List[Move]
    min_margin: float
    initial_min_margin: float
    status: MitigationStatus
    dump: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([move.to_row() for move in self.moves], columns=MOVE_COLUMNS)


def _label(ap_band: ApBand) -> str:
    return f"{ap_band[0]}@{ap_band[1]}"


def _backhaul_label(choice: BackhaulChoice) -> str:
    if not choice.links:
        return str(choice.medium)
    return f"topology {choice.topology_id} " + ",".join(f"{c}->{p}@{b}" for c, p, b in choice.links)


class RiskMitigator:
    """Greedy max-min search in the order AP Alarm, STA Scan, AP Scan, AP-STA Matching.

    The objective is the minimum margin over every AP/band and every slice
    of the load matrices handed to run(). A move is applied only when it
    strictly raises that minimum.
    """

    def __init__(
        self,
        area: ServiceArea,
        bounds: Mapping[AccessCategory, SaturationBound],
        knobs: MitigationKnobs = MitigationKnobs(),
        *,
        threshold: float = DEFAULT_MARGIN_THRESHOLD,
        shortlist: Sequence[BackhaulChoice] = (),
    ) -> None:
        self.area = area
        self.bounds = bounds
        self.knobs = knobs
        self.threshold = threshold
        self.shortlist = list(shortlist)
        self.logger = logging.getLogger(name=__name__)

    def objective(self, config: NetworkConfig, matrices: Sequence[LoadMatrix]) -> float:
        return float(margin_table(config, matrices, self.bounds).min())

    def resolved(self, config: NetworkConfig, matrices: Sequence[LoadMatrix]) -> bool:
        return not any(check_slice(m, config, self.bounds, threshold=self.threshold).alarmed for m in matrices)

    def iteration_cap(self, n_stations: int) -> int:
        return n_stations * len(self.area.ap_bands) * max(1, len(self.shortlist))

    def targets(self, table: np.ndarray) -> List[int]:
        """AP Alarm: the m AP/bands with the lowest margin over all slices."""
        worst = table.min(axis=0)
        order = sorted(range(worst.size), key=lambda col: (worst[col], col))
        return order[: self.knobs.m]

    def costliest(
        self, config: NetworkConfig, matrix: LoadMatrix, col: int
    ) -> List[int]:
        """STA Scan: active stations on col in its worst slice, worst data rate first."""
        rows = [
            row
            for row, sta in enumerate(matrix.stations)
            if config.associations.get(sta) == matrix.ap_bands[col] and matrix.active[row].any()
        ]
        rows.sort(key=lambda row: (matrix.rates[row, col], -matrix.loads[row, col].sum(), row))
        return rows[: self.knobs.n]

    def _policy_band(self, matrix: LoadMatrix, row: int, ap: str) -> Optional[int]:
        columns = [
            col for col, (name, _) in enumerate(matrix.ap_bands) if name == ap and matrix.rates[row, col] > 0
        ]
        if not columns:
            return None
        if self.knobs.band_policy is BandPolicy.COVERAGE:
            for col in columns:
                if matrix.ap_bands[col][1] is Band.B2G4:
                    return col
        return max(columns, key=lambda col: (matrix.ap_bands[col][1].ghz, -col))

    def saviors(self, matrix: LoadMatrix, row: int, current: int) -> List[int]:
        """AP Scan: one band per AP by the band policy, least added load first."""
        candidates = []
        for site in self.area.sites:
            col = self._policy_band(matrix, row, site.name)
            if col is not None and col != current:
                candidates.append(col)
        candidates.sort(key=lambda col: (matrix.loads[row, col].sum(), -matrix.rates[row, col], col))
        return candidates[: self.knobs.k]

    def best_move(
        self, config: NetworkConfig, matrices: Sequence[LoadMatrix]
    ) -> Optional[Tuple[float, str, ApBand, ApBand]]:
        """AP-STA Matching: the candidate re-association with the highest objective."""
        table = margin_table(config, matrices, self.bounds)
        best: Optional[Tuple[float, str, ApBand, ApBand]] = None
        for col in self.targets(table):
            matrix = matrices[int(table[:, col].argmin())]
            for row in self.costliest(config, matrix, col):
                sta = matrix.stations[row]
                for savior in self.saviors(matrix, row, col):
                    value = self.objective(config.with_association(sta, matrix.ap_bands[savior]), matrices)
                    if best is None or value > best[0]:
                        best = (value, sta, matrix.ap_bands[col], matrix.ap_bands[savior])
        return best

    def matching_loop(
        self, config: NetworkConfig, matrices: Sequence[LoadMatrix], moves: List[Move], budget: int
    ) -> NetworkConfig:
        current = self.objective(config, matrices)
        while len(moves) < budget and not self.resolved(config, matrices):
            found = self.best_move(config, matrices)
            if found is None or found[0] <= current + IMPROVEMENT_TOL:
                break
            value, sta, source, target = found
            config = config.with_association(sta, target)
            moves.append(Move(len(moves), "associate", sta, _label(source), _label(target), value))
            self.logger.debug(f"Moved {sta} from {_label(source)} to {_label(target)}, min margin {value:.4f}")
            current = value
        return config

    def run(self, config: NetworkConfig, matrices: Sequence[LoadMatrix]) -> MitigationResult:
        initial = self.objective(config, matrices)
        moves: List[Move] = []
        if self.resolved(config, matrices):
            return MitigationResult(config, moves, initial, initial, MitigationStatus.RESOLVED)

        budget = self.iteration_cap(len(matrices[0].stations))
        best = self.matching_loop(config, matrices, moves, budget)
        best_value = self.objective(best, matrices)
        for choice in self.shortlist:
            if self.resolved(best, matrices) or len(moves) >= budget:
                break
            if choice == best.backhaul:
                continue
            trial_moves: List[Move] = []
            trial = self.matching_loop(best.with_backhaul(choice), matrices, trial_moves, budget - len(moves) - 1)
            value = self.objective(trial, matrices)
            if value > best_value + IMPROVEMENT_TOL:
                rematched = tuple(f"{move.sta}:{move.source}->{move.target}" for move in trial_moves)
                moves.append(
                    Move(
                        len(moves),
                        "backhaul",
                        None,
                        _backhaul_label(best.backhaul),
                        _backhaul_label(choice),
                        value,
                        rematched,
                    )
                )
                self.logger.debug(f"Switched backhaul to {_backhaul_label(choice)} with {len(rematched)} re-associations")
                best, best_value = trial, value

        if self.resolved(best, matrices):
            status = MitigationStatus.RESOLVED
        elif best_value > initial + IMPROVEMENT_TOL:
            status = MitigationStatus.IMPROVED
        else:
            status = MitigationStatus.INFEASIBLE
        dump: Dict[str, Any] = {}
        if status is not MitigationStatus.RESOLVED:
            dump = self.dump(best, matrices)
        log = self.logger.warning if status is MitigationStatus.INFEASIBLE else self.logger.info
        log(f"Mitigation {status} after {len(moves)} moves: min margin {initial:.4f} -> {best_value:.4f}")
        return MitigationResult(best, moves, best_value, initial, status, dump)

    def dump(self, config: NetworkConfig, matrices: Sequence[LoadMatrix]) -> Dict[str, Any]:
        """Config snapshot plus the margins and demand of every slice."""
        table = margin_table(config, matrices, self.bounds)
        return {
            "config": config.snapshot(),
            "slices": [
                {
                    "margins": {_label(ab): float(table[i, col]) for col, ab in enumerate(matrix.ap_bands)},
                    "demand_bps": {
                        sta: [float(v) for v in matrix.demand[row]]
                        for row, sta in enumerate(matrix.stations)
                        if matrix.active[row].any()
                    },
                }
                for i, matrix in enumerate(matrices)
            ],
        }


def mitigate(
    config: NetworkConfig,
    scenario: Scenario,
    bounds: Mapping[AccessCategory, SaturationBound],
    area: ServiceArea,
    knobs: MitigationKnobs = MitigationKnobs(),
    *,
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
    slice_minutes: int = 15,
    shortlist: Sequence[BackhaulChoice] = (),
) -> MitigationResult:
    """Mitigate the alarms of one scenario's slices."""
    matrices = area.slice_matrices(scenario, scenario.slices(slice_minutes))
    mitigator = RiskMitigator(area, bounds, knobs, threshold=threshold, shortlist=shortlist)
    return mitigator.run(config, matrices)
