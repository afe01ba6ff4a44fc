"""Risk monitor: margin and per-AC service alarms over weighted futures."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from bounds.margins import AC_ORDER, LoadMatrix, airtime_per_bit, bound_vector, margin_values
from bounds.types import SaturationBound
from constants import DEFAULT_MARGIN_THRESHOLD, NEGLIGIBLE_DELAY_S, SERVICE_RATE_BPS, AccessCategory, Band
from errors import DomainError
from risk.network import NetworkConfig, ServiceArea
from traffic.generator import Scenario

logger = logging.getLogger(name=__name__)

MARGIN_RULE = "margin"
ALARM_COLUMNS = ["time", "ap", "band", "margin", "rule", "future", "weight"]


@dataclass(frozen=True)
class AlarmEvent:
    time: int  # absolute minute of the slice start
    ap: str
    band: Band
    margin: float
    rule: str  # "margin", "<AC>-service" or "<AC>-delay"
    future: int = 0
    weight: float = 1.0

    @property
    def ap_band(self) -> str:
        return f"{self.ap}@{self.band}"

    def to_row(self) -> Dict[str, Any]:
        return {
            "time": self.time,
            "ap": self.ap,
            "band": str(self.band),
            "margin": self.margin,
            "rule": self.rule,
            "future": self.future,
            "weight": self.weight,
        }


@dataclass(frozen=True)
class SliceCheck:
    """Margins of one slice and the rules each AP/band breaks."""

    margins: np.ndarray  # per AP/band
    rules: Dict[int, List[str]]  # column -> broken rules

    @property
    def alarmed(self) -> bool:
        return bool(self.rules)


def check_slice(
    matrix: LoadMatrix,
    config: NetworkConfig,
    bounds: Mapping[AccessCategory, SaturationBound],
    *,
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
) -> SliceCheck:
    """Apply every alarm rule to one load matrix under a configuration.

    An AC service rule fails when a station could not raise its AC to the
    AC's service rate within the leftover bound of its AP/band, or when the
    AC's delay at the carried load exceeds the negligible-delay limit.
    """
    assignment = matrix.assignment(config.associations)
    bound, carried, margins = margin_values(
        matrix, assignment, bound_vector(bounds), config.backhaul_load(matrix, assignment)
    )
    rules: Dict[int, List[str]] = {}
    for col in np.flatnonzero(margins < threshold * bound):
        rules.setdefault(int(col), []).append(MARGIN_RULE)

    per_bit = airtime_per_bit(matrix.rates, matrix.frame)
    for row in np.flatnonzero(assignment >= 0):
        col = int(assignment[row])
        for c, ac in enumerate(AC_ORDER):
            if not matrix.active[row, c]:
                continue
            needed = carried[col] - matrix.loads[row, col, c] + SERVICE_RATE_BPS[ac] * per_bit[row, col]
            rule = f"{ac}-service"
            if needed > bound[col] and rule not in rules.get(col, []):
                rules.setdefault(col, []).append(rule)

    _, counts = matrix.per_ap_band(assignment)
    for col in range(len(matrix.ap_bands)):
        for c, ac in enumerate(AC_ORDER):
            rule = f"{ac}-delay"
            if counts[col, c] > 0 and bounds[ac].delay_at(float(carried[col])) > NEGLIGIBLE_DELAY_S:
                rules.setdefault(col, []).append(rule)
    return SliceCheck(margins=margins, rules=rules)


@dataclass
class MonitorReport:
    """Alarms of every future plus the per-future alarm flags and weights."""

    events: List[AlarmEvent] = field(default_factory=list)
    alarmed: List[bool] = field(default_factory=list)
    weights: List[float] = field(default_factory=list)

    @property
    def alarm_probability(self) -> float:
        """Weighted fraction of futures with at least one alarm."""
        weights = np.asarray(self.weights, dtype=float)
        if weights.size == 0 or weights.sum() <= 0:
            return 0.0
        return float(weights @ np.asarray(self.alarmed, dtype=float) / weights.sum())

    def worst(self) -> Dict[Tuple[str, Band], float]:
        """Lowest alarmed margin per AP/band."""
        worst: Dict[Tuple[str, Band], float] = {}
        for event in self.events:
            key = (event.ap, event.band)
            worst[key] = min(worst.get(key, np.inf), event.margin)
        return worst

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([event.to_row() for event in self.events], columns=ALARM_COLUMNS)


def monitor(
    futures: Sequence[Scenario],
    config: NetworkConfig,
    bounds: Mapping[AccessCategory, SaturationBound],
    area: ServiceArea,
    *,
    slice_minutes: int = 15,
    threshold: float = DEFAULT_MARGIN_THRESHOLD,
) -> MonitorReport:
    """Check every slice of every future; each event carries its future's weight."""
    if not 0 <= threshold < 1:
        raise DomainError(f"threshold must lie in [0, 1), got {threshold}")
    report = MonitorReport()
    for index, future in enumerate(futures):
        raised = False
        pieces = future.slices(slice_minutes)
        for piece, matrix in zip(pieces, area.slice_matrices(future, pieces)):
            check = check_slice(matrix, config, bounds, threshold=threshold)
            for col, rules in sorted(check.rules.items()):
                ap, band = matrix.ap_bands[col]
                for rule in rules:
                    report.events.append(
                        AlarmEvent(
                            time=piece.start,
                            ap=ap,
                            band=band,
                            margin=float(check.margins[col]),
                            rule=rule,
                            future=index,
                            weight=future.weight,
                        )
                    )
            raised = raised or check.alarmed
        report.alarmed.append(raised)
        report.weights.append(future.weight)
    if report.events:
        logger.info(
            f"Monitor raised {len(report.events)} alarms over {len(futures)} futures, "
            f"alarm probability {report.alarm_probability:.3f}"
        )
    return report
