"""Shannon feasibility layer and the bps to channel-time conversion."""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from bounds.frames import FrameFormat
from bounds.types import DemandSpec, LinkBudget
from errors import DomainError, InfeasibleError
from mac.types import ContenderLoad, QosParams, SlotTiming

logger = logging.getLogger(name=__name__)


def spectral_efficiency(budget: LinkBudget) -> float:
    """Per-stream Shannon efficiency log2(1 + SNR) in bps/Hz."""
    return math.log2(1.0 + budget.snr_linear)


def shannon_capacity(budget: LinkBudget) -> float:
    """C = streams * B * log2(1 + SNR), SNR degraded by the implementation margin."""
    return budget.spatial_streams * budget.bandwidth * spectral_efficiency(budget)


def quantize_efficiency(efficiency: float, mcs_table: Sequence[float]) -> float:
    """Nearest table entry at or below the given efficiency, 0 when none fits."""
    table = np.asarray(mcs_table, dtype=float)
    index = int(np.searchsorted(table, efficiency, side="right")) - 1
    return float(table[index]) if index >= 0 else 0.0


def link_rate(budget: LinkBudget, mcs_table: Optional[Sequence[float]] = None) -> float:
    """Data rate of the link: the MCS-quantized Shannon rate, or Shannon itself without a table."""
    if mcs_table is None:
        return shannon_capacity(budget)
    efficiency = quantize_efficiency(spectral_efficiency(budget), mcs_table)
    if efficiency <= 0:
        raise InfeasibleError(f"no MCS is feasible at SNR {budget.snr_db:.1f} dB")
    return budget.spatial_streams * budget.bandwidth * efficiency


def required_bandwidth(
    demand: DemandSpec,
    budget: LinkBudget,
    *,
    frame: Optional[FrameFormat] = None,
    payload_bytes: Optional[int] = None,
) -> float:
    """Minimum bandwidth (Hz) carrying the demand under the Shannon bound.

    With a frame format the demand is inflated by its header and gap
    overhead at the budget's Shannon rate; MTU-sized frames are assumed when
    payload_bytes is not given.
    """
    if demand.total == 0:
        return 0.0
    efficiency = budget.spatial_streams * spectral_efficiency(budget)
    if efficiency <= 0:
        raise InfeasibleError(f"zero spectral efficiency at SNR {budget.snr_db:.1f} dB")
    carried = demand.total
    if frame is not None:
        carried *= frame.overhead_factor(shannon_capacity(budget), payload_bytes)
    return carried / efficiency


def normalized_offered_load(
    demand: DemandSpec,
    budget: LinkBudget,
    qos: Optional[QosParams] = None,
    timing: Optional[SlotTiming] = None,
    *,
    frame: Optional[FrameFormat] = None,
    overhead: float = 0.0,
    mcs_table: Optional[Sequence[float]] = None,
    payload_bytes: Optional[int] = None,
) -> float:
    """Fraction of channel time the demand holds the medium.

    With a frame format every frame is charged its whole exchange (PPDU,
    SIFS, ACK, SIFS) plus the AC's AIFS when qos and timing are given.
    Without one the load is demand / (rate * (1 - overhead)). Values above 1
    mark an infeasible demand and are returned as is.
    """
    if (qos is None) != (timing is None):
        raise DomainError("qos and timing must be given together")
    if not 0.0 <= overhead < 1.0:
        raise DomainError(f"overhead must lie in [0, 1), got {overhead}")
    if demand.total == 0:
        return 0.0
    rate = link_rate(budget, mcs_table)
    if frame is None:
        load = demand.total / (rate * (1.0 - overhead))
    else:
        per_frame = frame.exchange_time(rate, payload_bytes)
        if qos is not None:
            per_frame += qos.aifsn * timing.sigma
        load = demand.total / frame.payload_bits(payload_bytes) * per_frame
    if load > 1.0:
        logger.debug(f"{demand.ac} demand of {demand.total / 1e6:.2f} Mbps exceeds the {rate / 1e6:.1f} Mbps link")
    return load


def contender_load(
    offered_load: float,
    rate_bps: float,
    qos: QosParams,
    frame: FrameFormat,
    payload_bytes: Optional[int] = None,
) -> ContenderLoad:
    """ContenderLoad carrying a normalized offered load with frames at a data rate."""
    if offered_load < 0:
        raise DomainError(f"offered load must be >= 0, got {offered_load}")
    payload = frame.ppdu_time(rate_bps, payload_bytes)
    exchange = frame.exchange_time(rate_bps, payload_bytes)
    return ContenderLoad(
        lam=offered_load / payload,
        t_success=exchange,
        t_collision=exchange,
        payload=payload,
        qos=qos,
    )


def link_rates(
    rx_power: np.ndarray,
    noise: float,
    *,
    bandwidth: float,
    spatial_streams: int,
    impl_margin: float,
    mcs_table: Sequence[float],
    min_rx_power: float = -math.inf,
) -> np.ndarray:
    """Vectorised MCS-quantized rates (bps); 0 where no MCS fits or power is insufficient."""
    rx_power = np.asarray(rx_power, dtype=float)
    table = np.asarray(mcs_table, dtype=float)
    snr = 10.0 ** ((rx_power - noise - impl_margin) / 10.0)
    index = np.searchsorted(table, np.log2(1.0 + snr), side="right") - 1
    efficiency = np.where(index >= 0, table[np.clip(index, 0, None)], 0.0)
    return np.where(rx_power >= min_rx_power, spatial_streams * bandwidth * efficiency, 0.0)
