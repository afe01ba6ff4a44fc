import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from constants import AccessCategory, Band
from errors import ConfigError, DomainError
from mac.types import QosParams


@dataclass(frozen=True)
class LinkBudget:
    """Received power against noise plus interference on one link.

    impl_margin degrades the SNR in dB before the capacity formula.
    """

    rx_power: float  # dBm
    noise_plus_interference: float  # dBm
    bandwidth: float  # Hz
    impl_margin: float = 0.0  # dB
    spatial_streams: int = 1

    def __post_init__(self) -> None:
        if not self.bandwidth > 0:
            raise ConfigError(f"bandwidth must be > 0, got {self.bandwidth}")
        if self.impl_margin < 0:
            raise ConfigError(f"impl_margin must be >= 0, got {self.impl_margin}")
        if self.spatial_streams < 1:
            raise ConfigError(f"spatial_streams must be >= 1, got {self.spatial_streams}")

    @property
    def snr_db(self) -> float:
        return self.rx_power - self.noise_plus_interference - self.impl_margin

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


@dataclass(frozen=True)
class DemandSpec:
    ac: AccessCategory
    rate_up: float = 0.0  # bps
    rate_down: float = 0.0  # bps

    def __post_init__(self) -> None:
        if self.rate_up < 0 or self.rate_down < 0:
            raise DomainError(f"demand rates must be >= 0, got up={self.rate_up}, down={self.rate_down}")

    @property
    def total(self) -> float:
        """Uplink and downlink share one contention pool."""
        return self.rate_up + self.rate_down


@dataclass(frozen=True, eq=False)
class SaturationBound:
    """Peak of the throughput curve of one QoS set, with the sweep that found it.

    curve columns: load, s, p, tau, q, e_n, e_d (one row per converged point).
    """

    qos: Optional[QosParams]
    n_sta: int
    load_star: float
    s_star: float
    curve: pd.DataFrame = field(default_factory=pd.DataFrame)
    low_confidence: bool = False
    converged_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not self.load_star > 0:
            raise DomainError(f"load_star must be > 0, got {self.load_star}")
        if not 0 < self.s_star <= 1:
            raise DomainError(f"s_star must lie in (0, 1], got {self.s_star}")

    def delay_at(self, load: float) -> float:
        """Mean frame delay interpolated on the sweep at a total offered load."""
        if self.curve.empty:
            return math.nan
        if load > float(self.curve["load"].iloc[-1]):
            return math.inf
        return float(np.interp(load, self.curve["load"], self.curve["e_d"]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sta": self.n_sta,
            "load_star": self.load_star,
            "s_star": self.s_star,
            "low_confidence": self.low_confidence,
            **(self.qos.to_dict() if self.qos else {}),
        }


@dataclass(frozen=True)
class Margin:
    """Leftover normalized load of one AP/band against its combined bound."""

    ap: str
    band: Band
    value: float
    bound: float
    load: float
    alarm: bool

    @property
    def ap_band(self) -> str:
        return f"{self.ap}@{self.band}"
