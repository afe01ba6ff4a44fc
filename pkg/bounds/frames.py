import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from constants import AccessCategory
from errors import ConfigError
from mac.types import QosParams, SlotTiming
from utils.data_loader import PathLike, load_yaml

logger = logging.getLogger(name=__name__)

PHY_FILE = "phy_80211ax.yaml"
EDCA_FILE = "edca_defaults.yaml"
THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True)
class FrameFormat:
    """Frame-exchange constants. Times in seconds, sizes in bytes."""

    preamble: float
    sifs: float
    ack: float
    mac_overhead_bytes: int
    service_tail_bits: int
    mtu_bytes: int

    def __post_init__(self) -> None:
        if min(self.preamble, self.sifs, self.ack) < 0:
            raise ConfigError("frame timing constants must be >= 0")
        if self.mtu_bytes <= 0:
            raise ConfigError(f"mtu_bytes must be > 0, got {self.mtu_bytes}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FrameFormat":
        return cls(
            preamble=float(data["preamble_us"]) * 1e-6,
            sifs=float(data["sifs_us"]) * 1e-6,
            ack=float(data["ack_us"]) * 1e-6,
            mac_overhead_bytes=int(data["mac_overhead_bytes"]),
            service_tail_bits=int(data["service_tail_bits"]),
            mtu_bytes=int(data["mtu_bytes"]),
        )

    def payload_bits(self, payload_bytes: Optional[int] = None) -> int:
        return 8 * (payload_bytes or self.mtu_bytes)

    def ppdu_time(self, rate_bps: float, payload_bytes: Optional[int] = None) -> float:
        """Airtime of one data PPDU, headers included."""
        if not rate_bps > 0:
            return math.inf
        bits = self.payload_bits(payload_bytes) + 8 * self.mac_overhead_bytes + self.service_tail_bits
        return self.preamble + bits / rate_bps

    def exchange_time(self, rate_bps: float, payload_bytes: Optional[int] = None) -> float:
        """PPDU, SIFS, ACK, SIFS. A collision holds the channel for the same time."""
        return self.ppdu_time(rate_bps, payload_bytes) + 2 * self.sifs + self.ack

    def overhead_factor(self, rate_bps: float, payload_bytes: Optional[int] = None) -> float:
        """Channel time of one exchange over the bare payload airtime."""
        return self.exchange_time(rate_bps, payload_bytes) * rate_bps / self.payload_bits(payload_bytes)


@dataclass(frozen=True)
class PhyProfile:
    timing: SlotTiming
    frame: FrameFormat
    mcs_spectral_efficiency: Tuple[float, ...]
    bandwidth_hz: float
    spatial_streams: int
    noise_figure_db: float
    impl_margin_db: float

    def __post_init__(self) -> None:
        table = self.mcs_spectral_efficiency
        if not table or any(b <= a for a, b in zip(table, table[1:])):
            raise ConfigError("MCS spectral-efficiency table must be non-empty and strictly increasing")

    def noise_floor(self, bandwidth_hz: Optional[float] = None) -> float:
        """Thermal noise plus receiver noise figure in dBm."""
        return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_hz or self.bandwidth_hz) + self.noise_figure_db

    def top_rate(self, bandwidth_hz: Optional[float] = None, spatial_streams: Optional[int] = None) -> float:
        streams = spatial_streams or self.spatial_streams
        return (bandwidth_hz or self.bandwidth_hz) * streams * self.mcs_spectral_efficiency[-1]


def load_phy(filename: PathLike = PHY_FILE) -> PhyProfile:
    data = load_yaml(filename)
    channel = data["channel"]
    profile = PhyProfile(
        timing=SlotTiming(sigma=float(data["timing"]["slot_us"]) * 1e-6),
        frame=FrameFormat.from_dict(data["frame"]),
        mcs_spectral_efficiency=tuple(float(v) for v in data["mcs_spectral_efficiency"]),
        bandwidth_hz=float(channel["bandwidth_hz"]),
        spatial_streams=int(channel["spatial_streams"]),
        noise_figure_db=float(channel["noise_figure_db"]),
        impl_margin_db=float(channel["impl_margin_db"]),
    )
    logger.debug(f"Loaded PHY profile from {filename}: top rate {profile.top_rate() / 1e6:.1f} Mbps")
    return profile


def load_edca(filename: PathLike = EDCA_FILE) -> Dict[AccessCategory, QosParams]:
    data = load_yaml(filename)
    table = data.get("access_categories", {})
    missing = set(AccessCategory.values()) - set(table)
    if missing:
        raise ConfigError(f"EDCA table {filename} lacks access categories {sorted(missing)}")
    return {AccessCategory(name): QosParams.from_dict(values) for name, values in table.items()}
