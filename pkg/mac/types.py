import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict

import numpy as np

from errors import DomainError


@dataclass(frozen=True)
class QosParams:
    """EDCA parameter set of one access category.

    w0 is the minimum contention window in slots, m the maximum backoff
    level, aifsn the arbitration wait in slots and txop the TXOP limit in µs
    (0 disables bursting).
    """

    w0: int
    m: int
    aifsn: int = 0
    txop: float = 0.0

    def __post_init__(self) -> None:
        if self.w0 < 1:
            raise DomainError(f"w0 must be >= 1, got {self.w0}")
        if self.m < 0:
            raise DomainError(f"m must be >= 0, got {self.m}")
        if self.aifsn < 0:
            raise DomainError(f"aifsn must be >= 0, got {self.aifsn}")
        if self.txop < 0:
            raise DomainError(f"txop must be >= 0, got {self.txop}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QosParams":
        return cls(
            w0=int(data["w0"]),
            m=int(data["m"]),
            aifsn=int(data.get("aifsn", 0)),
            txop=float(data.get("txop_us", data.get("txop", 0.0))),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"w0": self.w0, "m": self.m, "aifsn": self.aifsn, "txop_us": self.txop}

    def window(self, stage: int) -> int:
        """Contention window at a backoff stage; doubles up to level m."""
        return self.w0 * 2 ** min(stage, self.m)


@dataclass(frozen=True)
class SlotTiming:
    sigma: float  # idle slot, seconds

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class ContenderLoad:
    """One STA/AC contender.

    lam is the Poisson frame arrival rate (1/s); t_success, t_collision and
    payload are per-frame channel times in seconds.
    """

    lam: float
    t_success: float
    t_collision: float
    payload: float
    qos: QosParams

    def __post_init__(self) -> None:
        if self.lam < 0 or not math.isfinite(self.lam):
            raise DomainError(f"arrival rate must be finite and >= 0, got {self.lam}")
        if not self.t_collision > 0:
            raise DomainError(f"t_collision must be > 0, got {self.t_collision}")
        if self.lam > 0 and not (self.t_success >= self.payload > 0):
            raise DomainError(
                f"need t_success >= payload > 0, got t_success={self.t_success}, payload={self.payload}"
            )

    @property
    def offered_load(self) -> float:
        """Normalized offered load: fraction of channel time with payload ready."""
        return self.lam * self.payload

    @property
    def burst_frames(self) -> int:
        """Frames sent back to back per won access under the TXOP limit."""
        if self.qos.txop <= 0 or self.t_success <= 0:
            return 1
        return max(1, int(math.floor(self.qos.txop * 1e-6 / self.t_success + 1e-9)))

    def with_offered_load(self, offered_load: float) -> "ContenderLoad":
        """Same frame format carrying a different normalized offered load."""
        if offered_load < 0:
            raise DomainError(f"offered load must be >= 0, got {offered_load}")
        return replace(self, lam=offered_load / self.payload)


@dataclass(frozen=True, eq=False)
class FixedPointSolution:
    q: np.ndarray
    p: np.ndarray
    tau: np.ndarray
    residual: float
    iterations: int
    converged: bool = True

    @property
    def size(self) -> int:
        return int(self.tau.size)


@dataclass(frozen=True, eq=False)
class MacMetrics:
    """Channel-level throughput and per-contender delay.

    idle is set when no contender ever attempts (P_tr = 0): S is 0, P_S is
    undefined (nan) and every delay is infinite.
    """

    s_norm: float
    p_tr: float
    p_s: float
    e_s: float
    e_n: np.ndarray
    e_d: np.ndarray
    idle: bool = False
    truncated_mass: float = 0.0
    per_contender_s: np.ndarray = field(default_factory=lambda: np.zeros(0))
