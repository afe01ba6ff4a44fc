from typing import Optional


class WifiDtError(Exception):
    """Base class for every error raised by the digital-twin library."""


class ConfigError(WifiDtError, ValueError):
    """A declarative config or a typed config object violates its invariants."""


class DomainError(WifiDtError, ValueError):
    """Input lies outside the domain of a formula or model."""


class InfeasibleError(WifiDtError):
    """No MCS or no bandwidth can carry the requested demand."""


class UnassociatedStationError(WifiDtError, KeyError):
    """A station with demand has no AP/band association."""


class ZeroVarianceError(WifiDtError, ValueError):
    """Autocorrelation requested for a constant trace."""


class ClusteringError(WifiDtError, ValueError):
    """Clustering inputs cannot produce the requested model."""


class NonConvergenceError(WifiDtError, RuntimeError):
    """Fixed-point iteration failed to reach the requested tolerance."""

    def __init__(
        self, message: str, *, best_residual: float, iterations: int
    ) -> None:
        super().__init__(f"{message} (best residual {best_residual:.3e} after {iterations} iterations)")
        self.best_residual = best_residual
        self.iterations = iterations


class SweepError(WifiDtError, RuntimeError):
    """Too many points of a load sweep failed to converge."""

    def __init__(self, message: str, *, converged_fraction: Optional[float] = None) -> None:
        super().__init__(message)
        self.converged_fraction = converged_fraction
