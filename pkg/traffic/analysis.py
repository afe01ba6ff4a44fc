import logging

import numpy as np

from errors import DomainError, ZeroVarianceError

logger = logging.getLogger(name=__name__)


def bin_series(series: np.ndarray, bin_minutes: int) -> np.ndarray:
    """Sum consecutive minutes into bins along the last axis; a partial tail bin is dropped."""
    series = np.asarray(series, dtype=float)
    if bin_minutes < 1:
        raise DomainError(f"bin length must be >= 1 minute, got {bin_minutes}")
    usable = series.shape[-1] // bin_minutes * bin_minutes
    return series[..., :usable].reshape(*series.shape[:-1], -1, bin_minutes).sum(axis=-1)


def autocorrelation(series: np.ndarray, max_lag: int, bin_minutes: int = 1) -> np.ndarray:
    """Normalized autocorrelation per row for lags 0..max_lag (in bins), via FFT.

    A 1-D series gives a 1-D result.
    """
    data = bin_series(series, bin_minutes)
    one_dimensional = data.ndim == 1
    data = np.atleast_2d(data)
    length = data.shape[-1]
    if length <= max_lag:
        raise DomainError(f"trace of {length} bins is too short for lag {max_lag}")
    centred = data - data.mean(axis=-1, keepdims=True)
    variance = (centred**2).sum(axis=-1)
    if np.any(variance == 0):
        raise ZeroVarianceError("autocorrelation of a constant trace is undefined")
    size = 1 << int(np.ceil(np.log2(2 * length)))
    spectrum = np.fft.rfft(centred, n=size, axis=-1)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), n=size, axis=-1)[..., : max_lag + 1]
    acf = acf / variance[:, None]
    return acf[0] if one_dimensional else acf


def is_local_peak(acf: np.ndarray, lag: int, width: int = 1) -> bool:
    """acf[lag] exceeds every value within width lags on both sides."""
    acf = np.asarray(acf, dtype=float)
    if not width <= lag < acf.size - width:
        raise DomainError(f"lag {lag} needs {width} neighbours on each side")
    neighbours = np.concatenate([acf[lag - width : lag], acf[lag + 1 : lag + width + 1]])
    return bool(np.all(acf[lag] > neighbours))
