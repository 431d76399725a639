"""Prediction-error metrics and bootstrap intervals."""

import logging
from typing import List, Optional, Tuple

import numpy as np

from spellforge.config import settings
from spellforge.dependencies import derive_rng
from spellforge.errors import ConfigError, DataError
from spellforge.models import EvalReport, HistogramRow

logger = logging.getLogger(__name__)

BOOTSTRAP_CHUNK = 100
HISTOGRAM_BINS = 50


def _pair(y, yhat) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.shape != yhat.shape:
        raise DataError(f"outcome has {y.size} values but prediction has {yhat.size}")
    if y.size == 0:
        raise DataError("cannot score an empty sample")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    residual = y - yhat
    return float(residual @ residual / y.size)


def r_squared_corr(y, yhat) -> Optional[float]:
    """Squared Pearson correlation, or None when either vector is constant."""
    y, yhat = _pair(y, yhat)
    dy = y - y.mean()
    dp = yhat - yhat.mean()
    sy, sp = float(dy @ dy), float(dp @ dp)
    if sy <= 0.0 or sp <= 0.0:
        return None
    r = float(dy @ dp) / np.sqrt(sy * sp)
    return float(min(1.0, r * r))


def bootstrap_mse(y, yhat, n_boot: int, seed: int) -> np.ndarray:
    """MSE of ``n_boot`` resamples of the (y, yhat) pairs drawn with replacement."""
    y, yhat = _pair(y, yhat)
    squared = (y - yhat) ** 2
    rng = derive_rng(seed, 1)
    out = np.empty(n_boot)
    for lo in range(0, n_boot, BOOTSTRAP_CHUNK):
        size = min(BOOTSTRAP_CHUNK, n_boot - lo)
        draws = rng.integers(0, y.size, size=(size, y.size))
        out[lo : lo + size] = squared[draws].mean(axis=1)
    return out


def bootstrap_ci(
    y,
    yhat,
    n_boot: Optional[int] = None,
    level: Optional[float] = None,
    seed: Optional[int] = None,
) -> Tuple[float, float]:
    """Percentile interval of the bootstrap MSE, widened if needed to contain the point MSE."""
    n_boot = settings.n_bootstrap if n_boot is None else n_boot
    level = settings.ci_level if level is None else level
    seed = settings.seed if seed is None else seed
    if n_boot < 100:
        raise ConfigError(f"need at least 100 bootstrap replications, got {n_boot}")
    if not 0.0 < level < 1.0:
        raise ConfigError(f"interval level must lie in (0, 1), got {level}")
    stats = bootstrap_mse(y, yhat, n_boot, seed)
    tail = (1.0 - level) / 2.0
    low, high = np.quantile(stats, [tail, 1.0 - tail])
    point = mse(y, yhat)
    return float(min(low, point)), float(max(high, point))


def evaluate_predictions(
    y,
    yhat,
    sample: str,
    n_boot: Optional[int] = None,
    level: Optional[float] = None,
    seed: Optional[int] = None,
    with_ci: bool = True,
) -> EvalReport:
    y, yhat = _pair(y, yhat)
    r2 = r_squared_corr(y, yhat)
    report = EvalReport(
        sample=sample,
        n=int(y.size),
        mse=mse(y, yhat),
        r_squared=r2,
        r_squared_defined=r2 is not None,
    )
    if with_ci:
        n_boot = settings.n_bootstrap if n_boot is None else n_boot
        level = settings.ci_level if level is None else level
        report.ci_low, report.ci_high = bootstrap_ci(y, yhat, n_boot, level, seed)
        report.ci_level = level
        report.n_bootstrap = n_boot
    return report


def outcome_histogram(y, bins: int = HISTOGRAM_BINS) -> List[HistogramRow]:
    """Point masses at exactly 0 and 1 around ``bins`` equal-width interior bins.

    Interior bins are half-open ``[low, high)`` except the last, which is
    closed; they hold only values strictly between 0 and 1.
    """
    y = np.asarray(y, dtype=float).ravel()
    if bins < 1:
        raise ConfigError(f"histogram needs at least one bin, got {bins}")
    if ((y < 0) | (y > 1) | np.isnan(y)).any():
        raise DataError("outcome histogram needs values in [0, 1]")
    n = max(y.size, 1)
    zero, one = int(np.sum(y == 0.0)), int(np.sum(y == 1.0))
    interior = y[(y > 0.0) & (y < 1.0)]
    counts, edges = np.histogram(interior, bins=bins, range=(0.0, 1.0))
    width = 1.0 / bins
    rows = [HistogramRow(low=0.0, high=0.0, count=zero, share=zero / n)]
    for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
        share = int(c) / n
        rows.append(HistogramRow(low=float(lo), high=float(hi), count=int(c), share=share, density=share / width))
    rows.append(HistogramRow(low=1.0, high=1.0, count=one, share=one / n))
    return rows
