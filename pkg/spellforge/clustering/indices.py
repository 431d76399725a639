"""Cluster-count selection indices: pseudo-F and Duda-Hart Je(2)/Je(1)."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from spellforge.clustering.hierarchy import Dendrogram, cut
from spellforge.errors import ConfigError

logger = logging.getLogger(__name__)

DUDA_HART_Z = 3.2


def within_ss(X: np.ndarray) -> float:
    """Sum of squared distances to the centroid."""
    if X.shape[0] == 0:
        return 0.0
    centered = X - X.mean(axis=0)
    return float(np.sum(centered * centered))


def ss_decomposition(X: np.ndarray, labels: np.ndarray):
    """``(between, within, total)`` sums of squares."""
    X = np.asarray(X, dtype=float)
    total = within_ss(X)
    within = sum(within_ss(X[labels == g]) for g in np.unique(labels))
    grand = X.mean(axis=0)
    between = 0.0
    for g in np.unique(labels):
        group = X[labels == g]
        diff = group.mean(axis=0) - grand
        between += group.shape[0] * float(diff @ diff)
    return between, float(within), total


def calinski_harabasz(X: np.ndarray, labels: np.ndarray) -> float:
    """Pseudo-F; ``inf`` when every group is internally identical."""
    labels = np.asarray(labels)
    n = labels.size
    k = np.unique(labels).size
    if not 2 <= k <= n - 1:
        raise ConfigError(f"pseudo-F needs 2 <= k <= n - 1, got k={k}, n={n}")
    between, within, _ = ss_decomposition(X, labels)
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


@dataclass(frozen=True)
class DudaHartSplit:
    """One dendrogram split: the parent group at ``k`` groups becomes two at ``k + 1``."""

    k: int
    parent_size: int
    je1: float
    je2: float
    ratio: Optional[float]
    pseudo_t2: Optional[float]
    critical: Optional[float]


def duda_hart_critical(n: int, p: int, z: float = DUDA_HART_Z) -> Optional[float]:
    if n < 1 or p < 1:
        return None
    inner = 2.0 * (1.0 - 8.0 / (math.pi**2 * p)) / (n * p)
    return 1.0 - 2.0 / (math.pi * p) - z * math.sqrt(max(inner, 0.0))


def duda_hart(X: np.ndarray, d: Dendrogram, k: int) -> DudaHartSplit:
    """Index for the split undone when going from ``k`` to ``k + 1`` groups."""
    if not 1 <= k <= d.n - 1:
        raise ConfigError(f"Duda-Hart split needs 1 <= k <= {d.n - 1}, got {k}")
    X = np.asarray(X, dtype=float)
    merge = d.n - 1 - k
    a, b = d.children(merge)
    rows_a, rows_b = d.members(a), d.members(b)
    parent = np.concatenate([rows_a, rows_b])
    je1 = within_ss(X[parent])
    je2 = within_ss(X[rows_a]) + within_ss(X[rows_b])
    if je1 == 0.0:
        # identical points: nothing left to separate
        ratio, t2 = 0.0, 0.0
    elif parent.size <= 2:
        ratio, t2 = je2 / je1, None
    elif je2 == 0.0:
        ratio, t2 = 0.0, math.inf
    else:
        ratio = je2 / je1
        t2 = (je1 - je2) / (je2 / (parent.size - 2))
    return DudaHartSplit(
        k=k,
        parent_size=int(parent.size),
        je1=je1,
        je2=je2,
        ratio=ratio,
        pseudo_t2=t2,
        critical=duda_hart_critical(int(parent.size), X.shape[1]),
    )


@dataclass
class KSelection:
    k: int
    k_max: int
    pseudo_f: List[float]
    duda_hart: List[DudaHartSplit]
    low_confidence: bool
    reasons: List[str] = field(default_factory=list)


def select_k(d: Dendrogram, X: np.ndarray, k_max: int) -> KSelection:
    """Pseudo-F and Duda-Hart tables for k in 2..k_max; recommends the pseudo-F maximum.

    Duda-Hart rows start at the root split (k = 1).
    """
    if d.n < 3:
        raise ConfigError(f"choosing a group count needs at least 3 rows, got {d.n}")
    if k_max > d.n - 1:
        logger.warning("k_max %d exceeds n - 1; using %d", k_max, d.n - 1)
        k_max = d.n - 1
    if k_max < 2:
        raise ConfigError(f"k_max must be at least 2, got {k_max}")
    X = np.asarray(X, dtype=float)
    scores = [calinski_harabasz(X, cut(d, k)) for k in range(2, k_max + 1)]
    splits = [duda_hart(X, d, k) for k in range(1, k_max + 1)]
    best = int(np.argmax(scores)) + 2
    reasons: List[str] = []
    root = splits[0]
    if root.je1 == 0.0:
        reasons.append("root split separates identical points")
    elif root.ratio is None or root.critical is None or root.ratio >= root.critical:
        reasons.append("root split does not beat the Duda-Hart critical value")
    if best == k_max and k_max > 2:
        reasons.append("pseudo-F maximum sits at k_max")
    logger.info("recommended %d group(s) of %d candidates", best, k_max - 1)
    return KSelection(
        k=best,
        k_max=k_max,
        pseudo_f=scores,
        duda_hart=splits,
        low_confidence=bool(reasons),
        reasons=reasons,
    )
