"""Agglomerative clustering on unit-rescaled variables."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.cluster import hierarchy

from spellforge.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

LINKAGES = ("ward", "average", "complete")


def rescale_unit(X: np.ndarray, reference: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List[int]]:
    """Min-max scale each column to [0, 1].

    Column ranges come from ``reference`` when given (rows of ``X`` outside
    it land outside [0, 1]). Returns the rescaled copy and the positions of
    constant columns, which are set to 0.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DataError(f"expected a two-dimensional array, got shape {X.shape}")
    ref = X if reference is None else np.asarray(reference, dtype=float)
    if ref.ndim != 2 or ref.shape[1] != X.shape[1]:
        raise DataError(f"reference shape {ref.shape} does not match {X.shape}")
    if X.shape[0] == 0 or ref.shape[0] == 0:
        return np.zeros_like(X), []
    if not (np.isfinite(X).all() and np.isfinite(ref).all()):
        raise DataError("cannot rescale non-finite values")
    low = ref.min(axis=0)
    span = ref.max(axis=0) - low
    constant = span == 0
    out = np.zeros_like(X)
    out[:, ~constant] = (X[:, ~constant] - low[~constant]) / span[~constant]
    return out, [int(j) for j in np.flatnonzero(constant)]


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """``merges[i] = (a, b, height, size)`` in scipy's numbering.

    Ids below ``n`` are rows; id ``n + i`` is the group formed by merge ``i``.
    """

    merges: np.ndarray
    linkage: str
    n: int

    def children(self, i: int) -> Tuple[int, int]:
        return int(self.merges[i, 0]), int(self.merges[i, 1])

    def members(self, node: int) -> np.ndarray:
        """Rows under ``node``."""
        stack, rows = [node], []
        while stack:
            current = stack.pop()
            if current < self.n:
                rows.append(current)
            else:
                a, b = self.children(current - self.n)
                stack.extend((a, b))
        return np.sort(np.array(rows, dtype=np.int64))


def agglomerate(X: np.ndarray, linkage: str = "ward") -> Dendrogram:
    """Euclidean agglomeration with Lance-Williams updates."""
    if linkage not in LINKAGES:
        raise ConfigError(f"unknown linkage {linkage!r}; expected one of {', '.join(LINKAGES)}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("agglomeration needs at least 2 rows")
    merges = hierarchy.linkage(X, method=linkage, metric="euclidean")
    logger.debug("agglomerated %d rows with %s linkage", X.shape[0], linkage)
    return Dendrogram(merges=merges, linkage=linkage, n=X.shape[0])


def cut(d: Dendrogram, k: int) -> np.ndarray:
    """Labels 1..k from undoing the last ``k - 1`` merges, numbered by first appearance."""
    if not 1 <= k <= d.n:
        raise ConfigError(f"k must lie in 1..{d.n}, got {k}")
    parent = list(range(2 * d.n - 1))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(d.n - k):
        a, b = d.children(i)
        parent[find(a)] = d.n + i
        parent[find(b)] = d.n + i
    labels = np.zeros(d.n, dtype=np.int64)
    numbering = {}
    for row in range(d.n):
        root = find(row)
        if root not in numbering:
            numbering[root] = len(numbering) + 1
        labels[row] = numbering[root]
    return labels
