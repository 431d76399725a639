"""Per-group summaries of clustered rows."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from spellforge.config import settings
from spellforge.errors import DataError


@dataclass
class GroupProfile:
    group: int
    size: int
    suppressed: bool = False
    mean: Dict[str, float] = field(default_factory=dict)
    sd: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass
class ClusterProfile:
    k: int
    labels: np.ndarray
    variables: List[str]
    groups: List[GroupProfile]

    @property
    def sizes(self) -> List[int]:
        return [g.size for g in self.groups]


def summarize_rows(values: np.ndarray, variables: Sequence[str], group: int) -> GroupProfile:
    size = values.shape[0]
    if size == 0:
        return GroupProfile(group=group, size=0)
    means = values.mean(axis=0)
    if size > 1:
        sd = {v: float(s) for v, s in zip(variables, values.std(axis=0, ddof=1))}
    else:
        sd = {v: None for v in variables}
    return GroupProfile(
        group=group,
        size=size,
        mean={v: float(m) for v, m in zip(variables, means)},
        sd=sd,
    )


def group_summary(
    X: np.ndarray,
    labels: np.ndarray,
    variables: Sequence[str],
    min_group_size: Optional[int] = None,
) -> ClusterProfile:
    """Mean and sample sd per variable for each group; small groups keep only their size."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != labels.size:
        raise DataError(f"{X.shape[0]} rows but {labels.size} labels")
    if X.shape[1] != len(variables):
        raise DataError(f"{X.shape[1]} columns but {len(variables)} variable names")
    min_group_size = settings.min_group_size if min_group_size is None else min_group_size
    k = int(labels.max()) if labels.size else 0
    groups = []
    for g in range(1, k + 1):
        rows = X[labels == g]
        if rows.shape[0] < min_group_size:
            groups.append(GroupProfile(group=g, size=int(rows.shape[0]), suppressed=True))
        else:
            groups.append(summarize_rows(rows, variables, g))
    return ClusterProfile(k=k, labels=labels, variables=list(variables), groups=groups)


def centroids(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    return np.vstack([X[labels == g].mean(axis=0) for g in range(1, k + 1)])


def assign_nearest(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """1-based label of the nearest centroid; ties go to the lower label."""
    sq = (X * X).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * X @ centers.T
    return np.argmin(sq, axis=1).astype(np.int64) + 1
