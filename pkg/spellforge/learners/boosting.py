"""Least-squares gradient boosting with small best-first regression trees."""

import logging
from dataclasses import dataclass
from typing import ClassVar, Dict, Iterator, List, Optional, Tuple

import numpy as np

from spellforge.errors import ConfigError
from spellforge.learners.base import (
    DesignLike,
    ModelKind,
    TargetLike,
    TrainedModel,
    align,
    as_design,
    as_target,
    check_rows,
)

logger = logging.getLogger(__name__)

LEAF = -1
COLUMN_BLOCK = 64
TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Array-encoded binary tree; ``feature[i] == LEAF`` marks a leaf.

    Rows with ``x[feature] <= threshold`` go to ``left``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature != LEAF))

    def apply(self, A: np.ndarray) -> np.ndarray:
        node = np.zeros(A.shape[0], dtype=np.int64)
        while True:
            inner = self.feature[node] != LEAF
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            at = node[rows]
            go_left = A[rows, self.feature[at]] <= self.threshold[at]
            node[rows] = np.where(go_left, self.left[at], self.right[at])

    def predict(self, A: np.ndarray) -> np.ndarray:
        return self.value[self.apply(A)]


@dataclass(frozen=True, eq=False)
class TreeEnsemble(TrainedModel):
    kind: ClassVar[ModelKind] = ModelKind.TREE_ENSEMBLE

    trees: List[RegressionTree]
    shrinkage: float
    bag_fraction: float
    max_splits: int
    initial: float
    feature_names: List[str]
    seed: int = 0

    @property
    def columns(self) -> List[str]:
        return list(self.feature_names)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        out = np.full(A.shape[0], self.initial)
        for tree in self.trees:
            out += self.shrinkage * tree.predict(A)
        return out

    def truncated(self, n_trees: int) -> "TreeEnsemble":
        """The same ensemble keeping only its first ``n_trees`` trees."""
        return TreeEnsemble(
            trees=self.trees[:n_trees],
            shrinkage=self.shrinkage,
            bag_fraction=self.bag_fraction,
            max_splits=self.max_splits,
            initial=self.initial,
            feature_names=self.feature_names,
            seed=self.seed,
        )


class _Splitter:
    """Exhaustive variance-reduction split search over presorted columns."""

    def __init__(self, A: np.ndarray):
        self.A_T = np.ascontiguousarray(A.T)
        self.order_T = np.ascontiguousarray(np.argsort(A, axis=0, kind="stable").T)

    def best(self, mask: np.ndarray, r: np.ndarray) -> Optional[Tuple[float, int, float]]:
        """``(gain, column, threshold)`` of the best split of the rows in ``mask``."""
        m = int(mask.sum())
        if m < 2:
            return None
        total = float(r[mask].sum())
        base = total * total / m
        best: Optional[Tuple[float, int, float]] = None
        k = self.A_T.shape[0]
        for lo in range(0, k, COLUMN_BLOCK):
            order = self.order_T[lo : lo + COLUMN_BLOCK]
            rows = order[mask[order]].reshape(order.shape[0], m)
            xs = np.take_along_axis(self.A_T[lo : lo + COLUMN_BLOCK], rows, axis=1)
            left_sum = np.cumsum(r[rows], axis=1)[:, :-1]
            n_left = np.arange(1, m, dtype=float)
            right_sum = total - left_sum
            gain = left_sum**2 / n_left + right_sum**2 / (m - n_left) - base
            gain = np.where(xs[:, :-1] < xs[:, 1:], gain, -np.inf)
            position = np.argmax(gain, axis=1)
            column_gain = gain[np.arange(gain.shape[0]), position]
            for c in range(gain.shape[0]):
                g = column_gain[c]
                if not np.isfinite(g):
                    continue
                if best is None or g > best[0] + TIE_RTOL * max(1.0, abs(best[0])):
                    p = position[c]
                    lower, upper = xs[c, p], xs[c, p + 1]
                    threshold = (lower + upper) / 2.0
                    if threshold >= upper:
                        threshold = lower
                    best = (float(g), lo + c, float(threshold))
        return best


def _grow_tree(
    splitter: _Splitter,
    A: np.ndarray,
    r: np.ndarray,
    bag: np.ndarray,
    max_splits: int,
) -> RegressionTree:
    feature: List[int] = [LEAF]
    threshold: List[float] = [0.0]
    left: List[int] = [LEAF]
    right: List[int] = [LEAF]
    gain: List[float] = [0.0]
    masks: Dict[int, np.ndarray] = {0: bag}
    floor = TIE_RTOL * max(1.0, float(r[bag] @ r[bag]))
    candidates: Dict[int, Tuple[float, int, float]] = {}

    def consider(node: int) -> None:
        found = splitter.best(masks[node], r)
        if found is not None and found[0] > floor:
            candidates[node] = found

    consider(0)
    splits = 0
    while splits < max_splits and candidates:
        node = max(candidates, key=lambda i: (candidates[i][0], -i))
        g, column, cut = candidates.pop(node)
        mask = masks.pop(node)
        goes_left = A[:, column] <= cut
        for child_mask in (mask & goes_left, mask & ~goes_left):
            masks[len(feature)] = child_mask
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            gain.append(0.0)
        feature[node], threshold[node], gain[node] = column, cut, g
        left[node], right[node] = len(feature) - 2, len(feature) - 1
        splits += 1
        if splits < max_splits:
            consider(left[node])
            consider(right[node])

    value = np.zeros(len(feature))
    for node, mask in masks.items():
        value[node] = float(r[mask].mean()) if mask.any() else 0.0
    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=value,
        gain=np.array(gain, dtype=float),
    )


def gbt_fit(
    X: DesignLike,
    y: TargetLike,
    max_splits: int,
    n_trees: int,
    shrinkage: float = 1.0,
    bag_fraction: float = 0.8,
    seed: int = 0,
) -> TreeEnsemble:
    """Fit ``n_trees`` trees of at most ``max_splits`` internal splits to successive residuals."""
    if max_splits < 1:
        raise ConfigError(f"max_splits must be at least 1, got {max_splits}")
    if n_trees < 1:
        raise ConfigError(f"n_trees must be at least 1, got {n_trees}")
    if not 0.0 < shrinkage <= 1.0:
        raise ConfigError(f"shrinkage must lie in (0, 1], got {shrinkage}")
    if not 0.0 < bag_fraction <= 1.0:
        raise ConfigError(f"bag_fraction must lie in (0, 1], got {bag_fraction}")
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    splitter = _Splitter(A)
    initial = float(target.mean())
    fitted = np.full(n, initial)
    bag_size = max(1, int(round(bag_fraction * n)))
    trees: List[RegressionTree] = []
    for _ in range(n_trees):
        bag = np.zeros(n, dtype=bool)
        if bag_size >= n:
            bag[:] = True
        else:
            bag[rng.choice(n, size=bag_size, replace=False)] = True
        tree = _grow_tree(splitter, A, target - fitted, bag, max_splits)
        fitted += shrinkage * tree.predict(A)
        trees.append(tree)
    logger.debug(
        "boosting fit: %d trees, %d splits in total", n_trees, sum(t.n_splits for t in trees)
    )
    return TreeEnsemble(
        trees=trees,
        shrinkage=float(shrinkage),
        bag_fraction=float(bag_fraction),
        max_splits=int(max_splits),
        initial=initial,
        feature_names=list(names),
        seed=int(seed),
    )


def staged_predict(e: TreeEnsemble, X: DesignLike) -> Iterator[np.ndarray]:
    """Predictions after each tree in turn; the ``t``-th value uses the first ``t`` trees."""
    A = align(X, e.columns)
    out = np.full(A.shape[0], e.initial)
    for tree in e.trees:
        out = out + e.shrinkage * tree.predict(A)
        yield out


def gbt_influence(e: TreeEnsemble) -> Dict[str, float]:
    """Squared-error reduction per column over every split, rescaled to sum to 100."""
    totals = np.zeros(len(e.feature_names))
    for tree in e.trees:
        inner = tree.feature != LEAF
        np.add.at(totals, tree.feature[inner], tree.gain[inner])
    grand = totals.sum()
    if grand > 0:
        totals = totals * (100.0 / grand)
    return {name: float(v) for name, v in zip(e.feature_names, totals)}
