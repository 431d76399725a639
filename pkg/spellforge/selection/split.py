"""Train/holdout split with a balanced fold assignment of the training rows."""

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from spellforge.config import settings
from spellforge.dependencies import derive_rng
from spellforge.errors import ConfigError, DataError


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Row positions of the train and holdout samples.

    ``folds[i]`` is the fold (1-based) of ``train[i]``.
    """

    seed: int
    train: np.ndarray
    holdout: np.ndarray
    folds: np.ndarray
    n_folds: int

    @property
    def n(self) -> int:
        return int(self.train.size + self.holdout.size)

    def fold_sizes(self):
        return [int(np.count_nonzero(self.folds == f)) for f in range(1, self.n_folds + 1)]

    def fold_rows(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        """``(fitting rows, held rows)`` for ``fold``."""
        held = self.folds == fold
        return self.train[~held], self.train[held]

    def iter_folds(self) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
        for fold in range(1, self.n_folds + 1):
            fitting, held = self.fold_rows(fold)
            yield fold, fitting, held

    def restrict(self, keep: np.ndarray) -> "SplitPlan":
        """The same plan over the rows where ``keep`` is true; folds are kept as assigned."""
        keep = np.asarray(keep, dtype=bool)
        on_train = keep[self.train]
        return SplitPlan(
            seed=self.seed,
            train=self.train[on_train],
            holdout=self.holdout[keep[self.holdout]],
            folds=self.folds[on_train],
            n_folds=self.n_folds,
        )


def train_size(n: int, ratio: float) -> int:
    return min(n - 1, max(1, math.ceil(round(ratio * n, 9))))


def split_train_holdout(
    n: int,
    ratio: Optional[float] = None,
    seed: Optional[int] = None,
    n_folds: Optional[int] = None,
) -> SplitPlan:
    """Seeded permutation; the first ``ceil(ratio * n)`` positions train.

    Training rows are dealt to folds in permutation order, so fold sizes
    differ by at most one.
    """
    ratio = settings.train_ratio if ratio is None else ratio
    seed = settings.seed if seed is None else seed
    n_folds = settings.n_folds if n_folds is None else n_folds
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"train ratio must lie strictly between 0 and 1, got {ratio}")
    if n_folds < 2:
        raise ConfigError(f"need at least 2 folds, got {n_folds}")
    if n < 2:
        raise DataError(f"cannot split {n} row(s) into train and holdout samples")
    order = derive_rng(seed, 0).permutation(n)
    cut = train_size(n, ratio)
    return SplitPlan(
        seed=seed,
        train=order[:cut],
        holdout=order[cut:],
        folds=np.arange(cut) % n_folds + 1,
        n_folds=n_folds,
    )
