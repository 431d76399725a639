"""K-fold cross-validated grid search over a learner's hyperparameters."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import delayed

from spellforge.config import settings
from spellforge.dependencies import derive_seed, get_parallel
from spellforge.errors import DataError, NumericalError, SpellforgeError
from spellforge.learners.base import DesignLike, TargetLike, as_design, as_target, check_rows
from spellforge.models import CvPoint, GridSpec
from spellforge.selection.learners import Cell, LearnerAdapter, get_learner
from spellforge.selection.split import SplitPlan

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12
_RECOVERABLE = (SpellforgeError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class CvResult:
    """Per-cell mean held-fold MSE; failed cells hold NaN."""

    cells: List[Cell]
    cell_mse: np.ndarray
    selected_index: int
    out_of_fold: np.ndarray
    scales: Dict[str, float] = field(default_factory=dict)

    @property
    def selected(self) -> Cell:
        return dict(self.cells[self.selected_index])

    @property
    def best_mse(self) -> float:
        return float(self.cell_mse[self.selected_index])

    def points(self) -> List[CvPoint]:
        return [
            CvPoint(params=dict(cell), mse=None if np.isnan(v) else float(v), failed=bool(np.isnan(v)))
            for cell, v in zip(self.cells, self.cell_mse)
        ]


def _score_task(
    adapter: LearnerAdapter,
    A: np.ndarray,
    y: np.ndarray,
    fitting: np.ndarray,
    held: np.ndarray,
    names: Sequence[str],
    cells: List[Cell],
    seed: int,
):
    try:
        return adapter.score_cells(A[fitting], y[fitting], A[held], names, cells, seed), None
    except _RECOVERABLE as e:
        return None, f"{type(e).__name__}: {e}"


def select_cell(cell_mse: np.ndarray, cells: List[Cell], adapter: LearnerAdapter) -> int:
    """Lowest MSE; near-ties go to the most regularized cell, then the first listed."""
    usable = np.flatnonzero(~np.isnan(cell_mse))
    if usable.size == 0:
        raise NumericalError("every grid cell failed during cross-validation")
    best = cell_mse[usable].min()
    tied = [int(i) for i in usable if cell_mse[i] <= best + TIE_RTOL * max(abs(best), 1e-300)]
    return max(tied, key=lambda i: (adapter.regularization_key(cells[i]), -i))


def cross_validate(
    learner: Union[str, LearnerAdapter],
    grid: Optional[GridSpec],
    plan: SplitPlan,
    X: DesignLike,
    y: TargetLike,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> CvResult:
    """Average held-fold MSE of every grid cell over the plan's folds.

    ``plan`` positions index the rows of ``X``. A cell whose fit fails in any
    fold is excluded with a warning.
    """
    adapter = get_learner(learner) if isinstance(learner, str) else learner
    grid = grid if grid is not None else adapter.default_grid()
    seed = settings.seed if seed is None else seed
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    sizes = plan.fold_sizes()
    if min(sizes) == 0:
        raise DataError(f"training sample of {plan.train.size} rows leaves an empty fold", {"fold_sizes": sizes})

    scales = adapter.grid_scales(A[plan.train], target[plan.train])
    cells = grid.cells(scales)
    groups = adapter.partition(cells)
    folds = list(plan.iter_folds())
    tasks = [(g, fold) for g in range(len(groups)) for fold in range(len(folds))]
    results = get_parallel(threads)(
        delayed(_score_task)(
            adapter,
            A,
            target,
            folds[f][1],
            folds[f][2],
            names,
            [cells[i] for i in groups[g]],
            derive_seed(seed, g, folds[f][0]),
        )
        for g, f in tasks
    )

    position = {int(row): i for i, row in enumerate(plan.train)}
    fold_mse = np.full((len(cells), len(folds)), np.nan)
    out_of_fold = np.full((len(cells), plan.train.size), np.nan)
    for (g, f), (predictions, failure) in zip(tasks, results):
        held = folds[f][2]
        if failure is not None:
            logger.warning(
                "%s fold %d failed for %d grid cell(s): %s",
                adapter.name, folds[f][0], len(groups[g]), failure,
            )
            continue
        slots = [position[int(r)] for r in held]
        for i, prediction in zip(groups[g], predictions):
            residual = target[held] - prediction
            fold_mse[i, f] = float(residual @ residual / held.size)
            out_of_fold[i, slots] = prediction

    cell_mse = fold_mse.mean(axis=1)
    selected = select_cell(cell_mse, cells, adapter)
    logger.info(
        "%s CV: %d cell(s), selected %s with MSE %.6f",
        adapter.name, len(cells), cells[selected], cell_mse[selected],
    )
    return CvResult(
        cells=cells,
        cell_mse=cell_mse,
        selected_index=selected,
        out_of_fold=out_of_fold[selected],
        scales=scales,
    )
