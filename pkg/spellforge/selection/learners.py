"""Learner adapters: default grids, fitting and per-fold scoring for each learner name."""

import logging
from abc import ABC, abstractmethod
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from spellforge.config import settings
from spellforge.errors import ConfigError
from spellforge.learners.base import TrainedModel
from spellforge.learners.boosting import TreeEnsemble, gbt_fit, gbt_influence, staged_predict
from spellforge.learners.lasso import SparseLinearModel, lambda_max, lasso_fit, lasso_path, post_lasso_ols
from spellforge.learners.linear import LinearModel, ols_fit
from spellforge.learners.probit import ProbitModel, fractional_probit_fit
from spellforge.learners.svr import SvrHyperParams, svr_fit
from spellforge.models import GridSpec, ParamGrid

logger = logging.getLogger(__name__)

Cell = Dict[str, float]

SVR_VALUES = [0.001, 0.01, 0.1, 1.0, 10.0]


def _named(A: np.ndarray, names: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(A, columns=list(names), copy=False)


class LearnerAdapter(ABC):
    """How one learner is fitted and cross-validated."""

    name: str = ""

    def default_grid(self) -> GridSpec:
        return GridSpec()

    def grid_scales(self, A: np.ndarray, y: np.ndarray) -> Dict[str, float]:
        return {}

    def regularization_key(self, cell: Cell) -> Tuple[float, ...]:
        """Larger keys mean stronger regularization."""
        return ()

    def partition(self, cells: List[Cell]) -> List[List[int]]:
        """Cells that share one fitting pass per fold."""
        return [[i] for i in range(len(cells))]

    @abstractmethod
    def fit(self, A: np.ndarray, y: np.ndarray, names: Sequence[str], cell: Cell, seed: int) -> TrainedModel:
        pass

    def score_cells(
        self,
        A_fit: np.ndarray,
        y_fit: np.ndarray,
        A_held: np.ndarray,
        names: Sequence[str],
        cells: List[Cell],
        seed: int,
    ) -> List[np.ndarray]:
        """Held-row predictions for each of ``cells``."""
        out = []
        for cell in cells:
            model = self.fit(A_fit, y_fit, names, cell, seed)
            out.append(model.predict_array(A_held))
        return out

    def n_predictors(self, model: TrainedModel) -> int:
        return len(model.columns)


class OlsAdapter(LearnerAdapter):
    name = "ols"

    def fit(self, A, y, names, cell, seed) -> LinearModel:
        return ols_fit(_named(A, names), y)

    def n_predictors(self, model: LinearModel) -> int:
        return len(model.columns) - len(model.dropped)


class LassoAdapter(LearnerAdapter):
    name = "lasso"

    def default_grid(self) -> GridSpec:
        return GridSpec(
            params={
                "lambda": ParamGrid(
                    min=1e-4, max=1.0, count=100, spacing="geometric", relative_to="lambda_max"
                )
            }
        )

    def grid_scales(self, A, y) -> Dict[str, float]:
        return {"lambda_max": lambda_max(A, y)}

    def regularization_key(self, cell):
        return (cell["lambda"],)

    def partition(self, cells):
        return [list(range(len(cells)))] if cells else []

    def fit(self, A, y, names, cell, seed) -> SparseLinearModel:
        model = lasso_fit(_named(A, names), y, cell["lambda"])
        post_lasso_ols(model, _named(A, names), y)
        return model

    def score_cells(self, A_fit, y_fit, A_held, names, cells, seed):
        path = lasso_path(A_fit, y_fit, [c["lambda"] for c in cells])
        return [m.predict_array(A_held) for m in path]

    def n_predictors(self, model: SparseLinearModel) -> int:
        return len(model.support)


class SvrAdapter(LearnerAdapter):
    name = "svr"

    def default_grid(self) -> GridSpec:
        return GridSpec(
            params={p: ParamGrid(values=SVR_VALUES) for p in ("C", "gamma", "epsilon")}
        )

    def regularization_key(self, cell):
        return (-cell["C"], -cell["gamma"], cell["epsilon"])

    def fit(self, A, y, names, cell, seed):
        hp = SvrHyperParams(C=cell["C"], gamma=cell["gamma"], epsilon=cell["epsilon"])
        return svr_fit(_named(A, names), y, hp, max_rows=settings.svr_max_train_rows, seed=seed)


class BoostingAdapter(LearnerAdapter):
    name = "boosting"

    def default_grid(self) -> GridSpec:
        return GridSpec(
            params={
                "max_splits": ParamGrid(min=1, max=6, count=6, spacing="linear"),
                "n_trees": ParamGrid(min=1, max=100, count=100, spacing="linear"),
            }
        )

    def regularization_key(self, cell):
        return (-cell["max_splits"], -cell["n_trees"])

    @staticmethod
    def _shape(cell: Cell) -> Tuple[int, float, float]:
        return (
            int(round(cell["max_splits"])),
            float(cell.get("shrinkage", 1.0)),
            float(cell.get("bag_fraction", 0.8)),
        )

    def partition(self, cells):
        groups: Dict[Tuple[int, float, float], List[int]] = {}
        for i, cell in enumerate(cells):
            groups.setdefault(self._shape(cell), []).append(i)
        return list(groups.values())

    def fit(self, A, y, names, cell, seed) -> TreeEnsemble:
        splits, shrinkage, bag = self._shape(cell)
        return gbt_fit(_named(A, names), y, splits, int(round(cell["n_trees"])), shrinkage, bag, seed)

    def score_cells(self, A_fit, y_fit, A_held, names, cells, seed):
        splits, shrinkage, bag = self._shape(cells[0])
        counts = [int(round(c["n_trees"])) for c in cells]
        ensemble = gbt_fit(A_fit, y_fit, splits, max(counts), shrinkage, bag, seed)
        stages = {}
        wanted = set(counts)
        for t, prediction in enumerate(staged_predict(ensemble, A_held), start=1):
            if t in wanted:
                stages[t] = prediction
        return [stages[t] for t in counts]

    def n_predictors(self, model: TreeEnsemble) -> int:
        return sum(1 for v in gbt_influence(model).values() if v > 0)


class ProbitAdapter(LearnerAdapter):
    name = "probit"

    def fit(self, A, y, names, cell, seed) -> ProbitModel:
        return fractional_probit_fit(_named(A, names), y)


LEARNERS: Dict[str, LearnerAdapter] = {
    adapter.name: adapter
    for adapter in (OlsAdapter(), LassoAdapter(), SvrAdapter(), BoostingAdapter(), ProbitAdapter())
}

ENSEMBLE = "ensemble"


def get_learner(name: str) -> LearnerAdapter:
    try:
        return LEARNERS[name]
    except KeyError:
        known = ", ".join(sorted(LEARNERS) + [ENSEMBLE])
        raise ConfigError(f"unknown learner {name!r}; expected one of {known}") from None
