"""Model ladders: a declared sequence of learners and input sets, fitted and scored in order."""

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from spellforge.config import settings
from spellforge.core.history import ObservationWindow
from spellforge.dependencies import derive_seed
from spellforge.errors import ConfigError, DataError, MissingColumnError
from spellforge.features.matrix import FeatureMatrix, expand_interactions
from spellforge.learners.base import TrainedModel, predict
from spellforge.learners.boosting import TreeEnsemble
from spellforge.learners.lasso import SparseLinearModel
from spellforge.learners.ranking import importance, top_predictors
from spellforge.learners.stacking import stack_ensemble
from spellforge.models import EvalReport, LadderDocument, LadderEntry, LadderRow
from spellforge.selection.cv import cross_validate
from spellforge.selection.learners import ENSEMBLE, get_learner
from spellforge.selection.metrics import evaluate_predictions, r_squared_corr
from spellforge.selection.split import SplitPlan, split_train_holdout

logger = logging.getLogger(__name__)

OUTCOME_COLUMNS = {"any-is": "isprop", "unemployment": "ubprop"}
PACKAGED_LADDERS = ("ladder", "ladder_extensions", "ladder_unemployment")
TOP_REPORTED = 10


def load_ladder(path: Optional[Union[str, Path]] = None) -> LadderDocument:
    """Read a ladder file, or a packaged ladder by name (default ``ladder``)."""
    try:
        if path is None or str(path) in PACKAGED_LADDERS:
            name = f"{path or 'ladder'}.json"
            text = resources.files("spellforge.selection").joinpath("data", name).read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ConfigError(f"ladder file not found: {path}") from e
    try:
        document = LadderDocument.model_validate(json.loads(text))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid ladder {path or 'ladder'}: {e}") from e
    validate_ladder(document)
    return document


def validate_ladder(document: LadderDocument) -> None:
    """Learner names exist; references point at earlier entries."""
    if not document.entries:
        raise ConfigError("ladder has no entries")
    seen: List[str] = []
    for entry in document.entries:
        if entry.name in seen:
            raise ConfigError(f"duplicate ladder entry {entry.name!r}")
        if entry.learner == ENSEMBLE:
            if not entry.components:
                raise ConfigError(f"ensemble {entry.name!r} lists no components")
        else:
            get_learner(entry.learner)
        referenced = list(entry.components)
        referenced += [_parse_top(t)[0] for t in entry.inputs if t.startswith("top:")]
        if entry.interactions is not None:
            referenced.append(entry.interactions.source)
        for ref in referenced:
            if ref not in seen:
                raise ConfigError(f"{entry.name!r} refers to {ref!r}, which is not an earlier entry")
        seen.append(entry.name)


def _parse_top(token: str):
    try:
        _, rest = token.split(":", 1)
        source, k = rest.rsplit(":", 1)
        return source, int(k)
    except ValueError:
        raise ConfigError(f"malformed input reference {token!r}; expected top:<entry>:<k>") from None


def resolve_inputs(tokens: Sequence[str], X: FeatureMatrix, fitted: Dict[str, TrainedModel]) -> List[str]:
    """Ordered union of the columns named by ``tokens``."""
    out: List[str] = []
    known = set()

    def add(columns):
        for c in columns:
            if c not in known:
                known.add(c)
                out.append(c)

    for token in tokens:
        if token == "all":
            add(X.columns)
        elif token.startswith("top:"):
            source, k = _parse_top(token)
            add(top_predictors(fitted[source], k))
        elif token in X.columns:
            add([token])
        else:
            members = [info.name for info in X.info if token in info.groups]
            if not members:
                raise MissingColumnError([token])
            add(members)
    return out


def align_outcomes(outcomes: pd.DataFrame, person_ids: Sequence[str]) -> pd.DataFrame:
    """Outcome rows in feature-row order."""
    ids = outcomes["person_id"].astype(str)
    if list(ids) == list(person_ids):
        return outcomes.reset_index(drop=True)
    indexed = outcomes.assign(person_id=ids).set_index("person_id")
    absent = [p for p in person_ids if p not in indexed.index]
    if absent:
        raise DataError(f"{len(absent)} feature rows have no outcome", {"first": absent[0]})
    return indexed.loc[list(person_ids)].reset_index()


@dataclass
class LadderResult:
    rows: List[LadderRow]
    models: Dict[str, TrainedModel]
    plan: SplitPlan
    predictions: Dict[str, np.ndarray] = field(default_factory=dict)


def always_on_mask(outcomes: pd.DataFrame, window: Optional[str]) -> Optional[np.ndarray]:
    if not window:
        return None
    column = f"isprop_{ObservationWindow.parse(window).label()}"
    if column not in outcomes.columns:
        raise MissingColumnError([column])
    return outcomes[column].to_numpy(dtype=float) < 1.0


def _top_report(model: TrainedModel) -> List[Dict[str, object]]:
    if not isinstance(model, (SparseLinearModel, TreeEnsemble)):
        return []
    scores = importance(model)
    rows = []
    for name in top_predictors(model, TOP_REPORTED) if any(v > 0 for v in scores.values()) else []:
        row: Dict[str, object] = {"name": name, "importance": scores[name]}
        if isinstance(model, SparseLinearModel) and model.post_lasso is not None:
            row["coefficient"] = model.post_lasso.coefficients.get(name, 0.0)
        rows.append(row)
    return rows


def run_model_ladder(
    X: FeatureMatrix,
    outcomes: pd.DataFrame,
    ladder: LadderDocument,
    plan: Optional[SplitPlan] = None,
    seed: Optional[int] = None,
    outcome: Optional[str] = None,
    exclude_always_on: Optional[str] = None,
    threads: Optional[int] = None,
) -> LadderResult:
    """Fit every entry on the train split and score it on train, CV and holdout.

    ``outcomes`` rows align with ``X`` rows. ``outcome`` and
    ``exclude_always_on`` override the per-entry settings when given.
    """
    validate_ladder(ladder)
    seed = settings.seed if seed is None else seed
    if outcome is not None and outcome not in OUTCOME_COLUMNS:
        raise ConfigError(f"unknown outcome {outcome!r}; expected any-is or unemployment")
    outcomes = align_outcomes(outcomes, X.person_ids)
    plan = plan if plan is not None else split_train_holdout(X.n, seed=seed)

    fitted: Dict[str, TrainedModel] = {}
    predictions: Dict[str, np.ndarray] = {}
    contexts: Dict[str, tuple] = {}
    rows: List[LadderRow] = []

    for index, entry in enumerate(ladder.entries):
        target_name = outcome or entry.outcome or "any-is"
        window = exclude_always_on or entry.exclude_always_on
        column = OUTCOME_COLUMNS[target_name]
        if column not in outcomes.columns:
            raise MissingColumnError([column])
        y = outcomes[column].to_numpy(dtype=float)
        keep = always_on_mask(outcomes, window)
        entry_plan = plan.restrict(keep) if keep is not None else plan
        contexts[entry.name] = (target_name, window)
        logger.info(
            "ladder %s (%s): %d train / %d holdout rows",
            entry.name, entry.learner, entry_plan.train.size, entry_plan.holdout.size,
        )

        if entry.learner == ENSEMBLE:
            row, model, full = _fit_ensemble(entry, fitted, predictions, contexts, y, entry_plan, seed, index)
        else:
            working = X
            if entry.interactions is not None:
                base = top_predictors(fitted[entry.interactions.source], entry.interactions.top)
                working = expand_interactions(X, base)
            columns = resolve_inputs(entry.inputs, working, fitted)
            if entry.interactions is not None:
                columns += [c for c in working.columns[X.k :] if c not in columns]
            row, model, full = _fit_entry(entry, working.select(columns), y, entry_plan, seed, index, threads)
        row.outcome = target_name
        row.sample_filter = window
        fitted[entry.name] = model
        predictions[entry.name] = full
        rows.append(row)

    return LadderResult(rows=rows, models=fitted, plan=plan, predictions=predictions)


def _fit_entry(entry: LadderEntry, Xe: FeatureMatrix, y: np.ndarray, plan: SplitPlan, seed: int, index: int, threads):
    adapter = get_learner(entry.learner)
    if Xe.k == 0 and entry.learner != "ols":
        raise ConfigError(f"{entry.name!r}: {entry.learner} needs at least one input column")
    cv = cross_validate(adapter, entry.grid, plan, Xe, y, seed=derive_seed(seed, index, 1), threads=threads)
    train = plan.train
    model = adapter.fit(Xe.values[train], y[train], Xe.columns, cv.selected, derive_seed(seed, index, 2))
    full = predict(model, Xe)
    cv_r2 = r_squared_corr(y[train], cv.out_of_fold)
    row = LadderRow(
        name=entry.name,
        label=entry.label,
        learner=entry.learner,
        outcome="",
        n_inputs=Xe.k,
        n_predictors=adapter.n_predictors(model),
        selected=cv.selected,
        train=evaluate_predictions(y[train], full[train], "train", with_ci=False),
        cv=EvalReport(
            sample="cv", n=int(train.size), mse=cv.best_mse, r_squared=cv_r2, r_squared_defined=cv_r2 is not None
        ),
        holdout=evaluate_predictions(y[plan.holdout], full[plan.holdout], "holdout", seed=derive_seed(seed, index, 3)),
        cv_curve=cv.points() if entry.learner == "lasso" else [],
        top_predictors=_top_report(model),
    )
    logger.info("ladder %s: holdout MSE %.5f", entry.name, row.holdout.mse)
    return row, model, full


def _fit_ensemble(entry, fitted, predictions, contexts, y, plan: SplitPlan, seed: int, index: int):
    expected = contexts[entry.name]
    for name in entry.components:
        if contexts[name] != expected:
            raise ConfigError(
                f"ensemble {entry.name!r} mixes components fitted on a different outcome or sample ({name!r})"
            )
    train = plan.train
    stacked = stack_ensemble(
        [predictions[c][train] for c in entry.components],
        y[train],
        components=[fitted[c] for c in entry.components],
        names=list(entry.components),
    )
    full = stacked.combine([predictions[c] for c in entry.components])
    row = LadderRow(
        name=entry.name,
        label=entry.label,
        learner=ENSEMBLE,
        outcome="",
        n_inputs=len(stacked.columns),
        n_predictors=len(entry.components),
        selected={f"weight:{c}": w for c, w in zip(entry.components, stacked.weights)} | {"intercept": stacked.intercept},
        train=evaluate_predictions(y[train], full[train], "train", with_ci=False),
        holdout=evaluate_predictions(y[plan.holdout], full[plan.holdout], "holdout", seed=derive_seed(seed, index, 3)),
    )
    logger.info("ladder %s: weights %s, holdout MSE %.5f", entry.name, stacked.weights, row.holdout.mse)
    return row, stacked, full

