"""Predictor rankings used to build the top-k input sets."""

from typing import Dict, List

from spellforge.errors import ConfigError
from spellforge.learners.base import TrainedModel
from spellforge.learners.boosting import TreeEnsemble, gbt_influence
from spellforge.learners.lasso import SparseLinearModel


def lasso_importance(m: SparseLinearModel) -> Dict[str, float]:
    """|coefficient| on the standardized scale for every selected column.

    Uses the post-LASSO refit when there is one.
    """
    scale = dict(zip(m.feature_names, m.scale))
    if m.post_lasso is not None:
        return {
            c: abs(m.post_lasso.coefficients.get(c, 0.0)) * float(scale[c])
            for c in m.post_lasso.feature_names
        }
    return {c: abs(float(b)) for c, b in zip(m.feature_names, m.standardized) if b != 0.0}


def importance(model: TrainedModel) -> Dict[str, float]:
    if isinstance(model, SparseLinearModel):
        return lasso_importance(model)
    if isinstance(model, TreeEnsemble):
        return gbt_influence(model)
    raise ConfigError(f"no predictor ranking is defined for {model.kind.value} models")


def top_predictors(model: TrainedModel, k: int) -> List[str]:
    """At most ``k`` column names with positive importance, strongest first.

    Ties keep training-column order.
    """
    if k < 1:
        raise ConfigError(f"k must be at least 1, got {k}")
    scores = importance(model)
    position = {c: j for j, c in enumerate(model.columns)}
    ranked = sorted(
        (c for c, v in scores.items() if v > 0.0),
        key=lambda c: (-scores[c], position.get(c, len(position))),
    )
    return ranked[:k]
