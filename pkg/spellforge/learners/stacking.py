"""Linear stacking of component model predictions."""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, List, Optional, Sequence

import numpy as np

from spellforge.errors import ConfigError, DataError
from spellforge.learners.base import ModelKind, TrainedModel, as_target
from spellforge.learners.linear import least_squares

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StackedModel(TrainedModel):
    """``intercept + sum(weights[i] * components[i](x))``."""

    kind: ClassVar[ModelKind] = ModelKind.STACKED

    components: List[TrainedModel]
    intercept: float
    weights: List[float]
    names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.components) and self.components:
            raise ConfigError(
                f"stacked model has {len(self.weights)} weights for {len(self.components)} components"
            )

    @property
    def columns(self) -> List[str]:
        seen: List[str] = []
        known = set()
        for component in self.components:
            for c in component.columns:
                if c not in known:
                    known.add(c)
                    seen.append(c)
        return seen

    def combine(self, predictions: Sequence[np.ndarray]) -> np.ndarray:
        out = np.full(len(predictions[0]), self.intercept)
        for w, p in zip(self.weights, predictions):
            out += w * np.asarray(p, dtype=float)
        return out

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        if not self.components:
            raise ConfigError("stacked model was built from predictions only; use combine()")
        index = {c: j for j, c in enumerate(self.columns)}
        parts = [
            component.predict_array(A[:, [index[c] for c in component.columns]])
            for component in self.components
        ]
        return self.combine(parts)


def stack_ensemble(
    predictions: Sequence[Sequence[float]],
    y,
    components: Optional[Sequence[TrainedModel]] = None,
    names: Optional[Sequence[str]] = None,
) -> StackedModel:
    """OLS with intercept of ``y`` on the component predictions; weights are unconstrained."""
    if len(predictions) < 1:
        raise ConfigError("stacking needs at least one component")
    target = as_target(y)
    P = np.column_stack([np.asarray(p, dtype=float) for p in predictions])
    if P.shape[0] != target.shape[0]:
        raise DataError(f"predictions have {P.shape[0]} rows but outcome has {target.shape[0]}")
    intercept, weights, dropped = least_squares(P, target)
    if dropped:
        logger.warning("stacking dropped collinear component(s) at position(s) %s", dropped)
    if components is not None and len(components) != P.shape[1]:
        raise ConfigError(f"{len(components)} components given for {P.shape[1]} prediction vectors")
    return StackedModel(
        components=list(components) if components is not None else [],
        intercept=float(intercept),
        weights=[float(w) for w in weights],
        names=list(names) if names is not None else [f"m{i + 1}" for i in range(P.shape[1])],
    )
