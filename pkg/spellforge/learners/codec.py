"""``model.json`` codec: one handler per model kind."""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from spellforge.errors import ConfigError, SchemaError
from spellforge.learners.base import ModelKind, TrainedModel
from spellforge.learners.boosting import RegressionTree, TreeEnsemble
from spellforge.learners.lasso import SparseLinearModel
from spellforge.learners.linear import LinearModel
from spellforge.learners.probit import ProbitModel
from spellforge.learners.stacking import StackedModel
from spellforge.learners.svr import KernelModel, SvrHyperParams
from spellforge.models import ModelArtifact

logger = logging.getLogger(__name__)

Encoded = Tuple[Dict[str, Any], Dict[str, Any]]


class ModelCodec(ABC):
    """Converts one model kind to and from artifact fields."""

    @abstractmethod
    def encode(self, model: Any) -> Encoded:
        """``(hyperparameters, payload)``"""

    @abstractmethod
    def decode(self, artifact: ModelArtifact) -> TrainedModel:
        pass


def _linear_payload(m: LinearModel) -> Dict[str, Any]:
    return {
        "intercept": m.intercept,
        "coefficients": [m.coefficients.get(c, 0.0) for c in m.feature_names],
        "feature_names": list(m.feature_names),
        "dropped": list(m.dropped),
    }


def _linear_from(payload: Dict[str, Any]) -> LinearModel:
    names = list(payload["feature_names"])
    return LinearModel(
        intercept=float(payload["intercept"]),
        coefficients={c: float(b) for c, b in zip(names, payload["coefficients"])},
        feature_names=names,
        dropped=list(payload.get("dropped", [])),
    )


class LinearCodec(ModelCodec):
    def encode(self, model: LinearModel) -> Encoded:
        return {}, _linear_payload(model)

    def decode(self, artifact: ModelArtifact) -> LinearModel:
        return _linear_from(artifact.payload)


class SparseLinearCodec(ModelCodec):
    def encode(self, model: SparseLinearModel) -> Encoded:
        payload = {
            "intercept": model.intercept,
            "standardized": model.standardized.tolist(),
            "center": model.center.tolist(),
            "scale": model.scale.tolist(),
            "sweeps": model.sweeps,
            "post_lasso": _linear_payload(model.post_lasso) if model.post_lasso is not None else None,
        }
        return {"lambda": model.lam}, payload

    def decode(self, artifact: ModelArtifact) -> SparseLinearModel:
        p = artifact.payload
        post = p.get("post_lasso")
        return SparseLinearModel(
            lam=float(artifact.hyperparameters["lambda"]),
            intercept=float(p["intercept"]),
            feature_names=list(artifact.columns),
            center=np.asarray(p["center"], dtype=float),
            scale=np.asarray(p["scale"], dtype=float),
            standardized=np.asarray(p["standardized"], dtype=float),
            post_lasso=_linear_from(post) if post else None,
            sweeps=int(p.get("sweeps", 0)),
        )


class KernelCodec(ModelCodec):
    def encode(self, model: KernelModel) -> Encoded:
        hp = model.hyperparams
        return (
            {"C": hp.C, "gamma": hp.gamma, "epsilon": hp.epsilon, "kernel": hp.kernel},
            {
                "support_vectors": model.support_vectors.tolist(),
                "dual_coef": model.dual_coef.tolist(),
                "bias": model.bias,
                "iterations": model.iterations,
            },
        )

    def decode(self, artifact: ModelArtifact) -> KernelModel:
        p = artifact.payload
        k = len(artifact.columns)
        return KernelModel(
            hyperparams=SvrHyperParams(**artifact.hyperparameters),
            support_vectors=np.asarray(p["support_vectors"], dtype=float).reshape(-1, k),
            dual_coef=np.asarray(p["dual_coef"], dtype=float),
            bias=float(p["bias"]),
            feature_names=list(artifact.columns),
            iterations=int(p.get("iterations", 0)),
        )


class TreeEnsembleCodec(ModelCodec):
    FIELDS = ("feature", "threshold", "left", "right", "value", "gain")

    def encode(self, model: TreeEnsemble) -> Encoded:
        trees = [{f: getattr(t, f).tolist() for f in self.FIELDS} for t in model.trees]
        return (
            {
                "max_splits": model.max_splits,
                "n_trees": model.n_trees,
                "shrinkage": model.shrinkage,
                "bag_fraction": model.bag_fraction,
            },
            {"initial": model.initial, "trees": trees},
        )

    def decode(self, artifact: ModelArtifact) -> TreeEnsemble:
        hp, p = artifact.hyperparameters, artifact.payload
        ints = {"feature", "left", "right"}
        trees = [
            RegressionTree(
                **{f: np.asarray(t[f], dtype=np.int64 if f in ints else float) for f in self.FIELDS}
            )
            for t in p["trees"]
        ]
        return TreeEnsemble(
            trees=trees,
            shrinkage=float(hp["shrinkage"]),
            bag_fraction=float(hp["bag_fraction"]),
            max_splits=int(hp["max_splits"]),
            initial=float(p["initial"]),
            feature_names=list(artifact.columns),
            seed=artifact.seed or 0,
        )


class ProbitCodec(ModelCodec):
    def encode(self, model: ProbitModel) -> Encoded:
        payload = _linear_payload(model.index)
        payload.update(iterations=model.iterations, log_likelihood=model.log_likelihood)
        return {}, payload

    def decode(self, artifact: ModelArtifact) -> ProbitModel:
        return ProbitModel(
            index=_linear_from(artifact.payload),
            iterations=int(artifact.payload.get("iterations", 0)),
            log_likelihood=float(artifact.payload.get("log_likelihood", 0.0)),
        )


class StackedCodec(ModelCodec):
    def encode(self, model: StackedModel) -> Encoded:
        return {}, {
            "intercept": model.intercept,
            "weights": list(model.weights),
            "names": list(model.names),
            "components": [to_artifact(c).model_dump(mode="json") for c in model.components],
        }

    def decode(self, artifact: ModelArtifact) -> StackedModel:
        p = artifact.payload
        return StackedModel(
            components=[from_artifact(ModelArtifact.model_validate(c)) for c in p["components"]],
            intercept=float(p["intercept"]),
            weights=[float(w) for w in p["weights"]],
            names=list(p.get("names", [])),
        )


CODECS: Dict[ModelKind, ModelCodec] = {
    ModelKind.LINEAR: LinearCodec(),
    ModelKind.SPARSE_LINEAR: SparseLinearCodec(),
    ModelKind.KERNEL: KernelCodec(),
    ModelKind.TREE_ENSEMBLE: TreeEnsembleCodec(),
    ModelKind.PROBIT: ProbitCodec(),
    ModelKind.STACKED: StackedCodec(),
}


def to_artifact(
    model: TrainedModel,
    seed: Optional[int] = None,
    label: Optional[str] = None,
    manifest_id: Optional[str] = None,
) -> ModelArtifact:
    hyperparameters, payload = CODECS[model.kind].encode(model)
    if seed is None and isinstance(model, TreeEnsemble):
        seed = model.seed
    return ModelArtifact(
        kind=model.kind.value,
        hyperparameters=hyperparameters,
        columns=list(model.columns),
        payload=payload,
        seed=seed,
        label=label,
        manifest_id=manifest_id,
    )


def from_artifact(artifact: ModelArtifact) -> TrainedModel:
    try:
        kind = ModelKind(artifact.kind)
    except ValueError as e:
        raise ConfigError(f"unknown model kind {artifact.kind!r}") from e
    try:
        return CODECS[kind].decode(artifact)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed {kind.value} model artifact: {e}") from e


def save_model(model: TrainedModel, path: Union[str, Path], **meta) -> ModelArtifact:
    artifact = to_artifact(model, **meta)
    Path(path).write_text(artifact.model_dump_json(indent=2), encoding="utf-8")
    logger.info("wrote %s model to %s", model.kind.value, path)
    return artifact


def load_model(path: Union[str, Path]) -> TrainedModel:
    path = Path(path)
    try:
        artifact = ModelArtifact.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError as e:
        raise SchemaError(f"model file not found: {path}", path=str(path)) from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid model file {path}: {e}") from e
    return from_artifact(artifact)
