"""Shared model interface: kinds, design coercion and ``predict``."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import ClassVar, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from spellforge.errors import DataError, MissingColumnError
from spellforge.features.matrix import FeatureMatrix, OutcomeVector

DesignLike = Union[FeatureMatrix, pd.DataFrame, np.ndarray]
TargetLike = Union[OutcomeVector, np.ndarray, Sequence[float]]


class ModelKind(str, Enum):
    LINEAR = "linear"
    SPARSE_LINEAR = "sparse-linear"
    KERNEL = "kernel"
    TREE_ENSEMBLE = "tree-ensemble"
    PROBIT = "probit"
    STACKED = "stacked"


class TrainedModel(ABC):
    """A fitted model that maps named columns to predictions."""

    kind: ClassVar[ModelKind]

    @property
    @abstractmethod
    def columns(self) -> List[str]:
        """Columns the model reads, in the order ``predict_array`` expects."""

    @abstractmethod
    def predict_array(self, A: np.ndarray) -> np.ndarray:
        """Predictions for a raw design whose columns follow ``columns``."""


def as_design(X: DesignLike) -> Tuple[np.ndarray, List[str]]:
    if isinstance(X, FeatureMatrix):
        return X.values, list(X.columns)
    if isinstance(X, pd.DataFrame):
        return X.to_numpy(dtype=float), [str(c) for c in X.columns]
    A = np.asarray(X, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise DataError(f"design must be two-dimensional, got shape {A.shape}")
    return A, [f"x{j + 1}" for j in range(A.shape[1])]


def as_target(y: TargetLike) -> np.ndarray:
    if isinstance(y, OutcomeVector):
        return y.values
    values = np.asarray(y, dtype=float).ravel()
    if np.isnan(values).any():
        raise DataError("outcome contains missing values")
    return values


def check_rows(A: np.ndarray, y: np.ndarray) -> None:
    if A.shape[0] != y.shape[0]:
        raise DataError(f"design has {A.shape[0]} rows but outcome has {y.shape[0]}")
    if A.shape[0] == 0:
        raise DataError("cannot fit a model on zero rows")


def align(X: DesignLike, columns: Sequence[str]) -> np.ndarray:
    """Columns of ``X`` in model order; raw arrays must already match."""
    if isinstance(X, (FeatureMatrix, pd.DataFrame)):
        A, names = as_design(X)
        index = {name: j for j, name in enumerate(names)}
        missing = [c for c in columns if c not in index]
        if missing:
            raise MissingColumnError(missing)
        return A[:, [index[c] for c in columns]]
    A, _ = as_design(X)
    if A.shape[1] != len(columns):
        raise DataError(f"model expects {len(columns)} columns, got {A.shape[1]}")
    return A


def predict(m: TrainedModel, X: DesignLike) -> np.ndarray:
    """Deterministic predictions for every row of ``X``."""
    return np.asarray(m.predict_array(align(X, m.columns)), dtype=float)
