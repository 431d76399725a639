"""Ordinary least squares with rank-revealing collinearity handling."""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Optional

import numpy as np
from scipy import linalg

from spellforge.learners.base import (
    DesignLike,
    ModelKind,
    TargetLike,
    TrainedModel,
    as_design,
    as_target,
    check_rows,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearModel(TrainedModel):
    """``intercept + sum(coefficients[c] * x[c])``."""

    kind: ClassVar[ModelKind] = ModelKind.LINEAR

    intercept: float
    coefficients: Dict[str, float]
    feature_names: List[str] = field(default_factory=list)
    dropped: List[str] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return list(self.feature_names)

    def coefficient_vector(self) -> np.ndarray:
        return np.array([self.coefficients.get(c, 0.0) for c in self.feature_names], dtype=float)

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        if not self.feature_names:
            return np.full(A.shape[0], self.intercept)
        return self.intercept + A @ self.coefficient_vector()


def least_squares(A: np.ndarray, y: np.ndarray, rtol: Optional[float] = None):
    """Centered least squares via pivoted QR.

    Returns ``(intercept, beta, dropped_positions)``; columns found linearly
    dependent on earlier pivots get coefficient 0.
    """
    n, k = A.shape
    y_mean = float(y.mean())
    if k == 0:
        return y_mean, np.zeros(0), []
    x_mean = A.mean(axis=0)
    centered = A - x_mean
    Q, R, piv = linalg.qr(centered, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return y_mean, np.zeros(k), list(range(k))
    tol = rtol if rtol is not None else max(n, k) * np.finfo(float).eps
    rank = int(np.count_nonzero(diag > tol * diag[0]))
    beta = np.zeros(k)
    beta[piv[:rank]] = linalg.solve_triangular(R[:rank, :rank], Q[:, :rank].T @ (y - y_mean))
    intercept = y_mean - float(x_mean @ beta)
    return intercept, beta, sorted(piv[rank:].tolist())


def ols_fit(X: DesignLike, y: TargetLike) -> LinearModel:
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    intercept, beta, dropped = least_squares(A, target)
    dropped_names = [names[j] for j in dropped]
    if dropped_names:
        logger.debug("OLS dropped %d collinear column(s): %s", len(dropped_names), dropped_names[:10])
    return LinearModel(
        intercept=intercept,
        coefficients={name: float(b) for name, b in zip(names, beta)},
        feature_names=names,
        dropped=dropped_names,
    )
