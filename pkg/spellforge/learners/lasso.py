"""LASSO by cyclic coordinate descent on standardized columns.

Objective (standardized scale, centered outcome):

    sum_i (y_i - z_i'b)^2 + lam * sum_j |b_j|

Columns are scaled to zero mean and unit population variance, so
``sum_i z_ij^2 = n`` and the coordinate update is
``b_j = soft(z_j'r_j, lam / 2) / n`` with ``r_j`` the partial residual.
"""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Optional, Sequence

import numpy as np

from spellforge.config import settings
from spellforge.errors import ConfigError, ConvergenceError
from spellforge.learners.base import (
    DesignLike,
    ModelKind,
    TargetLike,
    TrainedModel,
    as_design,
    as_target,
    check_rows,
)
from spellforge.learners.linear import LinearModel, ols_fit

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SparseLinearModel(TrainedModel):
    kind: ClassVar[ModelKind] = ModelKind.SPARSE_LINEAR

    lam: float
    intercept: float
    feature_names: List[str]
    center: np.ndarray
    scale: np.ndarray
    standardized: np.ndarray
    post_lasso: Optional[LinearModel] = None
    sweeps: int = 0
    objective_trace: List[float] = field(default_factory=list)

    @property
    def columns(self) -> List[str]:
        return list(self.feature_names)

    @property
    def beta(self) -> np.ndarray:
        """Coefficients on the original column scale."""
        out = np.zeros_like(self.standardized)
        usable = self.scale > 0
        out[usable] = self.standardized[usable] / self.scale[usable]
        return out

    @property
    def coefficients(self) -> Dict[str, float]:
        """Nonzero coefficients on the original scale."""
        return {
            name: float(b) for name, b in zip(self.feature_names, self.beta) if b != 0.0
        }

    @property
    def support(self) -> List[str]:
        return [name for name, b in zip(self.feature_names, self.standardized) if b != 0.0]

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        return self.intercept + A @ self.beta


def standardize(A: np.ndarray):
    """Column means and population standard deviations; constant columns get scale 0."""
    center = A.mean(axis=0) if A.shape[0] else np.zeros(A.shape[1])
    scale = A.std(axis=0) if A.shape[0] else np.zeros(A.shape[1])
    scale = np.where(scale > 1e-12 * np.maximum(1.0, np.abs(center)), scale, 0.0)
    Z = np.zeros_like(A, dtype=float)
    usable = scale > 0
    Z[:, usable] = (A[:, usable] - center[usable]) / scale[usable]
    return np.asfortranarray(Z), center, scale


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def objective(Z: np.ndarray, yc: np.ndarray, b: np.ndarray, lam: float) -> float:
    r = yc - Z @ b
    return float(r @ r + lam * np.abs(b).sum())


def _descend(
    Z: np.ndarray,
    yc: np.ndarray,
    lam: float,
    b: np.ndarray,
    usable: np.ndarray,
    tol: float,
    max_sweeps: int,
):
    n = Z.shape[0]
    sq = (Z * Z).sum(axis=0)
    r = yc - Z @ b
    half = lam / 2.0
    trace = [float(r @ r + lam * np.abs(b).sum())]
    sweeps = 0
    full = np.flatnonzero(usable)

    def sweep(indices) -> float:
        nonlocal r
        biggest = 0.0
        for j in indices:
            old = b[j]
            rho = Z[:, j] @ r + sq[j] * old
            new = soft_threshold(rho, half) / sq[j]
            if new != old:
                r -= Z[:, j] * (new - old)
                b[j] = new
                biggest = max(biggest, abs(new - old))
        return biggest

    while True:
        change = sweep(full)
        sweeps += 1
        trace.append(float(r @ r + lam * np.abs(b).sum()))
        if change < tol:
            break
        active = np.flatnonzero(b != 0.0)
        while sweeps < max_sweeps:
            change = sweep(active)
            sweeps += 1
            trace.append(float(r @ r + lam * np.abs(b).sum()))
            if change < tol:
                break
        if change >= tol and sweeps >= max_sweeps:
            raise ConvergenceError(
                f"LASSO did not converge in {max_sweeps} sweeps",
                {"lambda": lam, "sweeps": sweeps, "last_change": change, "n": n},
            )
    return b, sweeps, trace


def lasso_fit(
    X: DesignLike,
    y: TargetLike,
    lam: float,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
    warm_start: Optional[np.ndarray] = None,
) -> SparseLinearModel:
    """Minimize the penalized objective; the intercept is never penalized."""
    if lam < 0 or not np.isfinite(lam):
        raise ConfigError(f"lambda must be a finite non-negative number, got {lam}")
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    Z, center, scale = standardize(A)
    return _fit_standardized(
        Z, center, scale, target, names, lam,
        tol if tol is not None else settings.lasso_tolerance,
        max_sweeps if max_sweeps is not None else settings.lasso_max_sweeps,
        warm_start,
    )


def _fit_standardized(Z, center, scale, target, names, lam, tol, max_sweeps, warm_start):
    y_mean = float(target.mean())
    usable = scale > 0
    b = np.zeros(Z.shape[1]) if warm_start is None else np.array(warm_start, dtype=float)
    b[~usable] = 0.0
    b, sweeps, trace = _descend(Z, target - y_mean, lam, b, usable, tol, max_sweeps)
    logger.debug("LASSO lambda=%g: %d sweeps, support %d", lam, sweeps, int(np.count_nonzero(b)))
    beta = np.zeros_like(b)
    beta[usable] = b[usable] / scale[usable]
    return SparseLinearModel(
        lam=float(lam),
        intercept=y_mean - float(center @ beta),
        feature_names=list(names),
        center=center,
        scale=scale,
        standardized=b,
        sweeps=sweeps,
        objective_trace=trace,
    )


def lasso_path(
    X: DesignLike,
    y: TargetLike,
    lambdas: Sequence[float],
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
) -> List[SparseLinearModel]:
    """Fits along ``lambdas`` from largest to smallest, each warm-started from the last.

    Models are returned in the order of ``lambdas``.
    """
    if any(lam < 0 for lam in lambdas):
        raise ConfigError("lambda grid contains a negative value")
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    Z, center, scale = standardize(A)
    tol = tol if tol is not None else settings.lasso_tolerance
    max_sweeps = max_sweeps if max_sweeps is not None else settings.lasso_max_sweeps
    order = sorted(range(len(lambdas)), key=lambda i: -lambdas[i])
    fitted: Dict[int, SparseLinearModel] = {}
    warm = None
    for i in order:
        model = _fit_standardized(Z, center, scale, target, names, float(lambdas[i]), tol, max_sweeps, warm)
        warm = model.standardized
        fitted[i] = model
    return [fitted[i] for i in range(len(lambdas))]


def lambda_max(X: DesignLike, y: TargetLike) -> float:
    """Smallest lambda at which every coefficient is zero."""
    A, _ = as_design(X)
    target = as_target(y)
    Z, _, _ = standardize(A)
    if Z.shape[1] == 0:
        return 0.0
    return float(2.0 * np.abs(Z.T @ (target - target.mean())).max())


def post_lasso_ols(m: SparseLinearModel, X: DesignLike, y: TargetLike) -> LinearModel:
    """OLS on the LASSO support; stored on ``m.post_lasso``."""
    A, names = as_design(X)
    index = {name: j for j, name in enumerate(names)}
    support = m.support
    restricted = A[:, [index[c] for c in support]] if support else np.zeros((A.shape[0], 0))
    fitted = ols_fit(restricted, y)
    m.post_lasso = LinearModel(
        intercept=fitted.intercept,
        coefficients={c: fitted.coefficients[f"x{j + 1}"] for j, c in enumerate(support)},
        feature_names=list(support),
        dropped=[support[int(d[1:]) - 1] for d in fitted.dropped],
    )
    return m.post_lasso
