"""Epsilon-insensitive support vector regression with a Gaussian kernel.

The dual is solved over 2n variables (one pair per training row) by
sequential minimal optimization with second-order working-set selection:

    min 1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C

where ``s_t = +1`` for the first n variables and ``-1`` for the second n,
``Q_tu = s_t s_u K(x_t, x_u)``, ``p_t = eps - y_t`` and ``p_{t+n} = eps + y_t``.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import ClassVar, List, Optional

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

logger = logging.getLogger(__name__)

TAU = 1e-12
DENSE_KERNEL_LIMIT = 2000
PREDICT_BLOCK = 2048


@dataclass(frozen=True)
class SvrHyperParams:
    C: float
    gamma: float
    epsilon: float
    kernel: str = "gaussian"

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError(f"SVR C must be positive, got {self.C}")
        if not self.gamma > 0:
            raise ConfigError(f"SVR gamma must be positive, got {self.gamma}")
        if self.epsilon < 0:
            raise ConfigError(f"SVR epsilon must be non-negative, got {self.epsilon}")
        if self.kernel != "gaussian":
            raise ConfigError(f"unsupported kernel {self.kernel!r}; only gaussian is available")


def gaussian_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True, eq=False)
class KernelModel(TrainedModel):
    kind: ClassVar[ModelKind] = ModelKind.KERNEL

    hyperparams: SvrHyperParams
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    feature_names: List[str]
    iterations: int = 0

    @property
    def columns(self) -> List[str]:
        return list(self.feature_names)

    @property
    def n_support(self) -> int:
        return int(self.dual_coef.size)

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        out = np.full(A.shape[0], self.bias)
        if self.dual_coef.size == 0:
            return out
        for lo in range(0, A.shape[0], PREDICT_BLOCK):
            block = A[lo : lo + PREDICT_BLOCK]
            out[lo : lo + block.shape[0]] += (
                gaussian_kernel(block, self.support_vectors, self.hyperparams.gamma) @ self.dual_coef
            )
        return out


class _KernelRows:
    """Kernel rows of the training set: precomputed when small, cached otherwise."""

    def __init__(self, A: np.ndarray, gamma: float, cache_rows: int = 1024):
        self.A = A
        self.gamma = gamma
        self.norms = (A * A).sum(axis=1)
        self.dense = gaussian_kernel(A, A, gamma) if A.shape[0] <= DENSE_KERNEL_LIMIT else None
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()
        self._cache_rows = cache_rows

    def row(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[i]
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        sq = self.norms[i] + self.norms - 2.0 * self.A @ self.A[i]
        row = np.exp(-self.gamma * np.maximum(sq, 0.0))
        self._cache[i] = row
        if len(self._cache) > self._cache_rows:
            self._cache.popitem(last=False)
        return row


def _solve(K: _KernelRows, y: np.ndarray, hp: SvrHyperParams, tol: float, max_iter: int):
    n = y.size
    C = hp.C
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    alpha = np.zeros(2 * n)
    grad = np.concatenate([hp.epsilon - y, hp.epsilon + y])
    diag = np.ones(2 * n)  # K(x, x) = 1 for the Gaussian kernel

    def q_row(t: int) -> np.ndarray:
        k = K.row(t % n)
        return sign[t] * sign * np.concatenate([k, k])

    iterations = 0
    while True:
        up = ((sign > 0) & (alpha < C)) | ((sign < 0) & (alpha > 0))
        low = ((sign > 0) & (alpha > 0)) | ((sign < 0) & (alpha < C))
        if not up.any() or not low.any():
            break
        score = -sign * grad
        up_score = np.where(up, score, -np.inf)
        i = int(np.argmax(up_score))
        g_max = up_score[i]
        g_min = np.max(np.where(low, -score, -np.inf))
        if g_max + g_min < tol:
            break
        if iterations >= max_iter:
            raise ConvergenceError(
                f"SVR solver did not reach KKT tolerance in {max_iter} iterations",
                {"violation": float(g_max + g_min), "tolerance": tol, "n": n},
            )
        Qi = q_row(i)
        # second-order choice of j among violating partners
        b = g_max + sign * grad
        quad = diag[i] + diag - 2.0 * sign[i] * Qi * sign
        quad = np.where(quad > 0, quad, TAU)
        gain = np.where(low & (b > 0), -(b * b) / quad, np.inf)
        j = int(np.argmin(gain))
        if not np.isfinite(gain[j]):
            break
        Qj = q_row(j)
        old_i, old_j = alpha[i], alpha[j]
        if sign[i] != sign[j]:
            quad_ij = max(diag[i] + diag[j] + 2.0 * Qi[j], TAU)
            delta = (-grad[i] - grad[j]) / quad_ij
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad_ij = max(diag[i] + diag[j] - 2.0 * Qi[j], TAU)
            delta = (grad[i] - grad[j]) / quad_ij
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total
        grad += Qi * (alpha[i] - old_i) + Qj * (alpha[j] - old_j)
        iterations += 1

    return alpha, grad, sign, iterations


def _rho(alpha: np.ndarray, grad: np.ndarray, sign: np.ndarray, C: float) -> float:
    yg = sign * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
    lb_mask = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def svr_fit(
    X: DesignLike,
    y: TargetLike,
    hp: SvrHyperParams,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    max_rows: Optional[int] = None,
    seed: int = 0,
) -> KernelModel:
    """Fit the dual to KKT tolerance; rows beyond ``max_rows`` are subsampled with ``seed``."""
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    if max_rows is not None and A.shape[0] > max_rows:
        keep = np.sort(np.random.default_rng(seed).choice(A.shape[0], size=max_rows, replace=False))
        logger.info("SVR training on %d of %d rows", max_rows, A.shape[0])
        A, target = A[keep], target[keep]
    n = A.shape[0]
    if np.ptp(target) == 0.0:
        return KernelModel(
            hyperparams=hp,
            support_vectors=np.zeros((0, A.shape[1])),
            dual_coef=np.zeros(0),
            bias=float(target[0]),
            feature_names=list(names),
        )
    tol = tol if tol is not None else settings.svr_tolerance
    max_iter = max_iter if max_iter is not None else max(100_000, 100 * n)
    alpha, grad, sign, iterations = _solve(_KernelRows(A, hp.gamma), target, hp, tol, max_iter)
    rho = _rho(alpha, grad, sign, hp.C)
    coef = alpha[:n] - alpha[n:]
    support = np.flatnonzero(coef != 0.0)
    logger.debug("SVR fit: %d iterations, %d support vectors", iterations, support.size)
    return KernelModel(
        hyperparams=hp,
        support_vectors=A[support].copy(),
        dual_coef=coef[support].copy(),
        bias=-rho,
        feature_names=list(names),
        iterations=iterations,
    )
