"""Fractional-outcome probit fitted by damped Fisher scoring.

Maximizes the Bernoulli quasi-log-likelihood
``sum(y * log Phi(eta) + (1 - y) * log Phi(-eta))`` with ``eta = a + X b``.
Outcomes of exactly 0 or 1 simply drop one of the two terms.
"""

import logging
from dataclasses import dataclass
from typing import ClassVar, List, Optional

import numpy as np
from scipy import linalg, special

from spellforge.config import settings
from spellforge.errors import ConvergenceError, DataError
from spellforge.learners.base import (
    DesignLike,
    ModelKind,
    TargetLike,
    TrainedModel,
    as_design,
    as_target,
    check_rows,
)
from spellforge.learners.linear import LinearModel

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30
GRADIENT_TOL = 1e-8
PROB_FLOOR = 1e-15


@dataclass(frozen=True, eq=False)
class ProbitModel(TrainedModel):
    kind: ClassVar[ModelKind] = ModelKind.PROBIT

    index: LinearModel
    iterations: int = 0
    log_likelihood: float = 0.0

    @property
    def columns(self) -> List[str]:
        return self.index.columns

    @property
    def intercept(self) -> float:
        return self.index.intercept

    @property
    def coefficients(self):
        return self.index.coefficients

    def predict_array(self, A: np.ndarray) -> np.ndarray:
        return np.clip(special.ndtr(self.index.predict_array(A)), PROB_FLOOR, 1.0 - PROB_FLOOR)


def quasi_log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    up = special.log_ndtr(eta)
    down = special.log_ndtr(-eta)
    return float(np.sum(np.where(y > 0, y * up, 0.0) + np.where(y < 1, (1.0 - y) * down, 0.0)))


def _score_terms(eta: np.ndarray, y: np.ndarray):
    log_pdf = -0.5 * eta * eta - 0.5 * np.log(2.0 * np.pi)
    lam1 = np.exp(log_pdf - special.log_ndtr(eta))
    lam0 = np.exp(log_pdf - special.log_ndtr(-eta))
    score = y * lam1 - (1.0 - y) * lam0
    weight = lam1 * lam0
    return score, weight


def fractional_probit_fit(
    X: DesignLike,
    y: TargetLike,
    max_iter: Optional[int] = None,
    tol: float = GRADIENT_TOL,
) -> ProbitModel:
    A, names = as_design(X)
    target = as_target(y)
    check_rows(A, target)
    if target.min() < 0.0 or target.max() > 1.0:
        raise DataError("fractional probit outcome must lie in [0, 1]")
    max_iter = max_iter if max_iter is not None else settings.probit_max_iter
    n, k = A.shape
    D = np.column_stack([np.ones(n), A])
    theta = np.zeros(k + 1)
    theta[0] = special.ndtri(np.clip(target.mean(), 1e-6, 1.0 - 1e-6))
    eta = D @ theta
    ll = quasi_log_likelihood(eta, target)

    for iteration in range(1, max_iter + 1):
        score, weight = _score_terms(eta, target)
        gradient = D.T @ score
        if np.abs(gradient).max() <= tol * max(1.0, n):
            return _model(theta, names, iteration - 1, ll)
        sw = np.sqrt(weight)
        step = linalg.lstsq(D * sw[:, None], score / np.where(sw > 0, sw, 1.0), lapack_driver="gelsy")[0]
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = theta + scale * step
            cand_eta = D @ candidate
            cand_ll = quasi_log_likelihood(cand_eta, target)
            if np.isfinite(cand_ll) and cand_ll >= ll - 1e-12 * abs(ll):
                break
            scale /= 2.0
        else:
            raise ConvergenceError(
                "probit step halving failed to improve the quasi-likelihood",
                {"iteration": iteration, "log_likelihood": ll, "gradient_max": float(np.abs(gradient).max())},
            )
        improvement = cand_ll - ll
        theta, eta, ll = candidate, cand_eta, cand_ll
        if np.abs(scale * step).max() < 1e-10 and abs(improvement) < 1e-12 * max(1.0, abs(ll)):
            return _model(theta, names, iteration, ll)

    score, _ = _score_terms(eta, target)
    raise ConvergenceError(
        f"probit did not converge in {max_iter} iterations",
        {"log_likelihood": ll, "gradient_max": float(np.abs(D.T @ score).max()), "n": n, "k": k},
    )


def _model(theta: np.ndarray, names: List[str], iterations: int, ll: float) -> ProbitModel:
    logger.debug("probit converged after %d iterations, log-likelihood %.6f", iterations, ll)
    return ProbitModel(
        index=LinearModel(
            intercept=float(theta[0]),
            coefficients={name: float(b) for name, b in zip(names, theta[1:])},
            feature_names=list(names),
        ),
        iterations=iterations,
        log_likelihood=ll,
    )
