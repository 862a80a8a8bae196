#!/usr/bin/env python3
"""
Weighted logistic regression by pseudo-likelihood maximization

Each unit's likelihood contribution is raised to the power of its sampling
weight; the maximizer is found by Newton-Raphson (IRLS) with step halving.
With unit weights this is the ordinary maximum-likelihood fit.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import expit

from errors import (
    ConvergenceError,
    DimensionMismatchError,
    NonPositiveDefiniteError,
    RankDeficiencyError,
    SeparationError,
    SurveyDataError,
)
from survey_frame import SurveyFrame

logger = logging.getLogger(__name__)

SCORE_TOL = 1e-8        # relative to total weight
BETA_TOL = 1e-10        # relative change in beta
MAX_ITER = 100
DIVERGENCE_BOUND = 30.0
RANK_TOL = 1e-10
MAX_HALVINGS = 40

_P_LOW = np.finfo(np.float64).tiny
_P_HIGH = 1.0 - np.finfo(np.float64).epsneg


@dataclass(frozen=True)
class FittedModel:
    """Result of a pseudo-likelihood fit"""
    beta: np.ndarray            # intercept first
    probs: np.ndarray           # fitted P(Y=1) per unit, in frame order
    converged: bool
    iterations: int
    max_abs_score: float
    covariates: tuple = ()      # covariate names, in beta order after the intercept

    def to_dict(self) -> dict:
        return {
            "beta": {name: float(b) for name, b in zip(("(Intercept)",) + tuple(self.covariates), self.beta)},
            "converged": self.converged,
            "iterations": self.iterations,
            "max_abs_score": self.max_abs_score,
        }


def inverse_logit(eta: np.ndarray) -> np.ndarray:
    """Logistic function; never returns exactly 0 or 1"""
    return np.clip(expit(eta), _P_LOW, _P_HIGH)


def log_pseudo_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """sum_i w_i [y_i * eta_i - log(1 + exp(eta_i))]"""
    eta = X @ beta
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def weighted_score(beta: np.ndarray, X: np.ndarray, y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient of the log pseudo-likelihood: sum_i w_i (y_i - p_i) x_i"""
    return X.T @ (w * (y - expit(X @ beta)))


def _check_rank(X: np.ndarray, w: np.ndarray) -> None:
    # Pivoted QR of the weighted design; |R_kk| / |R_00| below tolerance means collinear
    _, R, _ = linalg.qr(np.sqrt(w)[:, None] * X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        raise RankDeficiencyError(0, X.shape[1])
    rank = int(np.sum(diag > RANK_TOL * diag[0]))
    if rank < X.shape[1]:
        raise RankDeficiencyError(rank, X.shape[1])


def newton_step(info: np.ndarray, score: np.ndarray) -> np.ndarray:
    """Solve info @ step = score by Cholesky"""
    try:
        return linalg.solve(info, score, assume_a="pos")
    except linalg.LinAlgError as e:
        raise NonPositiveDefiniteError(f"Fisher information is not positive definite: {e}") from e


def fit_arrays(X: np.ndarray, y: np.ndarray, w: np.ndarray,
               max_iter: int = MAX_ITER) -> tuple:
    """
    Maximize the log pseudo-likelihood for a design matrix

    Args:
        X: (n, p) design matrix including the intercept column
        y: Binary outcomes
        w: Nonnegative weights

    Returns:
        (beta, iterations, max_abs_score)
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    total_weight = float(np.sum(w))
    if not np.any((y == 1) & (w > 0)) or not np.any((y == 0) & (w > 0)):
        raise SurveyDataError("pseudo-likelihood fit needs at least one event and one non-event")
    _check_rank(X, w)

    score_tol = SCORE_TOL * total_weight
    beta = np.zeros(X.shape[1])
    ll = log_pseudo_likelihood(beta, X, y, w)
    score = weighted_score(beta, X, y, w)

    for iteration in range(1, max_iter + 1):
        p = expit(X @ beta)
        info = X.T @ ((w * p * (1.0 - p))[:, None] * X)
        step = newton_step(info, score)

        # Step halving on decrease of the objective
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = beta + scale * step
            ll_new = log_pseudo_likelihood(candidate, X, y, w)
            if ll_new >= ll - 1e-14 * max(1.0, abs(ll)):
                break
            scale *= 0.5

        change = np.max(np.abs(candidate - beta)) / max(1.0, np.max(np.abs(beta)))
        beta, ll = candidate, ll_new
        score = weighted_score(beta, X, y, w)
        max_abs_score = float(np.max(np.abs(score)))
        logger.debug("iteration %d: logPL=%.12g max|score|=%.3g change=%.3g", iteration, ll, max_abs_score, change)

        if np.max(np.abs(beta)) > DIVERGENCE_BOUND:
            raise SeparationError(beta, DIVERGENCE_BOUND)
        if max_abs_score <= score_tol and change <= BETA_TOL:
            return beta, iteration, max_abs_score

    raise ConvergenceError(max_iter, beta, float(np.max(np.abs(score))))


def fit_pseudo_likelihood(frame: SurveyFrame, covariate_subset: Optional[Sequence[object]] = None,
                          weights: Optional[np.ndarray] = None) -> FittedModel:
    """
    Fit a logistic model by maximizing the design pseudo-likelihood

    Args:
        frame: Survey sample
        covariate_subset: Covariate names or indices (None = all covariates)
        weights: Override for the frame's base weights (all ones for a census fit)

    Returns:
        FittedModel with coefficients and per-unit fitted probabilities
    """
    columns = frame.covariate_columns(covariate_subset)
    X = frame.design_matrix(columns)
    w = frame.weights if weights is None else np.asarray(weights, dtype=np.float64)

    beta, iterations, max_abs_score = fit_arrays(X, frame.outcomes, w)
    names = tuple(frame.covariate_names[j] for j in columns)
    logger.info("fit %s: %d iterations, max|score|=%.3g", ",".join(names) or "intercept", iterations, max_abs_score)
    beta.setflags(write=False)
    probs = inverse_logit(X @ beta)
    probs.setflags(write=False)
    return FittedModel(beta=beta, probs=probs, converged=True, iterations=iterations,
                       max_abs_score=max_abs_score, covariates=names)


def predict(model: FittedModel, frame: SurveyFrame) -> np.ndarray:
    """
    Fitted probabilities for every unit in a frame

    Columns are matched by the model's covariate names.
    """
    if len(model.covariates) != model.beta.shape[0] - 1:
        raise DimensionMismatchError(
            f"model has {model.beta.shape[0] - 1} slopes but {len(model.covariates)} covariate names")
    missing = [c for c in model.covariates if c not in frame.covariate_names]
    if missing:
        raise DimensionMismatchError(f"frame lacks model covariates: {', '.join(missing)}")
    X = frame.design_matrix(list(model.covariates))
    return inverse_logit(X @ model.beta)
