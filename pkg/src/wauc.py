#!/usr/bin/env python3
"""
Weighted AUC

The weighted AUC is the weight-product-weighted share of (control, case) pairs
in which the case scores higher, ties counting one half. The fast path sorts
the scores once, pools exact ties into groups and walks the groups with a
compensated running sum of control weight; it evaluates many weight vectors
(replicates) against the same scores in one pass.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import DegenerateAucError, DimensionMismatchError, InvalidOutcomeError
from survey_frame import SurveyFrame
from wlogit import FittedModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AucInput:
    """Scores, weights and outcomes of equal length"""
    probs: np.ndarray
    weights: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        outcomes = np.asarray(self.outcomes)
        if not (probs.ndim == weights.ndim == outcomes.ndim == 1) or not (
                probs.shape == weights.shape == outcomes.shape):
            raise DimensionMismatchError("probs, weights and outcomes must be vectors of equal length")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DimensionMismatchError("weights must be finite and nonnegative")
        if outcomes.dtype != bool:
            invalid = np.flatnonzero(~np.isin(outcomes, (0, 1)))
            if invalid.size:
                raise InvalidOutcomeError(int(invalid[0]) + 1, outcomes[invalid[0]].item())
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "outcomes", outcomes.astype(bool))


class TieGroups:
    """
    Scores sorted once and pooled into groups of exactly equal value

    Reused across every weight vector evaluated against the same scores.
    """

    def __init__(self, scores: np.ndarray, outcomes: np.ndarray):
        scores = np.asarray(scores, dtype=np.float64)
        self.order = np.argsort(scores, kind="stable")
        sorted_scores = scores[self.order]
        # Group starts: first position plus every position whose score differs from its predecessor
        self.starts = np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
        self.case = np.asarray(outcomes, dtype=bool)[self.order]

    @property
    def n_groups(self) -> int:
        return int(self.starts.shape[0])

    def group_weights(self, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Per-group control and case weight; weights is (n,) or (R, n)"""
        w = np.atleast_2d(weights)[:, self.order]
        control = np.add.reduceat(np.where(self.case, 0.0, w), self.starts, axis=1)
        case = np.add.reduceat(np.where(self.case, w, 0.0), self.starts, axis=1)
        return control, case


def _kahan_exclusive_cumsum(values: np.ndarray) -> np.ndarray:
    """Compensated running sum along axis 1, excluding the current column"""
    rows, cols = values.shape
    if rows == 1:
        # Plain floats are much faster than length-1 array ops
        running, total, comp = [], 0.0, 0.0
        for v in values[0].tolist():
            running.append(total)
            y = v - comp
            t = total + y
            comp = (t - total) - y
            total = t
        return np.array([running])

    out = np.empty_like(values)
    total = np.zeros(rows)
    comp = np.zeros(rows)
    for k in range(cols):
        out[:, k] = total
        y = values[:, k] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return out


def auc_rows(groups: TieGroups, weights: np.ndarray) -> np.ndarray:
    """
    Weighted AUC for each row of a weight matrix

    Args:
        groups: Tie groups built from the scores and outcomes
        weights: (R, n) or (n,) nonnegative weights in original unit order

    Returns:
        (R,) AUC values; NaN where a row has no positive-weight case or control
    """
    control, case = groups.group_weights(weights)
    below = _kahan_exclusive_cumsum(control)
    numerator = np.sum(case * (below + 0.5 * control), axis=1)
    denominator = np.sum(control, axis=1) * np.sum(case, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        auc = np.where(denominator > 0, numerator / denominator, np.nan)
    # Guard rounding at the ends of [0, 1]
    return np.clip(auc, 0.0, 1.0)


def weighted_auc(data: AucInput) -> float:
    """
    Weighted AUC of one score vector

    Args:
        data: AucInput with scores, weights and outcomes

    Returns:
        AUC in [0, 1]

    Raises:
        DegenerateAucError if no positive-weight case or no positive-weight control exists
    """
    value = auc_rows(TieGroups(data.probs, data.outcomes), data.weights)[0]
    if np.isnan(value):
        raise DegenerateAucError()
    return float(value)


def weighted_auc_oracle(data: AucInput) -> float:
    """Direct double sum over all (control, case) pairs; O(n0 * n1)"""
    cases = data.outcomes & (data.weights > 0)
    controls = ~data.outcomes & (data.weights > 0)
    if not cases.any() or not controls.any():
        raise DegenerateAucError()
    p1, w1 = data.probs[cases], data.weights[cases]
    p0, w0 = data.probs[controls], data.weights[controls]
    pair_weight = np.outer(w0, w1)
    score = (p0[:, None] < p1[None, :]) + 0.5 * (p0[:, None] == p1[None, :])
    return float(np.sum(pair_weight * score) / np.sum(pair_weight))


def population_auc(frame: SurveyFrame, model: FittedModel) -> float:
    """AUC over a full population: every unit counts once"""
    if model.probs.shape[0] != frame.n:
        raise DimensionMismatchError(f"model has {model.probs.shape[0]} probabilities for {frame.n} units")
    return weighted_auc(AucInput(model.probs, np.ones(frame.n), frame.outcomes))
