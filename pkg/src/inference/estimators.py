#!/usr/bin/env python3
"""
Variance estimation and confidence intervals for the weighted AUC

Replicate AUCs are computed with the full-sample fitted probabilities; the
model is not refitted per replicate. Variance reductions use exactly rounded
summation (math.fsum), so results do not depend on replicate order.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from errors import (
    ConfigError,
    DegenerateReplicatesError,
    InsufficientReplicatesError,
    MissingReplicateError,
    SurveyDataError,
)
from inference.normal import critical_value
from replicates import ReplicateWeightSet, ResampleRng, Scheme, replicate_weights
from survey_frame import SurveyFrame
from wauc import AucInput, TieGroups, auc_rows, weighted_auc

logger = logging.getLogger(__name__)

DEGENERATE_LIMIT = 0.01


class Construction(str, Enum):
    NORMAL = "normal"
    PERCENTILE = "percentile"


class Reference(str, Enum):
    """Distribution the Wald-type interval and test statistics are referred to"""
    T = "t"
    Z = "z"


@dataclass(frozen=True)
class AucEstimate:
    """Point estimate, replicate AUCs (NaN = degenerate) and variance for one method"""
    point: float
    method: Scheme
    variance: float
    replicate_aucs: np.ndarray
    n_used_replicates: int
    n_degenerate: int = 0
    df: Optional[int] = None

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "method": self.method.value,
            "variance": self.variance,
            "se": self.se,
            "replicates": int(self.replicate_aucs.shape[0]),
            "used_replicates": self.n_used_replicates,
            "degenerate_replicates": self.n_degenerate,
            "df": self.df,
        }


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    construction: Construction

    @property
    def outside_unit_interval(self) -> bool:
        """Flag for unclipped intervals reaching below 0 or above 1"""
        return self.lower < 0.0 or self.upper > 1.0

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "construction": self.construction.value,
            "outside_unit_interval": self.outside_unit_interval,
        }


def evaluate_replicates(probs: np.ndarray, outcomes: np.ndarray, replicates: ReplicateWeightSet,
                        n_jobs: int = 1) -> np.ndarray:
    """
    Weighted AUC of fixed scores under every replicate weight vector

    Returns:
        (R,) array; NaN marks a replicate with no positive-weight case or control
    """
    groups = TieGroups(probs, outcomes)
    if n_jobs == 1 or replicates.count < 2:
        return auc_rows(groups, replicates.weights)
    chunks = np.array_split(replicates.weights, min(replicates.count, 4 * abs(n_jobs)))
    parts = Parallel(n_jobs=n_jobs)(delayed(auc_rows)(groups, chunk) for chunk in chunks if chunk.size)
    return np.concatenate(parts)


def count_degenerate(values: np.ndarray, scheme: Scheme, limit: float = DEGENERATE_LIMIT) -> int:
    """
    Apply the degenerate-replicate policy

    JKn replicates may never be missing; bootstrap replicates may be, up to `limit`.
    """
    missing = np.flatnonzero(np.isnan(values))
    if missing.size == 0:
        return 0
    if scheme is Scheme.JKN:
        raise MissingReplicateError(missing.tolist())
    if missing.size > limit * values.shape[0]:
        raise DegenerateReplicatesError(int(missing.size), int(values.shape[0]), limit)
    logger.warning("%d of %d %s replicates degenerate; excluded", missing.size, values.shape[0], scheme.value)
    return int(missing.size)


def variance_jkn(point: float, replicates: ReplicateWeightSet, replicate_aucs: np.ndarray) -> float:
    """
    Jackknife variance: sum over replicates of (a_h - 1)/a_h * (AUC_rep - AUC)^2

    Args:
        point: Full-sample estimate
        replicates: JKn replicate set (provides the per-replicate stratum factor)
        replicate_aucs: One value per replicate, in replicate order
    """
    if replicates.scheme is not Scheme.JKN or replicates.jkn_factors is None:
        raise ConfigError("jackknife variance needs a JKn replicate set")
    values = np.asarray(replicate_aucs, dtype=np.float64)
    if values.shape[0] != replicates.count:
        raise SurveyDataError(f"{values.shape[0]} replicate values for {replicates.count} replicates")
    missing = np.flatnonzero(np.isnan(values))
    if missing.size:
        raise MissingReplicateError(missing.tolist())
    return math.fsum((replicates.jkn_factors * (values - point) ** 2).tolist())


def variance_boot(replicate_aucs: np.ndarray) -> float:
    """Bootstrap variance with divisor B - 1 over the non-missing replicates"""
    values = np.asarray(replicate_aucs, dtype=np.float64)
    values = values[~np.isnan(values)]
    if values.shape[0] < 2:
        raise InsufficientReplicatesError(int(values.shape[0]))
    mean = math.fsum(values.tolist()) / values.shape[0]
    return math.fsum(((values - mean) ** 2).tolist()) / (values.shape[0] - 1)


def ci_normal(point: float, variance: float, alpha: float, df: Optional[int] = None) -> ConfidenceInterval:
    """
    point -/+ c * sqrt(variance); not clipped to [0, 1]

    c is z_{alpha/2}, or the t quantile with `df` degrees of freedom when df is given.
    """
    if variance < 0 or not math.isfinite(variance):
        raise SurveyDataError(f"variance must be finite and nonnegative, got {variance}")
    half_width = critical_value(alpha, df) * math.sqrt(variance)
    interval = ConfidenceInterval(point - half_width, point + half_width, 1.0 - alpha, Construction.NORMAL)
    if interval.outside_unit_interval:
        logger.warning("%.0f%% interval (%.4f, %.4f) extends outside [0, 1]",
                       100 * interval.level, interval.lower, interval.upper)
    return interval


def ci_percentile(replicate_aucs: np.ndarray, alpha: float,
                  method: Union[Scheme, str, ReplicateWeightSet]) -> ConfidenceInterval:
    """
    Percentile interval from the replicate distribution

    Quantiles use linear interpolation between order statistics at position
    (B - 1) * q + 1. Only defined for bootstrap replicates; `method` names the
    scheme the values came from (or is the replicate set itself).
    """
    scheme = method.scheme if isinstance(method, ReplicateWeightSet) else Scheme(method)
    if scheme is Scheme.JKN:
        raise ConfigError("percentile intervals are defined for bootstrap methods only, not jkn")
    if not 0.0 < alpha < 1.0:
        raise SurveyDataError(f"alpha must lie in (0, 1), got {alpha}")
    values = np.asarray(replicate_aucs, dtype=np.float64)
    values = values[~np.isnan(values)]
    if values.shape[0] < 2:
        raise InsufficientReplicatesError(int(values.shape[0]))
    lower, upper = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0], method="linear")
    return ConfidenceInterval(float(lower), float(upper), 1.0 - alpha, Construction.PERCENTILE)


def confidence_interval(estimate: AucEstimate, alpha: float,
                        construction: Union[Construction, str] = Construction.NORMAL,
                        reference: Union[Reference, str] = Reference.T) -> ConfidenceInterval:
    """
    Interval for one estimate

    Normal-type intervals use the t reference with the estimate's design
    degrees of freedom unless `reference` is z.
    """
    if Construction(construction) is Construction.NORMAL:
        df = estimate.df if Reference(reference) is Reference.T else None
        return ci_normal(estimate.point, estimate.variance, alpha, df)
    return ci_percentile(estimate.replicate_aucs, alpha, estimate.method)


def estimate_from_replicates(point: float, replicates: ReplicateWeightSet,
                             values: np.ndarray) -> AucEstimate:
    """Variance and bookkeeping for already-evaluated replicate values"""
    degenerate = count_degenerate(values, replicates.scheme)
    if replicates.scheme is Scheme.JKN:
        variance = variance_jkn(point, replicates, values)
    else:
        variance = variance_boot(values)
    return AucEstimate(point=point, method=replicates.scheme, variance=variance, replicate_aucs=values,
                       n_used_replicates=int(values.shape[0]) - degenerate, n_degenerate=degenerate,
                       df=replicates.df)


def estimate_auc(frame: SurveyFrame, probs: np.ndarray, method: Union[Scheme, str],
                 B: int, rng: Optional[ResampleRng] = None, n_jobs: int = 1) -> AucEstimate:
    """
    Weighted AUC with its replicate-based variance

    Args:
        frame: Survey sample
        probs: Fitted probabilities (or any scores) in frame order
        method: jkn, rb, rbn or trb
        B: Bootstrap replicate count (ignored for jkn)
        rng: Resample seed/stream (required for bootstrap methods)
        n_jobs: joblib workers for replicate generation and evaluation
    """
    method = Scheme(method)
    if method.is_bootstrap and rng is None:
        raise ConfigError(f"{method.value} needs a seeded ResampleRng")
    point = weighted_auc(AucInput(probs, frame.weights, frame.outcomes))
    replicates = replicate_weights(frame, method, B, rng, n_jobs=n_jobs)
    values = evaluate_replicates(probs, frame.outcomes, replicates, n_jobs=n_jobs)
    estimate = estimate_from_replicates(point, replicates, values)
    logger.info("%s: AUC=%.4f se=%.4g (%d replicates)", method.value, point, estimate.se, replicates.count)
    return estimate


def estimate_all_methods(frame: SurveyFrame, probs: np.ndarray, methods: Sequence[str],
                         B: int, rng: ResampleRng, n_jobs: int = 1) -> dict:
    """One AucEstimate per method; each bootstrap method draws from its own stream"""
    return {
        Scheme(m): estimate_auc(frame, probs, m, B, ResampleRng(rng.seed, rng.stream + i), n_jobs=n_jobs)
        for i, m in enumerate(methods)
    }
