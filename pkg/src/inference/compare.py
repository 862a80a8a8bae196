#!/usr/bin/env python3
"""
Wald tests comparing two weighted AUCs

Independent: AUCs from two independent samples, variances add.
Paired: two models scored on one sample; the variance of the difference is
taken over one shared replicate set so the common design effect cancels.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, DimensionMismatchError, InfiniteStatisticError
from inference.estimators import (
    AucEstimate,
    DEGENERATE_LIMIT,
    Reference,
    count_degenerate,
    estimate_auc,
    evaluate_replicates,
    variance_boot,
    variance_jkn,
)
from inference.normal import two_sided_p_value
from replicates import ReplicateWeightSet, ResampleRng, Scheme, replicate_weights
from survey_frame import SurveyFrame
from wauc import AucInput, weighted_auc
from wlogit import FittedModel, fit_pseudo_likelihood

logger = logging.getLogger(__name__)


class Pairing(str, Enum):
    INDEPENDENT = "independent"
    PAIRED = "paired"


@dataclass(frozen=True)
class TestResult:
    """Outcome of a two-sided Wald test of equal AUCs"""
    __test__ = False

    d_hat: float
    variance_d: float
    z: float
    p_value: float
    pairing: Pairing
    method: Scheme
    alpha: float
    point1: float
    point2: float
    n_used_replicates: Optional[int] = None
    n_degenerate: int = 0
    df: Optional[float] = None

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha

    @property
    def se(self) -> float:
        return math.sqrt(self.variance_d)

    def to_dict(self) -> dict:
        return {
            "auc1": self.point1,
            "auc2": self.point2,
            "d_hat": self.d_hat,
            "variance_d": self.variance_d,
            "se": self.se,
            "z": self.z,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "reject": self.reject,
            "pairing": self.pairing.value,
            "method": self.method.value,
            "used_replicates": self.n_used_replicates,
            "degenerate_replicates": self.n_degenerate,
            "df": self.df,
        }


def wald_statistic(d_hat: float, variance_d: float, df: Optional[float] = None) -> Tuple[float, float]:
    """
    Statistic and two-sided p-value; zero variance gives p = 1 when d_hat is 0

    The p-value refers the statistic to N(0, 1), or to t with `df` degrees of freedom.

    Raises:
        InfiniteStatisticError for zero variance with nonzero difference
    """
    if variance_d == 0.0:
        if d_hat == 0.0:
            return 0.0, 1.0
        raise InfiniteStatisticError(d_hat)
    z = d_hat / math.sqrt(variance_d)
    return z, two_sided_p_value(z, df)


def satterthwaite_df(variance1: float, df1: Optional[float], variance2: float,
                     df2: Optional[float]) -> Optional[float]:
    """Effective degrees of freedom of variance1 + variance2; None if either df is unknown"""
    if df1 is None or df2 is None:
        return None
    denominator = variance1 ** 2 / df1 + variance2 ** 2 / df2
    if denominator == 0.0:
        return float(min(df1, df2))
    return (variance1 + variance2) ** 2 / denominator


def test_independent(est1: AucEstimate, est2: AucEstimate, alpha: float = 0.05,
                     reference: Union[Reference, str] = Reference.T) -> TestResult:
    """
    Compare AUCs estimated on two independent samples with the same method

    z = (AUC1 - AUC2) / sqrt(var1 + var2), referred to t with Satterthwaite
    degrees of freedom unless `reference` is z.
    """
    if est1.method is not est2.method:
        raise ConfigError(f"method mismatch: {est1.method.value} vs {est2.method.value}")
    if not (math.isfinite(est1.variance) and math.isfinite(est2.variance)):
        raise ConfigError("both variances must be finite")
    d_hat = est1.point - est2.point
    variance_d = est1.variance + est2.variance
    df = None
    if Reference(reference) is Reference.T:
        df = satterthwaite_df(est1.variance, est1.df, est2.variance, est2.df)
    z, p = wald_statistic(d_hat, variance_d, df)
    return TestResult(d_hat=d_hat, variance_d=variance_d, z=z, p_value=p, pairing=Pairing.INDEPENDENT,
                      method=est1.method, alpha=alpha, point1=est1.point, point2=est2.point,
                      n_used_replicates=min(est1.n_used_replicates, est2.n_used_replicates),
                      n_degenerate=est1.n_degenerate + est2.n_degenerate, df=df)


test_independent.__test__ = False


def paired_from_replicates(point1: float, point2: float, replicates: ReplicateWeightSet,
                           aucs1: np.ndarray, aucs2: np.ndarray, alpha: float = 0.05,
                           reference: Union[Reference, str] = Reference.T) -> TestResult:
    """
    Paired Wald test from two models' AUCs evaluated on one shared replicate set

    A replicate degenerate for either model is dropped for both. The statistic
    is referred to t with the replicate set's degrees of freedom unless
    `reference` is z.
    """
    method = replicates.scheme
    d_hat = point1 - point2
    differences = np.asarray(aucs1, dtype=np.float64) - np.asarray(aucs2, dtype=np.float64)
    degenerate = count_degenerate(differences, method, DEGENERATE_LIMIT)

    if method is Scheme.JKN:
        variance_d = variance_jkn(d_hat, replicates, differences)
    else:
        variance_d = variance_boot(differences)
    df = replicates.df if Reference(reference) is Reference.T else None
    z, p = wald_statistic(d_hat, variance_d, df)
    logger.info("paired %s: D=%.4f se=%.4g z=%.3f p=%.4g", method.value, d_hat, math.sqrt(variance_d), z, p)
    return TestResult(d_hat=d_hat, variance_d=variance_d, z=z, p_value=p, pairing=Pairing.PAIRED,
                      method=method, alpha=alpha, point1=point1, point2=point2,
                      n_used_replicates=replicates.count - degenerate, n_degenerate=degenerate, df=df)


def test_paired(frame: SurveyFrame, model1: FittedModel, model2: FittedModel,
                method: Union[Scheme, str], B: int, rng: Optional[ResampleRng],
                alpha: float = 0.05, n_jobs: int = 1,
                reference: Union[Reference, str] = Reference.T) -> TestResult:
    """
    Compare two models' AUCs on the same sample

    One replicate set is generated and shared by both models so the common
    design effect cancels in the variance of the difference.
    """
    method = Scheme(method)
    for model in (model1, model2):
        if model.probs.shape[0] != frame.n:
            raise DimensionMismatchError(f"model has {model.probs.shape[0]} probabilities for {frame.n} units")
    if method.is_bootstrap and rng is None:
        raise ConfigError(f"{method.value} needs a seeded ResampleRng")

    point1 = weighted_auc(AucInput(model1.probs, frame.weights, frame.outcomes))
    point2 = weighted_auc(AucInput(model2.probs, frame.weights, frame.outcomes))
    replicates = replicate_weights(frame, method, B, rng, n_jobs=n_jobs)
    aucs1 = evaluate_replicates(model1.probs, frame.outcomes, replicates, n_jobs=n_jobs)
    aucs2 = evaluate_replicates(model2.probs, frame.outcomes, replicates, n_jobs=n_jobs)
    return paired_from_replicates(point1, point2, replicates, aucs1, aucs2, alpha, reference)


test_paired.__test__ = False


def compare_independent_frames(frame1: SurveyFrame, frame2: SurveyFrame,
                               covariates: Optional[Sequence[object]], method: Union[Scheme, str],
                               B: int, rng: ResampleRng, alpha: float = 0.05, n_jobs: int = 1,
                               reference: Union[Reference, str] = Reference.T
                               ) -> Tuple[TestResult, AucEstimate, AucEstimate]:
    """Fit the same model on two independent samples and test equal AUCs"""
    estimates = []
    for i, frame in enumerate((frame1, frame2)):
        model = fit_pseudo_likelihood(frame, covariates)
        estimates.append(estimate_auc(frame, model.probs, method, B, ResampleRng(rng.seed, rng.stream + i),
                                      n_jobs=n_jobs))
    return test_independent(estimates[0], estimates[1], alpha, reference), estimates[0], estimates[1]


def compare_paired_models(frame: SurveyFrame, covariates1: Sequence[object], covariates2: Sequence[object],
                          method: Union[Scheme, str], B: int, rng: ResampleRng, alpha: float = 0.05,
                          n_jobs: int = 1, reference: Union[Reference, str] = Reference.T
                          ) -> Tuple[TestResult, FittedModel, FittedModel]:
    """Fit two covariate sets on one sample and run the paired test"""
    model1 = fit_pseudo_likelihood(frame, covariates1)
    model2 = fit_pseudo_likelihood(frame, covariates2)
    result = test_paired(frame, model1, model2, method, B, rng, alpha, n_jobs=n_jobs, reference=reference)
    return result, model1, model2
