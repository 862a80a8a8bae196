#!/usr/bin/env python3
"""
Standard normal quantile and survival function, with Student t counterparts
for intervals and tests that use design degrees of freedom
"""

from typing import Optional, Union

import numpy as np
from scipy.special import ndtr, ndtri, stdtr, stdtrit

from errors import SurveyDataError

ArrayLike = Union[float, np.ndarray]


def std_normal_quantile(p: ArrayLike) -> ArrayLike:
    """
    Inverse standard normal CDF

    Args:
        p: Probability (scalar or array), strictly inside (0, 1)

    Returns:
        z with P(Z <= z) = p
    """
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~(p_arr > 0.0) | ~(p_arr < 1.0)):
        raise SurveyDataError(f"quantile probability must lie in (0, 1), got {p}")
    z = ndtri(p_arr)
    return float(z) if z.ndim == 0 else z


def std_normal_sf(z: ArrayLike) -> ArrayLike:
    """P(Z > z) for Z ~ N(0, 1)"""
    # ndtr(-z) keeps full relative precision in the upper tail
    s = ndtr(-np.asarray(z, dtype=np.float64))
    return float(s) if s.ndim == 0 else s


def _check_df(df: Optional[float]) -> None:
    if df is not None and not df > 0:
        raise SurveyDataError(f"degrees of freedom must be positive, got {df}")


def critical_value(alpha: float, df: Optional[float] = None) -> float:
    """
    Upper alpha/2 critical value

    z_{alpha/2} when df is None, otherwise the Student t quantile with df degrees of freedom.
    """
    if not 0.0 < alpha < 1.0:
        raise SurveyDataError(f"alpha must lie in (0, 1), got {alpha}")
    _check_df(df)
    if df is None:
        return -std_normal_quantile(alpha / 2.0)
    return float(-stdtrit(df, alpha / 2.0))


def two_sided_p_value(z: float, df: Optional[float] = None) -> float:
    """p = 2 P(Z > |z|), or 2 P(T_df > |z|) when df is given"""
    _check_df(df)
    if df is None:
        return min(1.0, 2.0 * std_normal_sf(abs(z)))
    return min(1.0, float(2.0 * stdtr(df, -abs(z))))
