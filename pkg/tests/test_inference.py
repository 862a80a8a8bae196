#!/usr/bin/env python3
"""
Tests for variance estimators, confidence intervals, Wald tests and normal numerics
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent))

import inference.compare as compare
from errors import (
    ConfigError,
    DegenerateReplicatesError,
    InfiniteStatisticError,
    InsufficientReplicatesError,
    MissingReplicateError,
    SurveyDataError,
)
from inference.estimators import (
    AucEstimate,
    Construction,
    Reference,
    ci_normal,
    ci_percentile,
    confidence_interval,
    count_degenerate,
    estimate_all_methods,
    estimate_auc,
    evaluate_replicates,
    variance_boot,
    variance_jkn,
)
from inference.normal import critical_value, std_normal_quantile, std_normal_sf, two_sided_p_value
from replicates import ReplicateWeightSet, ResampleRng, Scheme, jkn_weights, rb_weights
from survey_fixtures import clustered_frame
from wauc import AucInput, weighted_auc
from wlogit import FittedModel, fit_pseudo_likelihood


def _estimate(point, variance, method=Scheme.JKN):
    return AucEstimate(point=point, method=method, variance=variance,
                       replicate_aucs=np.full(4, point), n_used_replicates=4)


# --- variances --------------------------------------------------------------

def test_variance_jkn_closed_forms():
    frame = clustered_frame([2], units_per_psu=6, seed=1)
    replicates = jkn_weights(frame)
    assert variance_jkn(0.7, replicates, [0.7, 0.7]) == 0.0
    x, y, point = 0.71, 0.66, 0.69
    expected = 0.5 * ((x - point) ** 2 + (y - point) ** 2)
    assert abs(variance_jkn(point, replicates, [x, y]) - expected) <= 1e-15


def test_variance_jkn_matches_direct_sum():
    frame = clustered_frame([2, 3, 4], units_per_psu=5, seed=2)
    replicates = jkn_weights(frame)
    gen = np.random.default_rng(3)
    values = gen.uniform(0.6, 0.8, size=replicates.count)
    point = 0.7

    direct = 0.0
    for h, a_h in enumerate(frame.psus_per_stratum):
        inner = 0.0
        for psu in np.flatnonzero(frame.psu_stratum == h):
            inner += (values[psu] - point) ** 2
        direct += (a_h - 1) / a_h * inner
    assert abs(variance_jkn(point, replicates, values) - direct) <= 1e-15


def test_variance_jkn_needs_complete_replicates():
    frame = clustered_frame([2, 2], seed=4)
    with pytest.raises(MissingReplicateError):
        variance_jkn(0.7, jkn_weights(frame), [0.7, np.nan, 0.71, 0.69])


def test_variance_boot():
    assert variance_boot(np.full(10, 0.73)) == 0.0
    assert abs(variance_boot([0.7, 0.8]) - 0.005) <= 1e-15
    gen = np.random.default_rng(5)
    values = gen.uniform(0.5, 0.9, size=1000)
    mean = values.sum() / values.size
    two_pass = ((values - mean) ** 2).sum() / (values.size - 1)
    assert abs(variance_boot(values) - two_pass) <= 1e-15
    # missing replicates are skipped
    assert variance_boot([0.7, np.nan, 0.8]) == variance_boot([0.7, 0.8])
    with pytest.raises(InsufficientReplicatesError):
        variance_boot([0.7, np.nan])


def test_variances_ignore_replicate_order():
    gen = np.random.default_rng(6)
    values = gen.uniform(0.6, 0.8, size=500)
    perm = gen.permutation(500)
    assert variance_boot(values[perm]) == variance_boot(values)

    frame = clustered_frame([3, 4, 2, 5], units_per_psu=3, seed=7)
    replicates = jkn_weights(frame)
    jk_values = gen.uniform(0.6, 0.8, size=replicates.count)
    order = gen.permutation(replicates.count)
    shuffled = ReplicateWeightSet(Scheme.JKN, replicates.weights[order], jkn_factors=replicates.jkn_factors[order],
                                  dropped_psu=replicates.dropped_psu[order])
    assert variance_jkn(0.7, shuffled, jk_values[order]) == variance_jkn(0.7, replicates, jk_values)


def test_degenerate_policy():
    values = np.full(200, 0.7)
    assert count_degenerate(values, Scheme.RB) == 0
    values[5] = np.nan
    assert count_degenerate(values, Scheme.RB) == 1
    values[6:9] = np.nan
    with pytest.raises(DegenerateReplicatesError) as info:
        count_degenerate(values, Scheme.TRB)
    assert info.value.exit_code == 4
    with pytest.raises(MissingReplicateError):
        count_degenerate(np.array([0.7, np.nan]), Scheme.JKN)


# --- intervals --------------------------------------------------------------

def test_ci_normal():
    interval = ci_normal(0.8, 0.0, 0.05)
    assert (interval.lower, interval.upper) == (0.8, 0.8)

    interval = ci_normal(0.8, 0.01 ** 2, 0.05)
    assert interval.lower == pytest.approx(0.780400, abs=1e-6)
    assert interval.upper == pytest.approx(0.819600, abs=1e-6)
    assert abs((interval.lower + interval.upper) / 2 - 0.8) <= 1e-12
    assert interval.level == 0.95
    assert interval.construction is Construction.NORMAL

    wide = ci_normal(0.8, 4e-4, 0.01)
    narrow = ci_normal(0.8, 4e-4, 0.1)
    assert wide.lower < narrow.lower and narrow.upper < wide.upper
    ratio = (wide.upper - wide.lower) / (narrow.upper - narrow.lower)
    assert ratio == pytest.approx(critical_value(0.01) / critical_value(0.1), rel=1e-12)

    with pytest.raises(SurveyDataError):
        ci_normal(0.8, 1e-4, 1.5)


def test_ci_normal_is_not_clipped():
    interval = ci_normal(0.99, 0.01 ** 2, 0.05)
    assert interval.upper > 1.0
    assert interval.outside_unit_interval


def test_ci_percentile():
    values = np.arange(1, 11) / 10.0
    interval = ci_percentile(values, 0.1, Scheme.RB)
    assert interval.lower == pytest.approx(0.145, abs=1e-12)
    assert interval.upper == pytest.approx(0.955, abs=1e-12)
    interval = ci_percentile(values, 0.2, Scheme.RB)
    assert interval.lower == pytest.approx(0.19, abs=1e-12)
    assert interval.upper == pytest.approx(0.91, abs=1e-12)

    constant = ci_percentile(np.full(30, 0.77), 0.05, "trb")
    assert (constant.lower, constant.upper) == (0.77, 0.77)

    gen = np.random.default_rng(8)
    values = gen.uniform(0.6, 0.9, size=101)
    for alpha in (0.01, 0.05, 0.5):
        interval = ci_percentile(values, alpha, Scheme.RBN)
        assert values.min() <= interval.lower <= interval.upper <= values.max()

    with pytest.raises(ConfigError):
        ci_percentile(values, 0.05, Scheme.JKN)


def test_ci_percentile_needs_the_method():
    frame = clustered_frame([2, 3], units_per_psu=6, seed=31)
    model = fit_pseudo_likelihood(frame)
    replicates = jkn_weights(frame)
    jk_values = evaluate_replicates(model.probs, frame.outcomes, replicates)
    # jackknife values carry no scheme of their own, so the method cannot be left out
    with pytest.raises(TypeError):
        ci_percentile(jk_values, 0.05)
    with pytest.raises(ConfigError):
        ci_percentile(jk_values, 0.05, replicates)

    boot = rb_weights(frame, 50, ResampleRng(32))
    boot_values = evaluate_replicates(model.probs, frame.outcomes, boot)
    assert ci_percentile(boot_values, 0.1, boot) == ci_percentile(boot_values, 0.1, Scheme.RB)


def test_ci_normal_t_reference():
    interval = ci_normal(0.8, 0.01 ** 2, 0.05, df=5)
    assert interval.lower == pytest.approx(0.8 - 0.025705818, abs=1e-7)
    assert interval.upper == pytest.approx(0.8 + 0.025705818, abs=1e-7)
    # the t interval is always wider than the z interval and converges to it
    assert ci_normal(0.8, 1e-4, 0.05, df=45).lower < ci_normal(0.8, 1e-4, 0.05).lower
    assert ci_normal(0.8, 1e-4, 0.05, df=10 ** 9).lower == pytest.approx(ci_normal(0.8, 1e-4, 0.05).lower,
                                                                          abs=1e-9)

    estimate = AucEstimate(point=0.8, method=Scheme.JKN, variance=1e-4, replicate_aucs=np.full(10, 0.8),
                           n_used_replicates=10, df=5)
    assert confidence_interval(estimate, 0.05) == ci_normal(0.8, 1e-4, 0.05, df=5)
    assert confidence_interval(estimate, 0.05, reference=Reference.Z) == ci_normal(0.8, 1e-4, 0.05)
    assert estimate.to_dict()["df"] == 5


def test_design_degrees_of_freedom():
    frame = clustered_frame([2, 3, 4, 2], units_per_psu=6, seed=33)
    model = fit_pseudo_likelihood(frame)
    assert frame.a - frame.H == 7
    assert estimate_auc(frame, model.probs, "jkn", 0).df == 7
    assert estimate_auc(frame, model.probs, "rb", 20, ResampleRng(34)).df == 7
    assert estimate_auc(frame, model.probs, "rbn", 20, ResampleRng(34)).df == 7
    assert estimate_auc(frame, model.probs, "trb", 20, ResampleRng(34)).df == frame.n - 1


def test_confidence_interval_dispatch():
    estimate = AucEstimate(point=0.8, method=Scheme.RB, variance=1e-4,
                           replicate_aucs=np.arange(1, 11) / 10.0, n_used_replicates=10)
    assert confidence_interval(estimate, 0.2, "percentile").lower == pytest.approx(0.19, abs=1e-12)
    assert confidence_interval(estimate, 0.05).lower == pytest.approx(0.780400, abs=1e-6)


# --- tests ------------------------------------------------------------------

def test_independent_identical():
    result = compare.test_independent(_estimate(0.8, 1e-4), _estimate(0.8, 1e-4))
    assert result.z == 0.0 and result.p_value == 1.0
    assert not result.reject


def test_independent_known_values():
    result = compare.test_independent(_estimate(0.82, 5e-5), _estimate(0.80, 5e-5))
    assert result.z == pytest.approx(2.0, abs=1e-12)
    assert result.p_value == pytest.approx(0.0455, abs=5e-5)
    assert result.z * math.sqrt(result.variance_d) == pytest.approx(result.d_hat, abs=1e-12)
    assert result.reject

    swapped = compare.test_independent(_estimate(0.80, 5e-5), _estimate(0.82, 5e-5))
    assert swapped.z == -result.z
    assert swapped.p_value == result.p_value


def test_independent_errors():
    with pytest.raises(ConfigError):
        compare.test_independent(_estimate(0.8, 1e-4), _estimate(0.7, 1e-4, Scheme.RB))
    with pytest.raises(InfiniteStatisticError):
        compare.test_independent(_estimate(0.8, 0.0), _estimate(0.7, 0.0))
    result = compare.test_independent(_estimate(0.8, 0.0), _estimate(0.8, 0.0))
    assert result.p_value == 1.0


def test_paired_same_model_has_zero_variance():
    frame = clustered_frame([2, 3, 2], units_per_psu=8, seed=9)
    model = fit_pseudo_likelihood(frame)
    for method in (Scheme.JKN, Scheme.RB, Scheme.TRB):
        result = compare.test_paired(frame, model, model, method, 200, ResampleRng(10))
        assert result.d_hat == 0.0
        assert result.variance_d == 0.0
        assert result.p_value == 1.0


def test_paired_monotone_transform():
    frame = clustered_frame([2, 2, 2], units_per_psu=8, seed=11)
    model = fit_pseudo_likelihood(frame)
    cubed = FittedModel(beta=model.beta, probs=model.probs ** 3, converged=True, iterations=0,
                        max_abs_score=0.0, covariates=model.covariates)
    result = compare.test_paired(frame, model, cubed, Scheme.RBN, 100, ResampleRng(12))
    assert result.d_hat == 0.0 and result.variance_d == 0.0


def test_paired_jkn_matches_direct_formula():
    frame = clustered_frame([2, 2], units_per_psu=10, q=2, seed=13)
    assert frame.n == 40
    model1 = fit_pseudo_likelihood(frame, ["X1"])
    model2 = fit_pseudo_likelihood(frame, ["X2"])
    result = compare.test_paired(frame, model1, model2, Scheme.JKN, 0, None)

    def auc(probs, weights):
        return weighted_auc(AucInput(probs, weights, frame.outcomes))

    d_hat = auc(model1.probs, frame.weights) - auc(model2.probs, frame.weights)
    variance = 0.0
    for psu in range(frame.a):
        h = frame.psu_stratum[psu]
        a_h = frame.psus_per_stratum[h]
        weights = np.where(frame.stratum_index == h, frame.weights * (a_h / (a_h - 1)), frame.weights)
        weights = np.where(frame.psu_index == psu, 0.0, weights)
        d_rep = auc(model1.probs, weights) - auc(model2.probs, weights)
        variance += (a_h - 1) / a_h * (d_rep - d_hat) ** 2
    assert result.d_hat == d_hat
    assert abs(result.variance_d - variance) <= 1e-15
    assert result.n_used_replicates == 4


def test_wald_statistic():
    z, p = compare.wald_statistic(0.03, 1e-4)
    assert z == pytest.approx(3.0, abs=1e-12)
    assert p == pytest.approx(two_sided_p_value(3.0))
    assert compare.wald_statistic(0.0, 0.0) == (0.0, 1.0)


def test_wald_statistic_t_reference():
    z, p = compare.wald_statistic(0.02, 1e-4, df=5)
    assert z == pytest.approx(2.0, abs=1e-12)
    assert p == pytest.approx(two_sided_p_value(2.0, 5))
    assert p > compare.wald_statistic(0.02, 1e-4)[1]


def test_independent_satterthwaite_df():
    est1 = AucEstimate(point=0.82, method=Scheme.JKN, variance=5e-5, replicate_aucs=np.full(10, 0.82),
                       n_used_replicates=10, df=5)
    est2 = AucEstimate(point=0.80, method=Scheme.JKN, variance=5e-5, replicate_aucs=np.full(10, 0.80),
                       n_used_replicates=10, df=5)
    result = compare.test_independent(est1, est2)
    # equal variances with equal df pool to twice the df
    assert result.df == pytest.approx(10.0, rel=1e-12)
    assert result.p_value == pytest.approx(two_sided_p_value(2.0, 10.0), rel=1e-12)
    assert compare.test_independent(est1, est2, reference="z").df is None
    assert compare.satterthwaite_df(1e-4, 5, 0.0, 40) == pytest.approx(5.0)
    assert compare.satterthwaite_df(1e-4, 5, 1e-4, None) is None


def test_paired_uses_design_df():
    frame = clustered_frame([2, 2, 2], units_per_psu=10, q=2, seed=35)
    model1 = fit_pseudo_likelihood(frame, ["X1"])
    model2 = fit_pseudo_likelihood(frame, ["X2"])
    t_result = compare.test_paired(frame, model1, model2, Scheme.JKN, 0, None)
    z_result = compare.test_paired(frame, model1, model2, Scheme.JKN, 0, None, reference="z")
    assert t_result.df == 3 and z_result.df is None
    assert t_result.z == z_result.z
    assert t_result.p_value == pytest.approx(two_sided_p_value(t_result.z, 3))
    assert t_result.p_value >= z_result.p_value


# --- pipeline ---------------------------------------------------------------

def test_estimate_auc_pipeline():
    frame = clustered_frame([2, 3, 4, 2], units_per_psu=6, seed=14)
    model = fit_pseudo_likelihood(frame)
    jk = estimate_auc(frame, model.probs, "jkn", 0)
    assert jk.point == weighted_auc(AucInput(model.probs, frame.weights, frame.outcomes))
    assert jk.replicate_aucs.shape == (frame.a,)
    assert jk.variance > 0

    serial = estimate_auc(frame, model.probs, "rb", 200, ResampleRng(15))
    parallel = estimate_auc(frame, model.probs, "rb", 200, ResampleRng(15), n_jobs=2)
    np.testing.assert_array_equal(serial.replicate_aucs, parallel.replicate_aucs)
    assert serial.variance == parallel.variance

    everything = estimate_all_methods(frame, model.probs, ["jkn", "rb", "rbn", "trb"], 200, ResampleRng(16))
    assert set(everything) == {Scheme.JKN, Scheme.RB, Scheme.RBN, Scheme.TRB}
    assert all(e.variance >= 0 for e in everything.values())

    with pytest.raises(ConfigError):
        estimate_auc(frame, model.probs, "trb", 200, None)


# --- normal numerics --------------------------------------------------------

def test_normal_reference_values():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_sf(0.0) == 0.5
    assert abs(std_normal_quantile(0.975) - 1.959963985) <= 1e-8
    assert abs(critical_value(0.05) - 1.959963985) <= 1e-8
    assert two_sided_p_value(2.0) == pytest.approx(0.0455003, abs=1e-7)


def test_t_reference_values():
    assert abs(critical_value(0.05, 5) - 2.570581836) <= 1e-6
    assert abs(critical_value(0.05, 1) - 1.0 / math.tan(0.025 * math.pi)) <= 1e-6
    assert abs(critical_value(0.05, None) - 1.959963985) <= 1e-8
    assert two_sided_p_value(critical_value(0.05, 5), 5) == pytest.approx(0.05, rel=1e-7)
    assert two_sided_p_value(0.0, 5) == 1.0
    for bad in (0, -1.0):
        with pytest.raises(SurveyDataError):
            critical_value(0.05, bad)


def test_normal_round_trip():
    p = np.linspace(1e-6, 1.0 - 1e-6, 1_000_000)
    assert np.max(np.abs(std_normal_sf(-std_normal_quantile(p)) - p)) <= 1e-9
    tails = np.logspace(-6, np.log10(0.5), 2000)
    assert np.max(np.abs(std_normal_sf(std_normal_quantile(1.0 - tails)) - tails)) <= 1e-9


def test_normal_domain():
    for bad in (0.0, 1.0, -0.1, 1.1, float("nan")):
        with pytest.raises(SurveyDataError):
            std_normal_quantile(bad)


def main():
    """Run all tests"""
    print("=== Inference Test ===\n")
    tests = [value for name, value in globals().items() if name.startswith("test_") and callable(value)]
    for test in tests:
        print(f"{test.__name__}...")
        test()
    print(f"\n✓ {len(tests)} inference tests passed")


if __name__ == "__main__":
    main()
