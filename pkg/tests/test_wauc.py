#!/usr/bin/env python3
"""
Tests for the weighted AUC fast path, its oracle and population AUC
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

# Add src directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))
sys.path.insert(0, str(Path(__file__).parent))

from errors import DegenerateAucError, DimensionMismatchError, InvalidOutcomeError
from survey_fixtures import clustered_frame
from survey_frame import SurveyFrame
from wauc import AucInput, TieGroups, auc_rows, population_auc, weighted_auc, weighted_auc_oracle
from wlogit import FittedModel, fit_pseudo_likelihood


def _random_instance(gen: np.random.Generator, ties: bool) -> AucInput:
    n = int(gen.integers(2, 51))
    y = gen.integers(0, 2, size=n)
    y[0], y[1] = 0, 1
    if ties:
        probs = gen.integers(0, max(2, n // 4), size=n) / 10.0
    else:
        probs = gen.random(n)
    weights = 10.0 * (1.0 - gen.random(n))     # (0, 10]
    return AucInput(probs, weights, y)


def test_perfect_separation():
    assert weighted_auc(AucInput([0.2, 0.8], [1.0, 1.0], [0, 1])) == 1.0
    assert weighted_auc(AucInput([0.8, 0.2], [1.0, 1.0], [0, 1])) == 0.0


def test_all_ties_give_half():
    gen = np.random.default_rng(1)
    data = AucInput(np.full(9, 0.37), gen.uniform(0.1, 5.0, 9), [0, 1, 0, 1, 1, 0, 0, 1, 0])
    assert weighted_auc(data) == 0.5


def test_small_hand_computed():
    # pairs (control, case): (0.1 vs 0.4) concordant w 1*3; (0.4 vs 0.4) tie w 2*3
    data = AucInput([0.1, 0.4, 0.4], [1.0, 2.0, 3.0], [0, 0, 1])
    assert weighted_auc(data) == pytest.approx((3.0 + 0.5 * 6.0) / 9.0, abs=1e-15)


def test_fast_path_matches_oracle():
    gen = np.random.default_rng(12345)
    started = time.perf_counter()
    for i in range(1000):
        data = _random_instance(gen, ties=i % 2 == 0)
        assert abs(weighted_auc(data) - weighted_auc_oracle(data)) <= 1e-12
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    print(f"  ✓ 1000 instances agree with the double sum ({elapsed:.2f}s)")


def test_weight_scale_invariance():
    gen = np.random.default_rng(7)
    for _ in range(50):
        data = _random_instance(gen, ties=True)
        scaled = AucInput(data.probs, 123.4 * data.weights, data.outcomes)
        assert abs(weighted_auc(data) - weighted_auc(scaled)) <= 1e-12


def test_monotone_transform_invariance():
    gen = np.random.default_rng(8)
    for _ in range(50):
        data = _random_instance(gen, ties=True)
        transformed = AucInput(np.exp(3.0 * data.probs) + 2.0, data.weights, data.outcomes)
        assert weighted_auc(data) == weighted_auc(transformed)


def test_negation_complements():
    gen = np.random.default_rng(9)
    for _ in range(50):
        data = _random_instance(gen, ties=True)
        negated = AucInput(-data.probs, data.weights, data.outcomes)
        assert abs(weighted_auc(negated) - (1.0 - weighted_auc(data))) <= 1e-12


def test_zero_weight_units_have_no_effect():
    gen = np.random.default_rng(10)
    for _ in range(50):
        data = _random_instance(gen, ties=True)
        extra = int(gen.integers(1, 6))
        padded = AucInput(np.r_[data.probs, gen.random(extra)], np.r_[data.weights, np.zeros(extra)],
                          np.r_[data.outcomes, gen.integers(0, 2, size=extra)])
        assert abs(weighted_auc(padded) - weighted_auc(data)) <= 1e-12


def test_degenerate_inputs():
    with pytest.raises(DegenerateAucError):
        weighted_auc(AucInput([0.1, 0.9], [1.0, 1.0], [1, 1]))
    with pytest.raises(DegenerateAucError):
        # the only control has zero weight
        weighted_auc(AucInput([0.1, 0.9, 0.5], [0.0, 1.0, 1.0], [0, 1, 1]))
    with pytest.raises(DimensionMismatchError):
        AucInput([0.1, 0.9], [1.0], [0, 1])
    with pytest.raises(DimensionMismatchError):
        AucInput([0.1, 0.9], [1.0, -1.0], [0, 1])


def test_outcomes_must_be_binary():
    for outcomes, row in (([0, 2, 1], 2), ([0.0, 1.0, 0.5], 3), ([-1, 0, 1], 1), ([0.0, np.nan, 1.0], 2)):
        with pytest.raises(InvalidOutcomeError) as info:
            AucInput([0.1, 0.5, 0.9], [1.0, 1.0, 1.0], outcomes)
        assert info.value.row == row and info.value.exit_code == 2
    # booleans and 0.0 / 1.0 floats are accepted
    assert weighted_auc(AucInput([0.1, 0.9], [1.0, 1.0], [False, True])) == 1.0
    assert weighted_auc(AucInput([0.1, 0.9], [1.0, 1.0], [0.0, 1.0])) == 1.0


def test_rows_match_single_evaluations():
    gen = np.random.default_rng(11)
    data = _random_instance(gen, ties=True)
    weights = gen.uniform(0.0, 3.0, size=(25, data.probs.shape[0]))
    weights[3, data.outcomes] = 0.0      # no case weight: missing
    values = auc_rows(TieGroups(data.probs, data.outcomes), weights)
    assert np.isnan(values[3])
    for r in range(25):
        if r == 3:
            continue
        single = weighted_auc(AucInput(data.probs, weights[r], data.outcomes))
        assert abs(values[r] - single) <= 1e-13


def test_population_auc():
    two = SurveyFrame.from_arrays(["1", "1"], ["1", "2"], [1.0, 1.0], [0, 1], np.array([[0.0], [1.0]]))
    ordered = FittedModel(beta=np.array([0.0, 1.0]), probs=np.array([0.3, 0.6]), converged=True,
                          iterations=0, max_abs_score=0.0, covariates=("X1",))
    assert population_auc(two, ordered) == 1.0
    flat = FittedModel(beta=np.array([0.0, 0.0]), probs=np.array([0.5, 0.5]), converged=True,
                       iterations=0, max_abs_score=0.0, covariates=("X1",))
    assert population_auc(two, flat) == 0.5

    frame = clustered_frame([2, 3, 2], units_per_psu=8, q=2, seed=6)
    model = fit_pseudo_likelihood(frame)
    expected = weighted_auc(AucInput(model.probs, np.ones(frame.n), frame.outcomes))
    assert population_auc(frame, model) == expected


def main():
    """Run all tests"""
    print("=== Weighted AUC Test ===\n")
    tests = [value for name, value in globals().items() if name.startswith("test_") and callable(value)]
    for test in tests:
        print(f"{test.__name__}...")
        test()
    print(f"\n✓ {len(tests)} AUC tests passed")


if __name__ == "__main__":
    main()
