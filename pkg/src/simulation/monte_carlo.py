#!/usr/bin/env python3
"""
Monte Carlo harness for the variance methods

For every sampling scheme of a scenario, R independent runs each draw a
sample (two for independent comparisons), fit the model(s), estimate the
weighted AUC and apply every replicate method. Runs are keyed by
(seed, a_h, per-stratum sizes, run) so results do not depend on n_jobs.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import DEFAULT_SEED, METHODS, __version__
from errors import SimulationAbortedError, SurveyAucError
from inference.compare import paired_from_replicates, test_independent
from inference.estimators import (
    Construction,
    Reference,
    ci_percentile,
    confidence_interval,
    estimate_auc,
    estimate_from_replicates,
    evaluate_replicates,
)
from replicates import ResampleRng, Scheme, replicate_weights
from simulation.population import FinitePopulation, SamplingScheme, draw_sample, generate_population
from simulation.scenarios import Contrast, ScenarioSpec
from wauc import AucInput, weighted_auc
from wlogit import fit_pseudo_likelihood

logger = logging.getLogger(__name__)

FAILURE_LIMIT = 0.02
METHOD_STREAM_BASE = 100

SUMMARY_COLUMNS = ["version", "seed", "scenario", "a_h", "size", "method", "construction", "reference",
                   "alpha", "metric", "proportion", "mc_se", "n_runs", "mean_point", "sd_point", "mean_se"]
SE_COLUMNS = ["version", "seed", "scenario", "a_h", "size", "run", "method", "quantity", "se"]


@dataclass
class RunRecord:
    """Outcome of one successful simulation run"""
    scheme: str
    clusters_per_stratum: int
    size: str
    run: int
    points: Tuple[float, ...]
    difference: Optional[float] = None
    ses: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    diff_ses: Dict[str, float] = field(default_factory=dict)
    covered: Dict[Tuple[str, str, float], bool] = field(default_factory=dict)
    rejected: Dict[Tuple[str, float], bool] = field(default_factory=dict)

    def __repr__(self):
        return f"RunRecord({self.scheme}, run={self.run}, points={self.points})"


@dataclass
class RunFailure:
    """A run that raised a named error; kept as text so it crosses process boundaries"""
    scheme: str
    run: int
    error_type: str
    message: str

    def __str__(self):
        return f"{self.scheme} run {self.run}: {self.error_type}: {self.message}"


RunOutcome = Union[RunRecord, RunFailure]


class MonteCarloTracker:
    """
    Collects run outcomes in order and notifies listeners

    Callbacks:
        run_complete(record), run_failed(failure),
        scheme_complete(label, completed, failed)
    """

    def __init__(self):
        self.records: List[RunRecord] = []
        self.failures: List[RunFailure] = []
        self.callbacks = {
            'run_complete': [],
            'run_failed': [],
            'scheme_complete': [],
        }

    def on_run_complete(self, callback: Callable[[RunRecord], None]):
        self.callbacks['run_complete'].append(callback)

    def on_run_failed(self, callback: Callable[[RunFailure], None]):
        self.callbacks['run_failed'].append(callback)

    def on_scheme_complete(self, callback: Callable[[str, int, int], None]):
        """Register callback fired after a scheme's runs (label, completed, failed)"""
        self.callbacks['scheme_complete'].append(callback)

    def record(self, outcome: RunOutcome):
        if isinstance(outcome, RunFailure):
            self.failures.append(outcome)
            for callback in self.callbacks['run_failed']:
                callback(outcome)
            return
        self.records.append(outcome)
        for callback in self.callbacks['run_complete']:
            callback(outcome)

    def finish_scheme(self, label: str):
        completed = len(self.get_scheme_records(label))
        failed = self.failure_count(label)
        for callback in self.callbacks['scheme_complete']:
            callback(label, completed, failed)

    def get_scheme_records(self, label: str) -> List[RunRecord]:
        return [r for r in self.records if r.scheme == label]

    def failure_count(self, label: Optional[str] = None) -> int:
        return sum(1 for f in self.failures if label is None or f.scheme == label)

    def reset(self):
        self.records.clear()
        self.failures.clear()


def generate_populations(spec: ScenarioSpec, seed: int) -> List[FinitePopulation]:
    """Populations of a scenario, each with every scenario model fitted"""
    return [generate_population(pop, seed, models=spec.models) for pop in spec.populations]


def population_summary(populations: Sequence[FinitePopulation]) -> List[dict]:
    """AUC^pop and fitted coefficients per population and model, for meta.json"""
    return [
        {
            "seed_offset": pop.spec.seed_offset,
            "N": pop.spec.N,
            "event_share": float(np.mean(pop.frame.outcomes)),
            "models": [
                {"covariates": list(key), "auc": pop.aucs[key], "beta": pop.models[key].beta.tolist()}
                for key in pop.models
            ],
        }
        for pop in populations
    ]


def run_rng(seed: int, scheme: SamplingScheme, run: int) -> ResampleRng:
    """Root rng of one run; sample k uses stream k, method i of sample k stream 100 + 10k + i"""
    return ResampleRng(seed).substream(scheme.clusters_per_stratum, *scheme.units_per_cluster, run)


def _method_rng(rng: ResampleRng, sample: int, method_index: int) -> ResampleRng:
    return ResampleRng(rng.seed, METHOD_STREAM_BASE + 10 * sample + method_index)


def _interval_run(spec: ScenarioSpec, populations: Sequence[FinitePopulation], record: RunRecord,
                  rng: ResampleRng, scheme: SamplingScheme, methods: Sequence[Scheme], B: int,
                  alphas: Sequence[float], reference: Reference) -> None:
    population = populations[0]
    covariates = spec.models[0]
    target = population.aucs[covariates]
    sample = draw_sample(population, scheme, ResampleRng(rng.seed, 0))
    fitted = fit_pseudo_likelihood(sample, covariates)
    record.points = (weighted_auc(AucInput(fitted.probs, sample.weights, sample.outcomes)),)

    for i, method in enumerate(methods):
        estimate = estimate_auc(sample, fitted.probs, method, B, _method_rng(rng, 0, i))
        record.ses[method.value] = (estimate.se,)
        for alpha in alphas:
            interval = confidence_interval(estimate, alpha, Construction.NORMAL, reference)
            record.covered[(method.value, Construction.NORMAL.value, alpha)] = interval.contains(target)
            if method.is_bootstrap:
                interval = ci_percentile(estimate.replicate_aucs, alpha, method)
                record.covered[(method.value, Construction.PERCENTILE.value, alpha)] = interval.contains(target)


def _independent_run(spec: ScenarioSpec, populations: Sequence[FinitePopulation], record: RunRecord,
                     rng: ResampleRng, scheme: SamplingScheme, methods: Sequence[Scheme], B: int,
                     alphas: Sequence[float], reference: Reference) -> None:
    covariates = spec.models[0]
    samples = [draw_sample(pop, scheme, ResampleRng(rng.seed, k)) for k, pop in enumerate(populations)]
    fits = [fit_pseudo_likelihood(sample, covariates) for sample in samples]
    record.points = tuple(weighted_auc(AucInput(f.probs, s.weights, s.outcomes)) for f, s in zip(fits, samples))
    record.difference = record.points[0] - record.points[1]

    for i, method in enumerate(methods):
        est1, est2 = (estimate_auc(s, f.probs, method, B, _method_rng(rng, k, i))
                      for k, (s, f) in enumerate(zip(samples, fits)))
        result = test_independent(est1, est2, reference=reference)
        record.ses[method.value] = (est1.se, est2.se)
        record.diff_ses[method.value] = result.se
        for alpha in alphas:
            record.rejected[(method.value, alpha)] = result.p_value < alpha


def _paired_run(spec: ScenarioSpec, populations: Sequence[FinitePopulation], record: RunRecord,
                rng: ResampleRng, scheme: SamplingScheme, methods: Sequence[Scheme], B: int,
                alphas: Sequence[float], reference: Reference) -> None:
    sample = draw_sample(populations[0], scheme, ResampleRng(rng.seed, 0))
    fits = [fit_pseudo_likelihood(sample, covariates) for covariates in spec.models]
    point1, point2 = (weighted_auc(AucInput(f.probs, sample.weights, sample.outcomes)) for f in fits)
    record.points = (point1, point2)
    record.difference = point1 - point2

    for i, method in enumerate(methods):
        replicates = replicate_weights(sample, method, B, _method_rng(rng, 0, i))
        aucs1 = evaluate_replicates(fits[0].probs, sample.outcomes, replicates)
        aucs2 = evaluate_replicates(fits[1].probs, sample.outcomes, replicates)
        est1 = estimate_from_replicates(point1, replicates, aucs1)
        est2 = estimate_from_replicates(point2, replicates, aucs2)
        result = paired_from_replicates(point1, point2, replicates, aucs1, aucs2, reference=reference)
        record.ses[method.value] = (est1.se, est2.se)
        record.diff_ses[method.value] = result.se
        for alpha in alphas:
            record.rejected[(method.value, alpha)] = result.p_value < alpha


RUNNERS = {
    Contrast.CI: _interval_run,
    Contrast.HT_INDEPENDENT: _independent_run,
    Contrast.HT_PAIRED: _paired_run,
}


def simulate_run(spec: ScenarioSpec, populations: Sequence[FinitePopulation], scheme: SamplingScheme,
                 run: int, seed: int, methods: Sequence[Scheme], B: int,
                 alphas: Sequence[float], reference: Reference = Reference.T) -> RunOutcome:
    """One run of one scheme; a named error becomes a RunFailure"""
    record = RunRecord(scheme.label, scheme.clusters_per_stratum, scheme.size, run, points=())
    try:
        RUNNERS[spec.contrast](spec, populations, record, run_rng(seed, scheme, run), scheme,
                               methods, B, alphas, Reference(reference))
    except SurveyAucError as e:
        logger.warning("%s run %d failed: %s", scheme.label, run, e)
        return RunFailure(scheme.label, run, type(e).__name__, str(e))
    return record


def _simulate_chunk(spec, populations, scheme, runs, seed, methods, B, alphas, reference) -> List[RunOutcome]:
    return [simulate_run(spec, populations, scheme, r, seed, methods, B, alphas, reference) for r in runs]


@dataclass
class MonteCarloReport:
    """All run outcomes of one scenario plus the aggregation into coverage/rejection tables"""
    spec: ScenarioSpec
    R: int
    B: int
    seed: int
    methods: Tuple[str, ...]
    alphas: Tuple[float, ...]
    reference: Reference = Reference.T
    populations: List[dict] = field(default_factory=list)
    records: List[RunRecord] = field(default_factory=list)
    failures: List[RunFailure] = field(default_factory=list)

    def _scheme_groups(self):
        for scheme in self.spec.schemes:
            yield scheme, [r for r in self.records if r.scheme == scheme.label]

    @staticmethod
    def _spread(values: Sequence[float]) -> Tuple[float, float]:
        if not values:
            return math.nan, math.nan
        array = np.asarray(values, dtype=np.float64)
        sd = float(np.std(array, ddof=1)) if array.size > 1 else math.nan
        return math.fsum(values) / len(values), sd

    def _row(self, scheme: SamplingScheme, method: str, construction: str, alpha: float, metric: str,
             hits: List[bool], points: List[float], ses: List[float]) -> dict:
        runs = len(hits)
        proportion = sum(hits) / runs
        mean_point, sd_point = self._spread(points)
        return {
            "version": __version__,
            "seed": self.seed,
            "scenario": self.spec.id,
            "a_h": scheme.clusters_per_stratum,
            "size": scheme.size,
            "method": method,
            "construction": construction,
            "reference": self.reference.value if construction != Construction.PERCENTILE.value else "",
            "alpha": alpha,
            "metric": metric,
            "proportion": proportion,
            "mc_se": math.sqrt(proportion * (1.0 - proportion) / runs),
            "n_runs": runs,
            "mean_point": mean_point,
            "sd_point": sd_point,
            "mean_se": math.fsum(ses) / len(ses),
        }

    def summary(self) -> pd.DataFrame:
        """
        Coverage (interval scenarios) or rejection rate (test scenarios) per
        scheme, method, construction and alpha, with Monte Carlo SE sqrt(p(1-p)/R)
        """
        rows = []
        for scheme, records in self._scheme_groups():
            if not records:
                continue
            for method in self.methods:
                if self.spec.contrast is Contrast.CI:
                    points = [r.points[0] for r in records]
                    ses = [r.ses[method][0] for r in records]
                    constructions = [Construction.NORMAL.value]
                    if Scheme(method).is_bootstrap:
                        constructions.append(Construction.PERCENTILE.value)
                    for construction in constructions:
                        for alpha in self.alphas:
                            hits = [r.covered[(method, construction, alpha)] for r in records]
                            rows.append(self._row(scheme, method, construction, alpha, "coverage",
                                                  hits, points, ses))
                else:
                    points = [r.difference for r in records]
                    ses = [r.diff_ses[method] for r in records]
                    for alpha in self.alphas:
                        hits = [r.rejected[(method, alpha)] for r in records]
                        rows.append(self._row(scheme, method, "wald", alpha, "rejection", hits, points, ses))
        return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)

    def se_samples(self) -> pd.DataFrame:
        """Per-run standard errors for density plots: each AUC, and the difference for tests"""
        rows = []
        for record in self.records:
            for method in self.methods:
                quantities = ["auc"] if len(record.ses[method]) == 1 else ["auc1", "auc2"]
                values = list(record.ses[method])
                if method in record.diff_ses:
                    quantities.append("diff")
                    values.append(record.diff_ses[method])
                for quantity, se in zip(quantities, values):
                    rows.append({"version": __version__, "seed": self.seed, "scenario": self.spec.id,
                                 "a_h": record.clusters_per_stratum,
                                 "size": record.size, "run": record.run, "method": method,
                                 "quantity": quantity, "se": se})
        return pd.DataFrame(rows, columns=SE_COLUMNS)

    def failure_counts(self) -> Dict[str, int]:
        return {s.label: sum(1 for f in self.failures if f.scheme == s.label) for s in self.spec.schemes}

    def meta(self, config: Optional[dict] = None) -> dict:
        return {
            "version": __version__,
            "seed": self.seed,
            "config": config or {},
            "scenario": self.spec.to_dict(),
            "R": self.R,
            "B": self.B,
            "methods": list(self.methods),
            "alphas": list(self.alphas),
            "reference": self.reference.value,
            "populations": self.populations,
            "failures": self.failure_counts(),
            "failure_messages": [str(f) for f in self.failures],
        }

    def write(self, out_dir: Union[str, Path], config: Optional[dict] = None) -> Dict[str, Path]:
        """Write summary.csv, se_samples.csv and meta.json; no timestamps, so reruns are byte-identical"""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"summary": out / "summary.csv", "se_samples": out / "se_samples.csv", "meta": out / "meta.json"}
        self.summary().to_csv(paths["summary"], index=False, float_format="%.17g")
        self.se_samples().to_csv(paths["se_samples"], index=False, float_format="%.17g")
        with open(paths["meta"], 'w', encoding='utf-8') as f:
            json.dump(self.meta(config), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info("wrote %s", ", ".join(str(p) for p in paths.values()))
        return paths


def run_scenario(spec: ScenarioSpec, R: Optional[int] = None, B: Optional[int] = None,
                 seed: int = DEFAULT_SEED, methods: Sequence[str] = METHODS, n_jobs: int = 1,
                 alphas: Optional[Sequence[float]] = None,
                 tracker: Optional[MonteCarloTracker] = None,
                 populations: Optional[List[FinitePopulation]] = None,
                 reference: Union[Reference, str] = Reference.T) -> MonteCarloReport:
    """
    Monte Carlo study of one scenario over all of its sampling schemes

    Args:
        spec: Scenario (narrow schemes with ScenarioSpec.select_schemes)
        R: Runs per scheme (defaults to spec.R)
        B: Bootstrap replicates (defaults to spec.B)
        seed: Master seed for populations, samples and resamples
        methods: Replicate methods to apply
        n_jobs: joblib workers over runs
        alphas: Significance levels (defaults to spec.alphas)
        tracker: Optional tracker receiving outcomes as schemes finish
        populations: Pre-generated populations (generated from seed otherwise)
        reference: t (design degrees of freedom) or z for Wald intervals and tests

    Raises:
        SimulationAbortedError if more than 2% of a scheme's runs fail
    """
    R = spec.R if R is None else R
    B = spec.B if B is None else B
    alphas = tuple(spec.alphas if alphas is None else alphas)
    schemes = tuple(Scheme(m) for m in methods)
    reference = Reference(reference)
    tracker = tracker or MonteCarloTracker()
    tracker.reset()

    report = MonteCarloReport(spec=spec, R=R, B=B, seed=seed, methods=tuple(m.value for m in schemes),
                              alphas=alphas, reference=reference)
    if R == 0:
        return report

    populations = populations or generate_populations(spec, seed)
    report.populations = population_summary(populations)

    for scheme in spec.schemes:
        logger.info("scenario %d, %s: %d runs", spec.id, scheme.label, R)
        if n_jobs == 1:
            outcomes = _simulate_chunk(spec, populations, scheme, range(R), seed, schemes, B, alphas, reference)
        else:
            chunks = np.array_split(np.arange(R), min(R, 4 * abs(n_jobs)))
            parts = Parallel(n_jobs=n_jobs)(
                delayed(_simulate_chunk)(spec, populations, scheme, chunk.tolist(), seed, schemes, B, alphas,
                                         reference)
                for chunk in chunks if chunk.size)
            outcomes = [outcome for part in parts for outcome in part]

        for outcome in outcomes:
            tracker.record(outcome)
        tracker.finish_scheme(scheme.label)

        failed = tracker.failure_count(scheme.label)
        if failed > FAILURE_LIMIT * R:
            last = tracker.failures[-1]
            raise SimulationAbortedError(failed, R, FAILURE_LIMIT, str(last))

    report.records = list(tracker.records)
    report.failures = list(tracker.failures)
    return report
