#!/usr/bin/env python3
"""
Replicate weights for design-based variance estimation

Four schemes are supported:
  JKn  - delete-one-PSU stratified jackknife
  RB   - rescaling bootstrap drawing a_h - 1 PSUs per stratum
  RBn  - rescaling bootstrap drawing a_h PSUs per stratum, no rescaling
  trB  - unit-level bootstrap ignoring strata and PSUs

Bootstrap draws come from a counter-based generator keyed by
(seed, stream, replicate), so replicate b is the same whichever worker builds it.
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import __version__
from errors import ConfigError, SurveyDataError
from survey_frame import SurveyFrame, validate_for_replication

logger = logging.getLogger(__name__)


class Scheme(str, Enum):
    JKN = "jkn"
    RB = "rb"
    RBN = "rbn"
    TRB = "trb"

    @property
    def is_bootstrap(self) -> bool:
        return self is not Scheme.JKN


@dataclass(frozen=True)
class ResampleRng:
    """Seed and stream identifying a family of reproducible resamples"""
    seed: int
    stream: int = 0

    def generator(self, replicate: int) -> np.random.Generator:
        """Independent Philox generator for one replicate"""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream, replicate))
        return np.random.Generator(np.random.Philox(sequence))

    def substream(self, *key: int) -> "ResampleRng":
        """Derived rng for a nested task (e.g. one simulation run)"""
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream, *key))
        return ResampleRng(int(sequence.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1)), 0)


@dataclass(frozen=True)
class ReplicateWeightSet:
    """
    Replicate weight vectors aligned to a frame's unit order

    `weights` is (R, n). `df` is the reference degrees of freedom for t intervals and
    tests: a - H for the PSU-level schemes, n - 1 for the unit-level bootstrap. For JKn, `jkn_factors[r]` is (a_h - 1) / a_h of the
    stratum whose PSU replicate r drops and `dropped_psu[r]` the dense PSU index.
    """
    scheme: Scheme
    weights: np.ndarray
    jkn_factors: Optional[np.ndarray] = None
    dropped_psu: Optional[np.ndarray] = None
    seed: Optional[int] = None
    stream: Optional[int] = None
    df: Optional[int] = None

    @property
    def count(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n(self) -> int:
        return int(self.weights.shape[1])


def jkn_weights(frame: SurveyFrame) -> ReplicateWeightSet:
    """
    Delete-one-PSU jackknife replicate weights

    Replicate (h, j) zeroes PSU (h, j), multiplies the other PSUs of stratum h
    by a_h / (a_h - 1) and leaves all other strata untouched.
    """
    validate_for_replication(frame)
    a_h = frame.psus_per_stratum
    weights = np.empty((frame.a, frame.n))
    factors = np.empty(frame.a)
    for psu in range(frame.a):
        h = frame.psu_stratum[psu]
        replicate = frame.weights.copy()
        in_stratum = frame.stratum_index == h
        replicate[in_stratum] = frame.weights[in_stratum] * (a_h[h] / (a_h[h] - 1))
        replicate[frame.psu_index == psu] = 0.0
        weights[psu] = replicate
        factors[psu] = (a_h[h] - 1) / a_h[h]
    logger.debug("JKn: %d replicates", frame.a)
    return ReplicateWeightSet(Scheme.JKN, weights, jkn_factors=factors,
                              dropped_psu=np.arange(frame.a), df=frame.a - frame.H)


def _check_count(B: int) -> None:
    if B < 2:
        raise ConfigError(f"need at least 2 bootstrap replicates, got B={B}")


def _psu_draw_counts(frame: SurveyFrame, rng: ResampleRng, replicate: int, rescaled: bool) -> np.ndarray:
    """Times each PSU is drawn in one replicate, strata drawn in order"""
    gen = rng.generator(replicate)
    counts = np.zeros(frame.a)
    for h, a_h in enumerate(frame.psus_per_stratum):
        psus = np.flatnonzero(frame.psu_stratum == h)
        draws = gen.integers(0, a_h, size=a_h - 1 if rescaled else a_h)
        counts[psus] = np.bincount(draws, minlength=a_h)
    return counts


def _rescaling_bootstrap(frame: SurveyFrame, B: int, rng: ResampleRng, rescaled: bool,
                         n_jobs: int) -> np.ndarray:
    validate_for_replication(frame)
    _check_count(B)
    if n_jobs == 1:
        counts = [_psu_draw_counts(frame, rng, b, rescaled) for b in range(B)]
    else:
        counts = Parallel(n_jobs=n_jobs)(
            delayed(_psu_draw_counts)(frame, rng, b, rescaled) for b in range(B))
    k = np.vstack(counts)
    multiplier = k
    if rescaled:
        a_h = frame.psus_per_stratum[frame.psu_stratum].astype(np.float64)
        multiplier = k * (a_h / (a_h - 1))[None, :]
    return frame.weights[None, :] * multiplier[:, frame.psu_index]


def rb_weights(frame: SurveyFrame, B: int, rng: ResampleRng, n_jobs: int = 1) -> ReplicateWeightSet:
    """Rescaling bootstrap: a_h - 1 PSU draws per stratum, weights times a_h / (a_h - 1) times k"""
    weights = _rescaling_bootstrap(frame, B, rng, rescaled=True, n_jobs=n_jobs)
    return ReplicateWeightSet(Scheme.RB, weights, seed=rng.seed, stream=rng.stream, df=frame.a - frame.H)


def rbn_weights(frame: SurveyFrame, B: int, rng: ResampleRng, n_jobs: int = 1) -> ReplicateWeightSet:
    """Rescaling bootstrap with a_h PSU draws per stratum and weights times k"""
    weights = _rescaling_bootstrap(frame, B, rng, rescaled=False, n_jobs=n_jobs)
    return ReplicateWeightSet(Scheme.RBN, weights, seed=rng.seed, stream=rng.stream, df=frame.a - frame.H)


def _unit_draw_counts(n: int, rng: ResampleRng, replicate: int) -> np.ndarray:
    return np.bincount(rng.generator(replicate).integers(0, n, size=n), minlength=n).astype(np.float64)


def trb_weights(frame: SurveyFrame, B: int, rng: ResampleRng, n_jobs: int = 1) -> ReplicateWeightSet:
    """Traditional bootstrap: n unit draws with replacement, design ignored"""
    _check_count(B)
    if frame.n < 2:
        raise SurveyDataError(f"traditional bootstrap needs at least 2 units, got {frame.n}")
    if n_jobs == 1:
        counts = [_unit_draw_counts(frame.n, rng, b) for b in range(B)]
    else:
        counts = Parallel(n_jobs=n_jobs)(delayed(_unit_draw_counts)(frame.n, rng, b) for b in range(B))
    return ReplicateWeightSet(Scheme.TRB, frame.weights[None, :] * np.vstack(counts),
                              seed=rng.seed, stream=rng.stream, df=frame.n - 1)


def replicate_weights(frame: SurveyFrame, scheme: Union[Scheme, str], B: int,
                      rng: ResampleRng, n_jobs: int = 1) -> ReplicateWeightSet:
    """Dispatch to the generator for a scheme"""
    scheme = Scheme(scheme)
    if scheme is Scheme.JKN:
        return jkn_weights(frame)
    builder = {Scheme.RB: rb_weights, Scheme.RBN: rbn_weights, Scheme.TRB: trb_weights}[scheme]
    return builder(frame, B, rng, n_jobs=n_jobs)


def dump_replicates(replicates: ReplicateWeightSet, frame: SurveyFrame, path: Union[str, Path],
                    config: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write replicate weights in long format with a JSON sidecar

    The CSV holds replicate, unit_id, stratum, psu and weight (17 significant
    digits). The sidecar `<name>.meta.json` records version, scheme, seed,
    stream, replicate count, degrees of freedom and the run config.

    Returns:
        Path of the sidecar
    """
    count, n = replicates.weights.shape
    if n != frame.n:
        raise SurveyDataError(f"{n} replicate weight columns for {frame.n} units")
    path = Path(path)
    table = pd.DataFrame({
        "replicate": np.repeat(np.arange(count), n),
        "unit_id": np.tile(frame.unit_ids, count),
        "stratum": np.tile(frame.stratum_labels, count),
        "psu": np.tile(frame.psu_labels, count),
        "weight": replicates.weights.ravel(),
    })
    table.to_csv(path, index=False, float_format="%.17g")

    sidecar = path.with_suffix(".meta.json")
    meta = {
        "version": __version__,
        "scheme": replicates.scheme.value,
        "replicates": count,
        "n": n,
        "seed": replicates.seed,
        "stream": replicates.stream,
        "df": replicates.df,
        "config": config or {},
    }
    with open(sidecar, 'w', encoding='utf-8') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("wrote %d x %d replicate weights to %s (meta %s)", count, n, path, sidecar)
    return sidecar
