#!/usr/bin/env python3
"""
Survey sample data model

A SurveyFrame holds one complex-survey sample: per-unit stratum and PSU labels,
base sampling weights, a binary outcome and a covariate matrix. Unit position is
identity; every replicate weight vector indexes into the same row order.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import (
    DimensionMismatchError,
    InvalidOutcomeError,
    NonFiniteValueError,
    NonPositiveWeightError,
    SingletonPsuError,
    SurveyDataError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnitRecord:
    """One sampled unit"""
    unit_id: str
    stratum: str
    psu: str
    weight: float
    outcome: int
    covariates: Tuple[float, ...]


@dataclass(frozen=True)
class StratumInfo:
    """A stratum and the PSUs sampled in it"""
    stratum: str
    psus: Tuple[str, ...]

    @property
    def a(self) -> int:
        return len(self.psus)


@dataclass(frozen=True)
class DesignSummary:
    """Design counts returned by validate_for_replication"""
    H: int
    a: int
    n: int
    psus_per_stratum: Dict[str, int]
    units_per_psu: Dict[Tuple[str, str], int]


def _dense_codes(labels: Sequence[object]) -> Tuple[np.ndarray, List[object]]:
    """Re-index labels densely in order of first appearance"""
    lookup: Dict[object, int] = {}
    codes = np.empty(len(labels), dtype=np.int64)
    for i, label in enumerate(labels):
        code = lookup.get(label)
        if code is None:
            code = len(lookup)
            lookup[label] = code
        codes[i] = code
    return codes, list(lookup)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class SurveyFrame:
    """
    Immutable complex-survey sample

    Build with SurveyFrame.from_arrays(); the constructor assumes validated input.
    """

    def __init__(self, stratum_labels: np.ndarray, psu_labels: np.ndarray,
                 weights: np.ndarray, outcomes: np.ndarray, covariates: np.ndarray,
                 covariate_names: Tuple[str, ...], unit_ids: np.ndarray):
        self.stratum_labels = _readonly(stratum_labels)
        self.psu_labels = _readonly(psu_labels)
        self.weights = _readonly(weights)
        self.outcomes = _readonly(outcomes)
        self.covariates = _readonly(covariates)
        self.covariate_names = covariate_names
        self.unit_ids = _readonly(unit_ids)

        stratum_index, self.stratum_ids = _dense_codes(stratum_labels.tolist())
        psu_index, psu_keys = _dense_codes(list(zip(stratum_labels.tolist(), psu_labels.tolist())))
        self.stratum_index = _readonly(stratum_index)
        self.psu_index = _readonly(psu_index)
        # (stratum label, psu label) in dense PSU order
        self.psu_keys: List[Tuple[str, str]] = psu_keys

        stratum_code = {label: h for h, label in enumerate(self.stratum_ids)}
        self.psu_stratum = _readonly(np.array([stratum_code[s] for s, _ in psu_keys], dtype=np.int64))
        self.psus_per_stratum = _readonly(np.bincount(self.psu_stratum, minlength=len(self.stratum_ids)))

        # Lazy-built views
        self._units: Optional[List[UnitRecord]] = None
        self._strata: Optional[List[StratumInfo]] = None

    @classmethod
    def from_arrays(cls, stratum: Sequence[object], psu: Sequence[object],
                    weights: Sequence[float], outcomes: Sequence[float],
                    covariates: Optional[np.ndarray] = None,
                    covariate_names: Optional[Sequence[str]] = None,
                    unit_ids: Optional[Sequence[object]] = None) -> "SurveyFrame":
        """
        Validate raw columns and build a frame

        Args:
            stratum: Stratum label per unit (any hashable; stored as strings)
            psu: PSU label per unit, unique within its stratum
            weights: Base sampling weights, positive and finite
            outcomes: Binary outcome per unit
            covariates: (n, q) matrix; None for no covariates
            covariate_names: Names for the q columns (default X1..Xq)
            unit_ids: Opaque identifiers (default: row numbers)

        Returns:
            Validated SurveyFrame

        Raises:
            SurveyDataError subclasses naming the offending 1-based row
        """
        w = np.asarray(weights, dtype=np.float64).copy()
        n = w.shape[0]
        if w.ndim != 1:
            raise DimensionMismatchError("weights must be one-dimensional")

        strata = np.array([str(s) for s in stratum], dtype=object)
        psus = np.array([str(p) for p in psu], dtype=object)
        if strata.shape[0] != n or psus.shape[0] != n:
            raise DimensionMismatchError("stratum, psu and weight columns differ in length")

        bad = np.flatnonzero(~np.isfinite(w))
        if bad.size:
            raise NonFiniteValueError("weight", int(bad[0]) + 1)
        bad = np.flatnonzero(w <= 0)
        if bad.size:
            raise NonPositiveWeightError(int(bad[0]) + 1, float(w[bad[0]]))

        y_raw = np.asarray(outcomes, dtype=np.float64)
        if y_raw.shape != (n,):
            raise DimensionMismatchError("outcome column length differs from weights")
        bad = np.flatnonzero((y_raw != 0) & (y_raw != 1))
        if bad.size:
            raise InvalidOutcomeError(int(bad[0]) + 1, y_raw[bad[0]])
        y = y_raw.astype(np.int8)

        if covariates is None:
            x = np.empty((n, 0), dtype=np.float64)
        else:
            x = np.array(covariates, dtype=np.float64)
            if x.ndim == 1:
                x = x.reshape(n, -1)
            if x.ndim != 2 or x.shape[0] != n:
                raise DimensionMismatchError(f"covariate matrix must have {n} rows")
        bad_rows = np.flatnonzero(~np.all(np.isfinite(x), axis=1))
        if bad_rows.size:
            raise NonFiniteValueError("covariate", int(bad_rows[0]) + 1)

        if covariate_names is None:
            names = tuple(f"X{j + 1}" for j in range(x.shape[1]))
        else:
            names = tuple(covariate_names)
            if len(names) != x.shape[1]:
                raise DimensionMismatchError(
                    f"{len(names)} covariate names for {x.shape[1]} covariate columns")

        if unit_ids is None:
            ids = np.array([str(i + 1) for i in range(n)], dtype=object)
        else:
            ids = np.array([str(u) for u in unit_ids], dtype=object)
            if ids.shape[0] != n:
                raise DimensionMismatchError("unit id column length differs from weights")

        return cls(strata, psus, w, y, x, names, ids)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def q(self) -> int:
        return int(self.covariates.shape[1])

    @property
    def H(self) -> int:
        return len(self.stratum_ids)

    @property
    def a(self) -> int:
        """Total number of sampled PSUs"""
        return len(self.psu_keys)

    @property
    def strata(self) -> List[StratumInfo]:
        if self._strata is None:
            grouped: Dict[str, List[str]] = {s: [] for s in self.stratum_ids}
            for stratum, psu in self.psu_keys:
                grouped[stratum].append(psu)
            self._strata = [StratumInfo(s, tuple(p)) for s, p in grouped.items()]
        return self._strata

    @property
    def units(self) -> List[UnitRecord]:
        if self._units is None:
            self._units = [
                UnitRecord(
                    unit_id=self.unit_ids[i],
                    stratum=self.stratum_labels[i],
                    psu=self.psu_labels[i],
                    weight=float(self.weights[i]),
                    outcome=int(self.outcomes[i]),
                    covariates=tuple(float(v) for v in self.covariates[i]),
                )
                for i in range(self.n)
            ]
        return self._units

    def covariate_columns(self, names_or_indices: Optional[Sequence[object]] = None) -> List[int]:
        """Resolve covariate names or indices to column indices (None = all)"""
        if names_or_indices is None:
            return list(range(self.q))
        columns = []
        for item in names_or_indices:
            if isinstance(item, (int, np.integer)):
                if not 0 <= item < self.q:
                    raise DimensionMismatchError(f"covariate index {item} out of range 0..{self.q - 1}")
                columns.append(int(item))
            elif item in self.covariate_names:
                columns.append(self.covariate_names.index(item))
            else:
                raise SurveyDataError(f"unknown covariate '{item}' (have: {', '.join(self.covariate_names)})")
        return columns

    def design_matrix(self, columns: Optional[Sequence[object]] = None) -> np.ndarray:
        """Intercept column followed by the selected covariates"""
        idx = self.covariate_columns(columns)
        return np.column_stack([np.ones(self.n), self.covariates[:, idx]])

    def take(self, rows: Sequence[int], weights: Optional[np.ndarray] = None) -> "SurveyFrame":
        """New frame with the given rows, optionally replacing weights"""
        rows = np.asarray(rows, dtype=np.int64)
        w = self.weights[rows] if weights is None else np.asarray(weights, dtype=np.float64)
        return SurveyFrame.from_arrays(
            self.stratum_labels[rows], self.psu_labels[rows], w,
            self.outcomes[rows], self.covariates[rows], self.covariate_names,
            self.unit_ids[rows],
        )

    def __repr__(self):
        return f"SurveyFrame(n={self.n}, H={self.H}, a={self.a}, q={self.q})"


def validate_for_replication(frame: SurveyFrame) -> DesignSummary:
    """
    Check that every stratum has at least two PSUs and summarize the design

    Args:
        frame: Loaded survey frame

    Returns:
        DesignSummary with H, total PSUs, per-stratum PSU counts and per-PSU unit counts

    Raises:
        SingletonPsuError listing every stratum with a single PSU
    """
    singletons = [frame.stratum_ids[h] for h, count in enumerate(frame.psus_per_stratum) if count < 2]
    if singletons:
        raise SingletonPsuError(singletons)

    sizes = np.bincount(frame.psu_index, minlength=frame.a)
    summary = DesignSummary(
        H=frame.H,
        a=frame.a,
        n=frame.n,
        psus_per_stratum={s: int(c) for s, c in zip(frame.stratum_ids, frame.psus_per_stratum)},
        units_per_psu={key: int(c) for key, c in zip(frame.psu_keys, sizes)},
    )
    logger.debug("design: H=%d a=%d n=%d", summary.H, summary.a, summary.n)
    return summary
