#!/usr/bin/env python3
"""
Data loading for survey-auc

Reads survey samples from CSV into validated SurveyFrames, writes them back, and
gives access to the bundled scenario registry and sampling schemes (JSON).
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from config import ColumnSchema
from errors import (
    MissingColumnError,
    NonNumericValueError,
    RaggedCovariateError,
    SurveyDataError,
)
from survey_frame import SurveyFrame

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class SurveyDataLoader:
    """Loads and provides access to the bundled simulation registry"""

    def __init__(self, data_dir: Optional[PathLike] = None, registry_path: Optional[PathLike] = None):
        """
        Initialize data loader

        Args:
            data_dir: Path to data directory. Defaults to src/data/
            registry_path: Alternative scenario registry file
        """
        if data_dir is None:
            data_dir = Path(__file__).parent / "data"

        self.data_dir = Path(data_dir)
        self.registry_path = Path(registry_path) if registry_path else self.data_dir / "scenarios.json"

        # Lazy-loaded data
        self._registry: Optional[Dict[str, Any]] = None
        self._sampling_schemes: Optional[Dict[str, Any]] = None

    def _load_json(self, file_path: Path) -> Any:
        """Load a JSON file"""
        if not file_path.exists():
            raise FileNotFoundError(f"Data file not found: {file_path}")

        with open(file_path, 'r', encoding='utf-8') as f:
            return json.load(f)

    @property
    def registry(self) -> Dict[str, Any]:
        """Whole registry file, holding "defaults" and "scenarios" """
        if self._registry is None:
            self._registry = self._load_json(self.registry_path)
        return self._registry

    @property
    def defaults(self) -> Dict[str, Any]:
        """Registry-wide defaults (population size, prevalence, R, B, ...)"""
        return self.registry.get("defaults", {})

    @property
    def scenarios(self) -> Dict[str, Any]:
        """
        Get the scenario registry

        Returns:
            Dict keyed by scenario id (as string); each value holds contrast,
            populations, models and expected population AUCs
        """
        return self.registry["scenarios"]

    @property
    def sampling_schemes(self) -> Dict[str, Any]:
        """
        Get the two-stage sampling schemes

        Returns:
            Dict with "population" layout and "schemes" keyed by clusters per stratum,
            each holding per-stratum units per cluster for sizes n1 and n2.
            A registry carrying its own "sampling_schemes" section overrides the bundled file.
        """
        if self._sampling_schemes is None:
            if "sampling_schemes" in self.registry:
                self._sampling_schemes = self.registry["sampling_schemes"]
            else:
                self._sampling_schemes = self._load_json(self.data_dir / "sampling_schemes.json")
        return self._sampling_schemes

    def get_scenario(self, scenario_id: int) -> Dict[str, Any]:
        """
        Get one scenario definition

        Args:
            scenario_id: Scenario number as listed in the registry

        Returns:
            Scenario dict
        """
        key = str(scenario_id)
        if key not in self.scenarios:
            raise ValueError(f"Invalid scenario: {scenario_id} (have {', '.join(sorted(self.scenarios))})")
        return self.scenarios[key]


def _check_field_counts(path: Path) -> None:
    """Every data row must have as many fields as the header"""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SurveyDataError(f"empty CSV file: {path}")
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise RaggedCovariateError(row_number, len(header), len(row))


def _numeric_column(table: pd.DataFrame, column: str) -> np.ndarray:
    raw = table[column]
    values = pd.to_numeric(raw.str.strip(), errors="coerce")
    bad = np.flatnonzero(values.isna().to_numpy() & ~raw.str.strip().str.lower().isin(["nan"]).to_numpy())
    if bad.size:
        row = int(bad[0])
        raise NonNumericValueError(column, row + 1, raw.iloc[row])
    return values.to_numpy(dtype=np.float64)


def load_survey_csv(path: PathLike, schema: ColumnSchema) -> SurveyFrame:
    """
    Load a survey sample from CSV

    Args:
        path: UTF-8 CSV with a header row and '.' decimal separator
        schema: Column mapping for stratum, PSU, weight, outcome and covariates

    Returns:
        Validated SurveyFrame with row order preserved

    Raises:
        FileNotFoundError, MissingColumnError, NonNumericValueError,
        NonPositiveWeightError, InvalidOutcomeError, RaggedCovariateError
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Survey file not found: {path}")

    _check_field_counts(path)
    table = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skip_blank_lines=True)

    required = [schema.stratum, schema.psu, schema.weight, schema.outcome, *schema.covariates]
    if schema.unit_id:
        required.append(schema.unit_id)
    for column in required:
        if column not in table.columns:
            raise MissingColumnError(column, list(table.columns))

    weights = _numeric_column(table, schema.weight)
    outcomes = _numeric_column(table, schema.outcome)
    if schema.covariates:
        covariates = np.column_stack([_numeric_column(table, c) for c in schema.covariates])
    else:
        covariates = None

    frame = SurveyFrame.from_arrays(
        stratum=table[schema.stratum].str.strip().tolist(),
        psu=table[schema.psu].str.strip().tolist(),
        weights=weights,
        outcomes=outcomes,
        covariates=covariates,
        covariate_names=list(schema.covariates),
        unit_ids=table[schema.unit_id].tolist() if schema.unit_id else None,
    )
    logger.info("loaded %s: n=%d H=%d a=%d q=%d", path, frame.n, frame.H, frame.a, frame.q)
    return frame


def write_survey_csv(frame: SurveyFrame, path: PathLike, schema: Optional[ColumnSchema] = None) -> ColumnSchema:
    """
    Write a frame to CSV with 17 significant digits so reloading is bit-exact

    Returns:
        The ColumnSchema that reads the file back
    """
    schema = schema or ColumnSchema(covariates=frame.covariate_names, unit_id="unit_id")
    columns: Dict[str, Any] = {
        schema.unit_id or "unit_id": frame.unit_ids,
        schema.stratum: frame.stratum_labels,
        schema.psu: frame.psu_labels,
        schema.weight: frame.weights,
        schema.outcome: frame.outcomes.astype(int),
    }
    names: List[str] = list(schema.covariates) or list(frame.covariate_names)
    for j, name in enumerate(names):
        columns[name] = frame.covariates[:, j]
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
    logger.info("wrote %d units to %s", frame.n, path)
    return ColumnSchema(schema.stratum, schema.psu, schema.weight, schema.outcome,
                        tuple(names), schema.unit_id or "unit_id")
