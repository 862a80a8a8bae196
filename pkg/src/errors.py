#!/usr/bin/env python3
"""
Named errors for survey-auc

Every error carries the process exit code the CLI reports for it:
2 for bad input, 3 for numerical failures, 4 for aborted replicate/simulation runs.
"""

from typing import Optional, Sequence

import numpy as np


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_ABORT = 4


class SurveyAucError(Exception):
    """Base class for all survey-auc errors"""
    exit_code = 1


# --- Input errors -----------------------------------------------------------

class SurveyDataError(SurveyAucError, ValueError):
    """Survey data or configuration is invalid"""
    exit_code = EXIT_INPUT


class MissingColumnError(SurveyDataError):
    def __init__(self, column: str, available: Sequence[str]):
        self.column = column
        super().__init__(f"missing column '{column}' (available: {', '.join(available)})")


class NonNumericValueError(SurveyDataError):
    def __init__(self, column: str, row: int, value: object):
        self.column = column
        self.row = row
        super().__init__(f"non-numeric {column} at row {row}: {value!r}")


class NonPositiveWeightError(SurveyDataError):
    def __init__(self, row: int, value: float):
        self.row = row
        super().__init__(f"non-positive weight at row {row}: {value}")


class NonFiniteValueError(SurveyDataError):
    def __init__(self, column: str, row: int):
        self.column = column
        self.row = row
        super().__init__(f"non-finite {column} at row {row}")


class InvalidOutcomeError(SurveyDataError):
    def __init__(self, row: int, value: object):
        self.row = row
        super().__init__(f"outcome outside {{0, 1}} at row {row}: {value!r}")


class RaggedCovariateError(SurveyDataError):
    def __init__(self, row: int, expected: int, found: int):
        self.row = row
        super().__init__(f"ragged covariates at row {row}: expected {expected} values, found {found}")


class SingletonPsuError(SurveyDataError):
    """Replication needs at least two PSUs in every stratum"""

    def __init__(self, strata: Sequence[str]):
        self.strata = list(strata)
        super().__init__(f"strata with a single PSU: {', '.join(map(str, self.strata))}")


class DimensionMismatchError(SurveyDataError):
    pass


class ConfigError(SurveyDataError):
    """Invalid flag or parameter combination"""


# --- Numerical errors -------------------------------------------------------

class NumericalError(SurveyAucError, ArithmeticError):
    exit_code = EXIT_NUMERICAL


class RankDeficiencyError(NumericalError):
    def __init__(self, rank: int, columns: int):
        self.rank = rank
        self.columns = columns
        super().__init__(f"design matrix is rank deficient: rank {rank} < {columns} columns")


class ConvergenceError(NumericalError):
    """Optimizer hit its iteration limit; `beta` holds the last iterate"""

    def __init__(self, iterations: int, beta: np.ndarray, max_abs_score: float):
        self.iterations = iterations
        self.beta = beta
        self.max_abs_score = max_abs_score
        super().__init__(
            f"pseudo-likelihood fit did not converge in {iterations} iterations "
            f"(max |score| = {max_abs_score:.3g})"
        )


class SeparationError(NumericalError):
    def __init__(self, beta: np.ndarray, bound: float):
        self.beta = beta
        super().__init__(f"quasi-complete separation detected: |beta| exceeded {bound}")


class NonPositiveDefiniteError(NumericalError):
    pass


class DegenerateAucError(NumericalError):
    """No positive-weight case or no positive-weight control"""

    def __init__(self, message: str = "AUC undefined: need a positive-weight case and control"):
        super().__init__(message)


class InfiniteStatisticError(NumericalError):
    def __init__(self, d_hat: float):
        self.d_hat = d_hat
        super().__init__(f"zero variance with nonzero difference {d_hat:.6g}: z is infinite")


class MissingReplicateError(NumericalError):
    def __init__(self, replicates: Sequence[int]):
        self.replicates = list(replicates)
        super().__init__(f"missing replicate AUC for replicates {self.replicates}")


class InsufficientReplicatesError(NumericalError):
    def __init__(self, available: int, required: int = 2):
        super().__init__(f"need at least {required} usable replicates, got {available}")


# --- Aborts -----------------------------------------------------------------

class DegenerateReplicatesError(SurveyAucError):
    exit_code = EXIT_ABORT

    def __init__(self, degenerate: int, total: int, threshold: float):
        self.degenerate = degenerate
        self.total = total
        super().__init__(
            f"{degenerate} of {total} replicates are degenerate "
            f"(limit {threshold:.0%})"
        )


class SimulationAbortedError(SurveyAucError):
    exit_code = EXIT_ABORT

    def __init__(self, failed: int, total: int, threshold: float, last: Optional[str] = None):
        self.failed = failed
        self.total = total
        self.last = last
        detail = f"; last error: {last}" if last is not None else ""
        super().__init__(f"{failed} of {total} runs failed (limit {threshold:.0%}){detail}")
