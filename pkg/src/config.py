#!/usr/bin/env python3
"""
Run configuration and defaults for the survey-auc command line
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

__version__ = "0.1.0"

DEFAULT_B = 1000
DEFAULT_ALPHAS: Tuple[float, ...] = (0.01, 0.05, 0.1)
DEFAULT_SEED = 2025

METHODS = ("jkn", "rb", "rbn", "trb")
BOOTSTRAP_METHODS = ("rb", "rbn", "trb")


@dataclass(frozen=True)
class ColumnSchema:
    """Which CSV columns hold the design variables, outcome and covariates"""
    stratum: str = "stratum"
    psu: str = "psu"
    weight: str = "weight"
    outcome: str = "y"
    covariates: Tuple[str, ...] = ()
    unit_id: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; echoed into every artifact"""
    subcommand: str
    inputs: Tuple[str, ...] = ()
    schema: ColumnSchema = field(default_factory=ColumnSchema)
    method: str = "jkn"
    ci: str = "normal"
    reference: str = "t"
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    B: int = DEFAULT_B
    seed: int = DEFAULT_SEED
    output: Optional[str] = None
    threads: int = 1
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["version"] = __version__
        return data
