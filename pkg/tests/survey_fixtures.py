#!/usr/bin/env python3
"""
Shared synthetic frames for the test scripts
"""

import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# Add src directory to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from survey_frame import SurveyFrame


def clustered_frame(psus_per_stratum: Sequence[int], units_per_psu: int = 6, q: int = 2,
                    seed: int = 0, weights: Optional[np.ndarray] = None) -> SurveyFrame:
    """
    Random frame with the given number of PSUs in each stratum

    Outcomes alternate within each PSU so every PSU holds cases and controls,
    and covariates carry some signal.
    """
    gen = np.random.default_rng(seed)
    strata, psus = [], []
    for h, a_h in enumerate(psus_per_stratum):
        for j in range(a_h):
            strata += [f"S{h + 1}"] * units_per_psu
            psus += [f"P{j + 1}"] * units_per_psu
    n = len(strata)
    y = np.tile(np.arange(units_per_psu) % 2, n // units_per_psu)
    x = gen.normal(size=(n, q)) + 0.8 * y[:, None]
    w = gen.uniform(0.5, 5.0, size=n) if weights is None else weights
    return SurveyFrame.from_arrays(strata, psus, w, y, x)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> Path:
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
