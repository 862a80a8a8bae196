#!/usr/bin/env python3
"""
Simulation scenario registry

Scenarios and sampling schemes are data (src/data/*.json), read through
SurveyDataLoader; this module turns them into typed specs.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

from config import DEFAULT_ALPHAS, DEFAULT_B
from data_loader import SurveyDataLoader
from errors import ConfigError
from simulation.population import COVARIANCES, PopulationSpec, SamplingScheme


class Contrast(str, Enum):
    CI = "CI"
    HT_INDEPENDENT = "HT-independent"
    HT_PAIRED = "HT-paired"


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to run one Monte Carlo scenario"""
    id: int
    contrast: Contrast
    populations: Tuple[PopulationSpec, ...]
    models: Tuple[Tuple[str, ...], ...]
    expected_auc: Tuple[float, ...]
    schemes: Tuple[SamplingScheme, ...]
    R: int = 500
    B: int = DEFAULT_B
    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    description: str = ""

    def __post_init__(self):
        if self.contrast is Contrast.HT_INDEPENDENT and len(self.populations) != 2:
            raise ConfigError(f"scenario {self.id}: independent comparison needs two populations")
        if self.contrast is Contrast.HT_PAIRED and len(self.models) != 2:
            raise ConfigError(f"scenario {self.id}: paired comparison needs two models")
        if self.contrast is Contrast.CI and (len(self.populations) != 1 or len(self.models) != 1):
            raise ConfigError(f"scenario {self.id}: interval scenario needs one population and one model")
        for model in self.models:
            if not set(model) <= {"X1", "X2", "X3", "X4"}:
                raise ConfigError(f"scenario {self.id}: model covariates must come from X1..X4, got {model}")
        for scheme in self.schemes:
            if scheme.clusters_per_stratum not in (2, 4, 8, 10):
                raise ConfigError(f"scenario {self.id}: a_h must be one of 2, 4, 8, 10")

    def select_schemes(self, clusters: Optional[Sequence[int]] = None,
                       sizes: Optional[Sequence[str]] = None) -> "ScenarioSpec":
        """Copy restricted to some clusters-per-stratum values and sample sizes"""
        chosen = tuple(s for s in self.schemes
                       if (clusters is None or s.clusters_per_stratum in clusters)
                       and (sizes is None or s.size in sizes))
        if not chosen:
            raise ConfigError(f"no sampling scheme matches clusters={clusters} sizes={sizes}")
        return ScenarioSpec(self.id, self.contrast, self.populations, self.models, self.expected_auc,
                            chosen, self.R, self.B, self.alphas, self.description)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "contrast": self.contrast.value,
            "description": self.description,
            "populations": [
                {"mu1": list(p.mu1), "seed_offset": p.seed_offset, "N": p.N, "H": p.H, "A_h": p.A_h,
                 "sigma": p.sigma.tolist()}
                for p in self.populations
            ],
            "models": [list(m) for m in self.models],
            "expected_auc": list(self.expected_auc),
            "schemes": [{"label": s.label, "a_h": s.clusters_per_stratum,
                         "n_hj": list(s.units_per_cluster)} for s in self.schemes],
            "R": self.R,
            "B": self.B,
            "alphas": list(self.alphas),
        }


def load_schemes(loader: SurveyDataLoader) -> Tuple[SamplingScheme, ...]:
    """All sampling schemes, ordered by clusters per stratum then size"""
    raw = loader.sampling_schemes["schemes"]
    return tuple(
        SamplingScheme(int(a_h), tuple(sizes[size]), size)
        for a_h, sizes in sorted(raw.items(), key=lambda item: int(item[0]))
        for size in sorted(sizes)
    )


def load_scenario(scenario_id: int, loader: Optional[SurveyDataLoader] = None) -> ScenarioSpec:
    """
    Build a ScenarioSpec from the registry

    Args:
        scenario_id: Registry key
        loader: Data loader (defaults to the bundled registry)
    """
    loader = loader or SurveyDataLoader()
    defaults = loader.defaults
    raw = loader.get_scenario(scenario_id)

    populations = []
    for pop in raw["populations"]:
        kind = pop.get("covariance", "equicorrelated")
        if kind not in COVARIANCES:
            raise ConfigError(f"unknown covariance '{kind}' in scenario {scenario_id}")
        dim = len(pop["mu1"])
        sigma = COVARIANCES[kind](dim, pop.get("gamma", defaults.get("gamma", 0.15)))
        populations.append(PopulationSpec(
            mu1=tuple(float(v) for v in pop["mu1"]),
            sigma=sigma,
            mu0=tuple(float(v) for v in pop.get("mu0", defaults.get("mu0", [0.0] * dim))),
            N=int(pop.get("N", defaults.get("N", 100_000))),
            prevalence=float(pop.get("prevalence", defaults.get("prevalence", 0.5))),
            H=int(pop.get("H", defaults.get("H", 5))),
            A_h=int(pop.get("A_h", defaults.get("A_h", 20))),
            variables=tuple(defaults.get("variables", [f"X{j + 1}" for j in range(dim)])),
            design_variables=tuple(defaults.get("design_variables", ())),
            seed_offset=int(pop.get("seed_offset", 0)),
        ))

    return ScenarioSpec(
        id=int(scenario_id),
        contrast=Contrast(raw["contrast"]),
        populations=tuple(populations),
        models=tuple(tuple(m) for m in raw["models"]),
        expected_auc=tuple(float(v) for v in raw.get("expected_auc", ())),
        schemes=load_schemes(loader),
        R=int(raw.get("R", defaults.get("R", 500))),
        B=int(raw.get("B", defaults.get("B", DEFAULT_B))),
        alphas=tuple(float(a) for a in raw.get("alphas", defaults.get("alphas", DEFAULT_ALPHAS))),
        description=raw.get("description", ""),
    )

